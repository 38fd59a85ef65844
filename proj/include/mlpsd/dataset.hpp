#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mlpsd {

using LabelVector = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>;
using LabelMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;
using IndexList = std::vector<int>;

struct Sample {
    std::string id;
    Eigen::VectorXd features;
    LabelVector labels;
};

bool operator==(const Sample& a, const Sample& b);

/// Immutable multi-label dataset. The constructor validates shapes, label
/// values and id uniqueness; feature finiteness is checked at the file
/// boundary (save/load).
class AnnotationSet {
public:
    AnnotationSet(std::vector<std::string> categories, std::vector<Sample> samples, int feature_dim);

    const std::vector<std::string>& categories() const noexcept { return categories_; }
    const std::vector<Sample>& samples() const noexcept { return samples_; }
    const Sample& sample(int i) const { return samples_.at(static_cast<std::size_t>(i)); }
    int num_categories() const noexcept { return static_cast<int>(categories_.size()); }
    int num_samples() const noexcept { return static_cast<int>(samples_.size()); }
    int feature_dim() const noexcept { return feature_dim_; }

    /// n x d, one row per sample.
    Eigen::MatrixXd feature_matrix() const;
    /// n x m, entries 0/1.
    LabelMatrix label_matrix() const;

    /// Subset in the given order; categories unchanged.
    AnnotationSet select(const IndexList& sample_indices) const;

    bool operator==(const AnnotationSet&) const = default;

private:
    std::vector<std::string> categories_;
    std::vector<Sample> samples_;
    int feature_dim_;
};

inline constexpr const char* kDatasetSchema = "mlpsd-dataset-v1";

AnnotationSet load_annotations(const std::filesystem::path& path);
void save_annotations(const AnnotationSet& set, const std::filesystem::path& path);

/// Planted block structure for synthetic data.
struct SynthSpec {
    std::vector<int> blocks;
    int n_samples = 2000;
    int feature_dim = 16;
    double p_block = 0.5;
    double q_in = 0.9;
    double q_out = 0.01;
    double noise_sigma = 0.3;
    std::uint64_t seed = 0;

    int num_categories() const;
    void validate() const;
};

struct SyntheticData {
    AnnotationSet set;
    std::vector<IndexList> planted;
};

/// Labels follow the block process; features are the sum of the active
/// categories' unit prototypes plus isotropic Gaussian noise. Sample i draws
/// only from the substream (seed, i), so growing n leaves earlier samples as
/// they were.
SyntheticData generate_synthetic(const SynthSpec& spec);

/// Unit-norm prototype per category (m x d), a pure function of (seed, m, d).
Eigen::MatrixXd category_prototypes(std::uint64_t seed, int num_categories, int feature_dim);

} // namespace mlpsd
