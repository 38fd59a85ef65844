#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlpsd/affinity.hpp"
#include "mlpsd/costats.hpp"
#include "mlpsd/dataset.hpp"
#include "mlpsd/json_util.hpp"
#include "mlpsd/spectral.hpp"

namespace mlpsd {

enum class Strategy { CGP, DGP, random };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

/// k disjoint, nonempty category sets covering 0..m-1. Clusters are kept in
/// canonical order: members ascending, clusters ordered by smallest member.
struct LabelPartition {
    std::vector<IndexList> clusters;
    Strategy strategy = Strategy::CGP;
    double tau = 0.0;
    int k = 0;
    std::uint64_t seed = 0;

    int num_categories() const;
    /// Throws DataError unless disjoint, covering 0..m-1 and nonempty.
    void validate(int num_categories) const;
    /// cluster index owning each category.
    std::vector<int> owner() const;
};

void canonicalize(std::vector<IndexList>& clusters);

struct KMeansOptions {
    int restarts = 10;
    int max_iterations = 100;
};

struct KMeansResult {
    std::vector<int> assignment;
    Eigen::MatrixXd centroids;
    double inertia = 0.0;
    int best_restart = 0;
};

/// Lloyd iterations from k-means++ seeding, best of several restarts by
/// within-cluster sum of squares (ties keep the earliest restart). Rows of
/// `points` are observations. Empty clusters are refilled with the point
/// farthest from its own centroid.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, const KMeansOptions& options = {});

/// k-means on the embedding rows; isolated vertices are then assigned to the
/// smallest cluster (ties to the lowest cluster index).
LabelPartition cluster_labels(const SpectralEmbedding<double>& embedding, int k, std::uint64_t seed,
                              const KMeansOptions& options = {});

/// Random permutation cut into k contiguous chunks whose sizes differ by at most one.
LabelPartition random_partition(int num_categories, int k, std::uint64_t seed);

struct PartitionOptions {
    double tau = 3.0;
    ComplementBase complement_base = ComplementBase::all_ones;
    bool row_normalize = true;
    KMeansOptions kmeans;
};

/// Stats -> affinity -> embedding -> clustering for CGP/DGP; random_partition
/// for Strategy::random. Provenance fields are filled in.
LabelPartition partition_labels(const CoOccurrenceStats& stats, Strategy strategy, int k, std::uint64_t seed,
                                const PartitionOptions& options = {});

struct SubTask {
    int cluster_index = 0;
    IndexList categories;
    IndexList sample_indices;
    std::vector<std::string> sample_ids;
    LabelMatrix restricted_labels; // |sample_ids| x |categories|
};

/// One sub-task per cluster holding the samples with at least one positive
/// label among the cluster's categories.
std::vector<SubTask> decompose(const AnnotationSet& set, const LabelPartition& partition);

/// Adjusted Rand Index between two partitions of the same m items.
double adjusted_rand_index(const std::vector<IndexList>& a, const std::vector<IndexList>& b, int num_items);

/// Mean affinity over unordered pairs i != j that share a cluster; 0 when
/// every cluster is a singleton.
double mean_within_cluster(const Eigen::MatrixXd& affinity, const LabelPartition& partition);

inline constexpr const char* kPartitionSchema = "mlpsd-partition-v1";

Json partition_to_json(const LabelPartition& partition);
LabelPartition partition_from_json(const Json& j);
void save_partition(const LabelPartition& partition, const std::filesystem::path& path);
LabelPartition load_partition(const std::filesystem::path& path);

} // namespace mlpsd
