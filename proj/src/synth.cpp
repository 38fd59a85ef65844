#include <cstdio>
#include <numeric>
#include <random>
#include <string>

#include "mlpsd/dataset.hpp"
#include "mlpsd/error.hpp"
#include "mlpsd/rng.hpp"

namespace mlpsd {

int SynthSpec::num_categories() const {
    return std::accumulate(blocks.begin(), blocks.end(), 0);
}

void SynthSpec::validate() const {
    if (blocks.empty()) throw ConfigError("synth: at least one block is required");
    for (int b : blocks)
        if (b < 1) throw ConfigError("synth: block sizes must be positive");
    if (num_categories() < 2) throw ConfigError("synth: at least 2 categories are required");
    if (n_samples < 0) throw ConfigError("synth: n_samples must be >= 0");
    if (feature_dim < 1) throw ConfigError("synth: feature_dim must be >= 1");
    for (double p : {p_block, q_in, q_out})
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("synth: probabilities must lie in [0, 1]");
    if (!(noise_sigma >= 0.0)) throw ConfigError("synth: noise_sigma must be >= 0");
}

Eigen::MatrixXd category_prototypes(std::uint64_t seed, int num_categories, int feature_dim) {
    Eigen::MatrixXd protos(num_categories, feature_dim);
    for (int c = 0; c < num_categories; ++c) {
        Rng rng = make_rng(seed, {stream::prototypes, static_cast<std::uint64_t>(c)});
        std::normal_distribution<double> normal;
        double norm = 0.0;
        // Redraw on an all-zero vector.
        while (norm == 0.0) {
            for (int k = 0; k < feature_dim; ++k) protos(c, k) = normal(rng);
            norm = protos.row(c).norm();
        }
        protos.row(c) /= norm;
    }
    return protos;
}

SyntheticData generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    const int m = spec.num_categories();
    const int d = spec.feature_dim;

    std::vector<int> block_of(m);
    std::vector<IndexList> planted;
    for (int b = 0, c = 0; b < static_cast<int>(spec.blocks.size()); ++b) {
        planted.emplace_back();
        for (int j = 0; j < spec.blocks[b]; ++j, ++c) {
            block_of[c] = b;
            planted.back().push_back(c);
        }
    }

    const Eigen::MatrixXd protos = category_prototypes(spec.seed, m, d);

    std::vector<Sample> samples;
    samples.reserve(spec.n_samples);
    std::vector<bool> active(spec.blocks.size());
    for (int i = 0; i < spec.n_samples; ++i) {
        Rng rng = make_rng(spec.seed, {stream::samples, static_cast<std::uint64_t>(i)});
        // Every draw is consumed regardless of the probabilities so the
        // stream layout is fixed.
        for (std::size_t b = 0; b < active.size(); ++b) active[b] = uniform01(rng) < spec.p_block;
        Sample s;
        char id[32];
        std::snprintf(id, sizeof id, "s%06d", i);
        s.id = id;
        s.labels = LabelVector::Zero(m);
        s.features = Eigen::VectorXd::Zero(d);
        for (int c = 0; c < m; ++c) {
            const double q = active[block_of[c]] ? spec.q_in : spec.q_out;
            if (uniform01(rng) < q) {
                s.labels(c) = 1;
                s.features += protos.row(c).transpose();
            }
        }
        std::normal_distribution<double> normal;
        for (int k = 0; k < d; ++k) s.features(k) += spec.noise_sigma * normal(rng);
        samples.push_back(std::move(s));
    }

    std::vector<std::string> names;
    for (int c = 0; c < m; ++c) names.push_back("c" + std::to_string(c));
    return {AnnotationSet(std::move(names), std::move(samples), d), std::move(planted)};
}

} // namespace mlpsd
