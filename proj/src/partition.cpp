#include "mlpsd/partition.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include "mlpsd/error.hpp"
#include "mlpsd/rng.hpp"

namespace mlpsd {

std::string to_string(Strategy s) {
    switch (s) {
    case Strategy::CGP: return "CGP";
    case Strategy::DGP: return "DGP";
    case Strategy::random: return "random";
    }
    return "?";
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "CGP" || s == "cgp") return Strategy::CGP;
    if (s == "DGP" || s == "dgp") return Strategy::DGP;
    if (s == "random") return Strategy::random;
    throw ConfigError("unknown strategy '" + s + "'");
}

int LabelPartition::num_categories() const {
    int m = 0;
    for (const auto& c : clusters) m += static_cast<int>(c.size());
    return m;
}

void LabelPartition::validate(int num_categories) const {
    if (clusters.empty()) throw DataError("partition has no clusters");
    std::vector<int> seen(num_categories, 0);
    for (std::size_t t = 0; t < clusters.size(); ++t) {
        if (clusters[t].empty()) throw DataError("partition cluster " + std::to_string(t) + " is empty");
        for (int c : clusters[t]) {
            if (c < 0 || c >= num_categories) throw DataError("partition category index out of range");
            if (seen[c]++) throw DataError("partition clusters overlap at category " + std::to_string(c));
        }
    }
    for (int c = 0; c < num_categories; ++c)
        if (!seen[c]) throw DataError("partition does not cover category " + std::to_string(c));
}

std::vector<int> LabelPartition::owner() const {
    std::vector<int> own(num_categories(), -1);
    for (std::size_t t = 0; t < clusters.size(); ++t)
        for (int c : clusters[t]) own.at(c) = static_cast<int>(t);
    return own;
}

void canonicalize(std::vector<IndexList>& clusters) {
    for (auto& c : clusters) std::sort(c.begin(), c.end());
    std::sort(clusters.begin(), clusters.end(), [](const IndexList& a, const IndexList& b) {
        if (a.empty() || b.empty()) return b.empty() && !a.empty();
        return a.front() < b.front();
    });
}

namespace {

int nearest(const Eigen::MatrixXd& centroids, const Eigen::RowVectorXd& x, double* dist2 = nullptr) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
        const double d = (centroids.row(c) - x).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    if (dist2) *dist2 = best_d;
    return best;
}

Eigen::MatrixXd plus_plus_seeds(const Eigen::MatrixXd& points, int k, Rng& rng) {
    const auto n = points.rows();
    Eigen::MatrixXd centroids(k, points.cols());
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    centroids.row(0) = points.row(pick(rng));
    Eigen::VectorXd d2(n);
    for (Eigen::Index i = 0; i < n; ++i) d2(i) = (points.row(i) - centroids.row(0)).squaredNorm();
    for (int c = 1; c < k; ++c) {
        const double total = d2.sum();
        Eigen::Index chosen = 0;
        if (total > 0.0) {
            const double r = uniform01(rng) * total;
            double acc = 0.0;
            chosen = -1;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (d2(i) <= 0.0) continue;
                acc += d2(i);
                chosen = i;
                if (acc > r) break;
            }
        } else {
            chosen = pick(rng);
        }
        centroids.row(c) = points.row(chosen);
        for (Eigen::Index i = 0; i < n; ++i) d2(i) = std::min(d2(i), (points.row(i) - centroids.row(c)).squaredNorm());
    }
    return centroids;
}

void update_centroids(const Eigen::MatrixXd& points, const std::vector<int>& assignment, Eigen::MatrixXd& centroids,
                      std::vector<int>& sizes) {
    const int k = static_cast<int>(centroids.rows());
    sizes.assign(k, 0);
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        sums.row(assignment[i]) += points.row(static_cast<Eigen::Index>(i));
        ++sizes[assignment[i]];
    }
    for (int c = 0; c < k; ++c)
        if (sizes[c] > 0) centroids.row(c) = sums.row(c) / sizes[c];
}

/// Moves the point farthest from its centroid into each empty cluster.
void repair_empty(const Eigen::MatrixXd& points, std::vector<int>& assignment, Eigen::MatrixXd& centroids,
                  std::vector<int>& sizes) {
    const int k = static_cast<int>(centroids.rows());
    for (int c = 0; c < k; ++c) {
        if (sizes[c] > 0) continue;
        Eigen::Index far = -1;
        double far_d = -1.0;
        for (std::size_t i = 0; i < assignment.size(); ++i) {
            if (sizes[assignment[i]] < 2) continue;
            const auto r = static_cast<Eigen::Index>(i);
            const double d = (points.row(r) - centroids.row(assignment[i])).squaredNorm();
            if (d > far_d) {
                far_d = d;
                far = r;
            }
        }
        assignment[far] = c;
        update_centroids(points, assignment, centroids, sizes);
    }
}

} // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, const KMeansOptions& options) {
    const auto n = points.rows();
    if (k < 1) throw ConfigError("k-means: k must be >= 1");
    if (k > n) throw ConfigError("k-means: k exceeds the number of points");

    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart < std::max(1, options.restarts); ++restart) {
        Rng rng = make_rng(seed, {stream::kmeans, static_cast<std::uint64_t>(restart)});
        Eigen::MatrixXd centroids = plus_plus_seeds(points, k, rng);
        std::vector<int> assignment(n, -1);
        std::vector<int> sizes;
        for (int iter = 0; iter < options.max_iterations; ++iter) {
            bool changed = false;
            for (Eigen::Index i = 0; i < n; ++i) {
                const int c = nearest(centroids, points.row(i));
                if (c != assignment[i]) {
                    assignment[i] = c;
                    changed = true;
                }
            }
            if (!changed) break;
            update_centroids(points, assignment, centroids, sizes);
            repair_empty(points, assignment, centroids, sizes);
        }
        update_centroids(points, assignment, centroids, sizes);
        repair_empty(points, assignment, centroids, sizes);

        double inertia = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) inertia += (points.row(i) - centroids.row(assignment[i])).squaredNorm();
        if (inertia < best.inertia) {
            best.assignment = assignment;
            best.centroids = centroids;
            best.inertia = inertia;
            best.best_restart = restart;
        }
    }
    return best;
}

LabelPartition cluster_labels(const SpectralEmbedding<double>& embedding, int k, std::uint64_t seed,
                              const KMeansOptions& options) {
    const int m = static_cast<int>(embedding.vectors.rows());
    if (k < 1 || k > m) throw ConfigError("cluster_labels: k must lie in [1, m]");

    std::vector<bool> is_isolated(m, false);
    for (int i : embedding.isolated) is_isolated.at(i) = true;
    IndexList active;
    for (int i = 0; i < m; ++i)
        if (!is_isolated[i]) active.push_back(i);
    if (static_cast<int>(active.size()) < k)
        throw NumericError("cluster_labels: fewer connected categories than clusters");

    Eigen::MatrixXd points(static_cast<Eigen::Index>(active.size()), embedding.vectors.cols());
    for (std::size_t r = 0; r < active.size(); ++r) points.row(static_cast<Eigen::Index>(r)) = embedding.vectors.row(active[r]);
    const KMeansResult km = kmeans(points, k, seed, options);

    LabelPartition out;
    out.clusters.assign(k, {});
    for (std::size_t r = 0; r < active.size(); ++r) out.clusters[km.assignment[r]].push_back(active[r]);
    canonicalize(out.clusters);
    for (int v : embedding.isolated) {
        auto smallest = std::min_element(out.clusters.begin(), out.clusters.end(),
                                         [](const IndexList& a, const IndexList& b) { return a.size() < b.size(); });
        smallest->push_back(v);
    }
    canonicalize(out.clusters);
    out.k = k;
    out.seed = seed;
    out.validate(m);
    return out;
}

LabelPartition random_partition(int num_categories, int k, std::uint64_t seed) {
    if (k < 1 || k > num_categories) throw ConfigError("random_partition: k must lie in [1, m]");
    IndexList order(num_categories);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(seed, {stream::random_partition});
    std::shuffle(order.begin(), order.end(), rng);

    LabelPartition out;
    out.strategy = Strategy::random;
    out.k = k;
    out.seed = seed;
    const int base = num_categories / k;
    const int extra = num_categories % k;
    auto it = order.begin();
    for (int t = 0; t < k; ++t) {
        const int size = base + (t < extra ? 1 : 0);
        out.clusters.emplace_back(it, it + size);
        it += size;
    }
    canonicalize(out.clusters);
    out.validate(num_categories);
    return out;
}

LabelPartition partition_labels(const CoOccurrenceStats& stats, Strategy strategy, int k, std::uint64_t seed,
                                const PartitionOptions& options) {
    if (strategy == Strategy::random) {
        LabelPartition p = random_partition(stats.num_categories(), k, seed);
        p.tau = options.tau;
        return p;
    }
    const auto mode = strategy == Strategy::CGP ? AffinityMode::co : AffinityMode::dis;
    const auto affinity = build_affinity(stats, options.tau, mode, options.complement_base);
    const auto embedding = spectral_embed(affinity.values, k, options.row_normalize);
    LabelPartition p = cluster_labels(embedding, k, seed, options.kmeans);
    p.strategy = strategy;
    p.tau = options.tau;
    return p;
}

std::vector<SubTask> decompose(const AnnotationSet& set, const LabelPartition& partition) {
    partition.validate(set.num_categories());
    std::vector<SubTask> tasks;
    for (std::size_t t = 0; t < partition.clusters.size(); ++t) {
        SubTask task;
        task.cluster_index = static_cast<int>(t);
        task.categories = partition.clusters[t];
        std::sort(task.categories.begin(), task.categories.end());
        for (int i = 0; i < set.num_samples(); ++i) {
            const auto& labels = set.sample(i).labels;
            if (std::any_of(task.categories.begin(), task.categories.end(), [&](int c) { return labels(c) != 0; })) {
                task.sample_indices.push_back(i);
                task.sample_ids.push_back(set.sample(i).id);
            }
        }
        if (task.sample_indices.empty()) throw DataError("empty sub-task: cluster " + std::to_string(t));
        const auto rows = static_cast<Eigen::Index>(task.sample_indices.size());
        const auto cols = static_cast<Eigen::Index>(task.categories.size());
        task.restricted_labels.resize(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c)
                task.restricted_labels(r, c) = set.sample(task.sample_indices[r]).labels(task.categories[c]);
        tasks.push_back(std::move(task));
    }
    return tasks;
}

namespace {

double choose2(double x) { return x * (x - 1.0) / 2.0; }

std::vector<int> labels_of(const std::vector<IndexList>& clusters, int num_items) {
    std::vector<int> lab(num_items, -1);
    for (std::size_t t = 0; t < clusters.size(); ++t)
        for (int i : clusters[t]) {
            if (i < 0 || i >= num_items || lab[i] != -1) throw DataError("adjusted_rand_index: not a partition");
            lab[i] = static_cast<int>(t);
        }
    for (int v : lab)
        if (v == -1) throw DataError("adjusted_rand_index: not a partition");
    return lab;
}

} // namespace

double adjusted_rand_index(const std::vector<IndexList>& a, const std::vector<IndexList>& b, int num_items) {
    const auto la = labels_of(a, num_items);
    const auto lb = labels_of(b, num_items);
    Eigen::MatrixXd table = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
    for (int i = 0; i < num_items; ++i) table(la[i], lb[i]) += 1.0;
    double index = 0.0;
    for (Eigen::Index r = 0; r < table.rows(); ++r)
        for (Eigen::Index c = 0; c < table.cols(); ++c) index += choose2(table(r, c));
    double sum_a = 0.0, sum_b = 0.0;
    for (Eigen::Index r = 0; r < table.rows(); ++r) sum_a += choose2(table.row(r).sum());
    for (Eigen::Index c = 0; c < table.cols(); ++c) sum_b += choose2(table.col(c).sum());
    const double expected = sum_a * sum_b / choose2(num_items);
    const double max_index = (sum_a + sum_b) / 2.0;
    if (max_index == expected) return 1.0; // both trivial (one cluster or all singletons) and identical
    return (index - expected) / (max_index - expected);
}

double mean_within_cluster(const Eigen::MatrixXd& affinity, const LabelPartition& partition) {
    double total = 0.0;
    long pairs = 0;
    for (const auto& cluster : partition.clusters)
        for (std::size_t a = 0; a < cluster.size(); ++a)
            for (std::size_t b = a + 1; b < cluster.size(); ++b) {
                total += affinity(cluster[a], cluster[b]);
                ++pairs;
            }
    return pairs ? total / static_cast<double>(pairs) : 0.0;
}

Json partition_to_json(const LabelPartition& partition) {
    Json j;
    j["schema"] = kPartitionSchema;
    j["strategy"] = to_string(partition.strategy);
    j["tau"] = partition.tau;
    j["k"] = partition.k;
    j["seed"] = partition.seed;
    j["clusters"] = partition.clusters;
    return j;
}

LabelPartition partition_from_json(const Json& j) {
    if (!j.is_object() || j.value("schema", "") != kPartitionSchema) throw DataError("not a partition file");
    LabelPartition p;
    try {
        p.strategy = strategy_from_string(j.at("strategy").get<std::string>());
        p.tau = j.at("tau").get<double>();
        p.k = j.at("k").get<int>();
        p.seed = j.at("seed").get<std::uint64_t>();
        p.clusters = j.at("clusters").get<std::vector<IndexList>>();
    } catch (const Json::exception& e) {
        throw DataError(std::string("malformed partition file: ") + e.what());
    }
    if (static_cast<int>(p.clusters.size()) != p.k) throw DataError("partition file: k does not match clusters");
    p.validate(p.num_categories());
    return p;
}

void save_partition(const LabelPartition& partition, const std::filesystem::path& path) {
    write_text_file(path, dump_json(partition_to_json(partition)) + "\n");
}

LabelPartition load_partition(const std::filesystem::path& path) {
    return partition_from_json(read_json_file(path));
}

} // namespace mlpsd
