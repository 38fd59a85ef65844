#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "mlpsd/affinity.hpp"
#include "mlpsd/partition.hpp"
#include "mlpsd/spectral.hpp"

using namespace mlpsd;

namespace {

Eigen::MatrixXd random_similarity(int m, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd s(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) s(i, j) = i == j ? 1.0 : (u(rng) < 0.2 ? 0.0 : u(rng));
    return s;
}

/// Block-diagonal affinity with random positive weights inside blocks.
Eigen::MatrixXd block_affinity(const std::vector<int>& sizes, std::mt19937& rng, IndexList& truth) {
    const int m = std::accumulate(sizes.begin(), sizes.end(), 0);
    std::uniform_real_distribution<double> u(0.2, 1.0);
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(m, m);
    truth.clear();
    int start = 0;
    for (std::size_t b = 0; b < sizes.size(); ++b) {
        for (int i = start; i < start + sizes[b]; ++i) {
            truth.push_back(static_cast<int>(b));
            for (int j = start; j <= i; ++j) p(i, j) = p(j, i) = i == j ? 1.0 : u(rng);
        }
        start += sizes[b];
    }
    return p;
}

std::vector<IndexList> clusters_from_labels(const IndexList& labels) {
    std::vector<IndexList> out(*std::max_element(labels.begin(), labels.end()) + 1);
    for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(static_cast<int>(i));
    return out;
}

} // namespace

TEST(Affinity, ScalarClosedForm) {
    Eigen::Matrix2d s;
    s << 1.0, 0.5, 1.0, 1.0;
    const auto p = build_affinity(s, 3.0, AffinityMode::co);
    EXPECT_NEAR(p.values(0, 1), 0.8968502629920498, 1e-15);
    EXPECT_EQ(p.values(0, 1), p.values(1, 0));
    EXPECT_DOUBLE_EQ(p.values(0, 0), 1.0);
}

TEST(Affinity, TauOneOnSymmetricIsIdentityMap) {
    std::mt19937 rng(1);
    Eigen::MatrixXd s = random_similarity(6, rng);
    s = ((s + s.transpose()) / 2).eval();
    EXPECT_LT((build_affinity(s, 1.0, AffinityMode::co).values - s).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Affinity, ComplementIdentityAndDiagonal) {
    std::mt19937 rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::MatrixXd s = random_similarity(8, rng);
        const auto plus = build_affinity(s, 3.0, AffinityMode::co);
        const auto ones = build_affinity(s, 3.0, AffinityMode::dis, ComplementBase::all_ones);
        const auto ident = build_affinity(s, 3.0, AffinityMode::dis, ComplementBase::identity);
        EXPECT_TRUE((ones.values.array() == 1.0 - plus.values.array()).all());
        EXPECT_TRUE(ident.values == Eigen::MatrixXd::Identity(8, 8) - plus.values);
        EXPECT_TRUE(ones.values.diagonal().isZero(0.0));
        EXPECT_GE(ones.values.minCoeff(), 0.0);
        EXPECT_LE(ones.values.maxCoeff(), 1.0);
        EXPECT_EQ(plus.values, plus.values.transpose());
    }
}

TEST(Affinity, SmoothingMonotoneInTau) {
    std::mt19937 rng(3);
    const Eigen::MatrixXd s = random_similarity(7, rng);
    Eigen::MatrixXd prev = build_affinity(s, 0.5, AffinityMode::co).values;
    for (double tau : {1.0, 2.0, 3.0, 5.0, 10.0}) {
        const Eigen::MatrixXd next = build_affinity(s, tau, AffinityMode::co).values;
        EXPECT_TRUE((next.array() >= prev.array()).all()) << "tau " << tau;
        prev = next;
    }
}

TEST(Affinity, RejectsNonPositiveTau) {
    EXPECT_THROW(build_affinity(Eigen::Matrix2d::Ones(), 0.0, AffinityMode::co), ConfigError);
}

TEST(Spectral, BlockDiagonalHasZeroEigenvaluePerComponent) {
    std::mt19937 rng(4);
    IndexList truth;
    const Eigen::MatrixXd p = block_affinity({3, 4}, rng, truth);
    const auto emb = spectral_embed(p, 2);
    EXPECT_NEAR(emb.eigenvalues(0), 0.0, 1e-8);
    EXPECT_NEAR(emb.eigenvalues(1), 0.0, 1e-8);
    // Rows coincide within a block after normalization.
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j)
            if (truth[i] == truth[j]) {
                EXPECT_LT((emb.vectors.row(i) - emb.vectors.row(j)).norm(), 1e-7);
            }
}

TEST(Spectral, DisconnectedAffinityGivesZeroLaplacian) {
    const auto emb = spectral_embed(Eigen::MatrixXd::Identity(5, 5), 5);
    EXPECT_LT(emb.eigenvalues.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Spectral, PathGraphSecondEigenvalue) {
    // Unit-weight path 0-1-2-3. The normalized Laplacian's characteristic
    // polynomial factors as x (x - 1/2)(x - 3/2)(x - 2), so the second
    // eigenvalue is 1 - cos(pi/3) = 0.5.
    Eigen::Matrix4d p = Eigen::Matrix4d::Zero();
    for (int i = 0; i < 3; ++i) p(i, i + 1) = p(i + 1, i) = 1.0;
    const auto emb = spectral_embed(p, 4);
    EXPECT_NEAR(emb.eigenvalues(0), 0.0, 1e-12);
    EXPECT_NEAR(emb.eigenvalues(1), 1.0 - std::cos(M_PI / 3.0), 1e-12);
    EXPECT_NEAR(emb.eigenvalues(2), 1.5, 1e-12);
    EXPECT_NEAR(emb.eigenvalues(3), 2.0, 1e-12);
}

TEST(Spectral, RawEmbeddingIsOrthonormalAndSpectrumNonnegative) {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::MatrixXd s = random_similarity(9, rng);
        for (auto mode : {AffinityMode::co, AffinityMode::dis}) {
            const auto p = build_affinity(s, 3.0, mode);
            const auto emb = spectral_embed(p.values, 4, false);
            EXPECT_LT((emb.vectors.transpose() * emb.vectors - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(),
                      1e-8);
            EXPECT_GE(emb.eigenvalues.minCoeff(), -1e-8);
            for (int j = 1; j < 4; ++j) EXPECT_LE(emb.eigenvalues(j - 1), emb.eigenvalues(j));
        }
    }
}

TEST(Spectral, IsolatedVerticesAreExcluded) {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(4, 4);
    p.topLeftCorner(3, 3).setOnes();
    const auto emb = spectral_embed(p, 1);
    EXPECT_EQ(emb.isolated, IndexList{3});
    EXPECT_TRUE(emb.vectors.row(3).isZero(0.0));
}

TEST(Spectral, RejectsBadInput) {
    EXPECT_THROW(spectral_embed(Eigen::Matrix3d::Identity(), 4), ConfigError);
    Eigen::Matrix2d asym;
    asym << 1, 0.5, 0.2, 1;
    EXPECT_THROW(spectral_embed(asym, 1), ConfigError);
}

TEST(KMeans, CoincidentGroupsFormTheClusters) {
    SpectralEmbedding<double> emb;
    emb.vectors.resize(5, 2);
    emb.vectors << 1, 0, 0, 1, 1, 0, 0, 1, 1, 0;
    const auto part = cluster_labels(emb, 2, 0);
    EXPECT_EQ(part.clusters, (std::vector<IndexList>{{0, 2, 4}, {1, 3}}));
}

TEST(KMeans, DeterministicGivenSeed) {
    std::mt19937 rng(8);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd pts(40, 3);
    for (Eigen::Index i = 0; i < pts.size(); ++i) pts(i) = normal(rng);
    const auto a = kmeans(pts, 4, 21);
    const auto b = kmeans(pts, 4, 21);
    EXPECT_EQ(a.assignment, b.assignment);
    EXPECT_EQ(a.inertia, b.inertia);
    std::set<int> used(a.assignment.begin(), a.assignment.end());
    EXPECT_EQ(used.size(), 4u);
}

TEST(KMeans, EveryClusterNonemptyWithDuplicates) {
    // Three distinct points, k = 3, many duplicates: repair must keep all clusters.
    Eigen::MatrixXd pts(9, 1);
    pts << 0, 0, 0, 0, 0, 0, 0, 1, 2;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto r = kmeans(pts, 3, seed);
        std::set<int> used(r.assignment.begin(), r.assignment.end());
        EXPECT_EQ(used.size(), 3u);
    }
}

TEST(KMeans, RejectsTooManyClusters) {
    SpectralEmbedding<double> emb;
    emb.vectors = Eigen::MatrixXd::Ones(3, 1);
    EXPECT_THROW(cluster_labels(emb, 4, 0), ConfigError);
}

TEST(Partition, BlockDiagonalRecoveredBySpectralClustering) {
    std::mt19937 rng(9);
    for (int trial = 0; trial < 5; ++trial) {
        IndexList truth;
        const Eigen::MatrixXd p = block_affinity({2, 3, 4}, rng, truth);
        const auto part = cluster_labels(spectral_embed(p, 3), 3, trial);
        EXPECT_DOUBLE_EQ(adjusted_rand_index(part.clusters, clusters_from_labels(truth), 9), 1.0);
    }
}

TEST(Partition, IsolatedCategoryJoinsSmallestCluster) {
    // Categories 0-1 and 2-4 co-occur; category 5 never appears.
    const auto set = testing_util::from_labels(
        {{1, 1, 0, 0, 0, 0}, {1, 1, 0, 0, 0, 0}, {0, 0, 1, 1, 1, 0}, {0, 0, 1, 1, 0, 0}, {0, 0, 0, 1, 1, 0}});
    const auto part = partition_labels(compute_stats(set), Strategy::CGP, 2, 0);
    EXPECT_EQ(part.clusters, (std::vector<IndexList>{{0, 1, 5}, {2, 3, 4}}));
}

TEST(Partition, RandomPartitionSizes) {
    const auto singles = random_partition(4, 4, 1);
    EXPECT_EQ(singles.clusters.size(), 4u);
    for (const auto& c : singles.clusters) EXPECT_EQ(c.size(), 1u);

    const auto two = random_partition(5, 2, 1);
    std::multiset<std::size_t> sizes{two.clusters[0].size(), two.clusters[1].size()};
    EXPECT_EQ(sizes, (std::multiset<std::size_t>{2, 3}));
    EXPECT_EQ(random_partition(11, 3, 42).clusters, random_partition(11, 3, 42).clusters);
    for (int k = 1; k <= 11; ++k) EXPECT_NO_THROW(random_partition(11, k, 5).validate(11));
}

TEST(Partition, ValidityOnRandomData) {
    for (unsigned seed = 0; seed < 10; ++seed) {
        const auto stats = compute_stats(testing_util::random_set(80, 8, 2, 0.3, seed));
        for (auto s : {Strategy::CGP, Strategy::DGP, Strategy::random})
            for (int k : {1, 2, 3, 5, 8}) {
                const auto p = partition_labels(stats, s, k, seed);
                EXPECT_NO_THROW(p.validate(8));
                EXPECT_EQ(static_cast<int>(p.clusters.size()), k);
                EXPECT_EQ(p.strategy, s);
            }
    }
}

TEST(Partition, CgpWithinAffinityExceedsDgpOnPlantedData) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SynthSpec spec{.blocks = {3, 3, 4}, .n_samples = 2000, .feature_dim = 8, .p_block = 0.5, .q_in = 0.9,
                       .q_out = 0.01, .seed = seed};
        const auto stats = compute_stats(generate_synthetic(spec).set);
        const auto plus = build_affinity(stats, 3.0, AffinityMode::co).values;
        const auto cgp = partition_labels(stats, Strategy::CGP, 3, seed);
        const auto dgp = partition_labels(stats, Strategy::DGP, 3, seed);
        EXPECT_GT(mean_within_cluster(plus, cgp), mean_within_cluster(plus, dgp));
    }
}

TEST(Partition, JsonRoundTrip) {
    auto p = random_partition(7, 3, 4);
    p.tau = 3.0;
    const auto path = testing_util::temp_dir("partition") / "p.json";
    save_partition(p, path);
    const auto q = load_partition(path);
    EXPECT_EQ(q.clusters, p.clusters);
    EXPECT_EQ(q.strategy, p.strategy);
    EXPECT_EQ(q.k, 3);
    EXPECT_EQ(q.seed, 4u);
}

TEST(Partition, ValidateRejectsOverlapAndGaps) {
    LabelPartition p;
    p.clusters = {{0, 1}, {1, 2}};
    EXPECT_THROW(p.validate(3), DataError);
    p.clusters = {{0}, {2}};
    EXPECT_THROW(p.validate(3), DataError);
    p.clusters = {{0, 1, 2}, {}};
    EXPECT_THROW(p.validate(3), DataError);
}

TEST(Decompose, SingleClusterKeepsSamplesWithAnyPositive) {
    const auto set = testing_util::from_labels({{1, 0, 0}, {0, 0, 0}, {0, 1, 1}});
    LabelPartition whole;
    whole.clusters = {{0, 1, 2}};
    const auto tasks = decompose(set, whole);
    ASSERT_EQ(tasks.size(), 1u);
    EXPECT_EQ(tasks[0].sample_indices, (IndexList{0, 2}));
}

TEST(Decompose, EnumeratedSizesAndProjection) {
    const auto set = testing_util::from_labels({{1, 0}, {0, 1}, {1, 1}});
    LabelPartition p;
    p.clusters = {{0}, {1}};
    const auto tasks = decompose(set, p);
    EXPECT_EQ(tasks[0].sample_ids, (std::vector<std::string>{"s0", "s2"}));
    EXPECT_EQ(tasks[1].sample_ids, (std::vector<std::string>{"s1", "s2"}));
    EXPECT_EQ(tasks[0].restricted_labels.cast<int>().sum(), 2);
}

TEST(Decompose, MembershipMatchesDefinition) {
    const auto set = testing_util::random_set(60, 7, 2, 0.25, 3);
    const auto p = random_partition(7, 3, 9);
    for (const auto& task : decompose(set, p)) {
        std::set<int> members(task.sample_indices.begin(), task.sample_indices.end());
        for (int i = 0; i < set.num_samples(); ++i) {
            bool any = false;
            for (int c : task.categories) any = any || set.sample(i).labels(c);
            EXPECT_EQ(any, members.count(i) == 1);
        }
        for (std::size_t r = 0; r < task.sample_indices.size(); ++r)
            for (std::size_t c = 0; c < task.categories.size(); ++c)
                EXPECT_EQ(task.restricted_labels(r, c), set.sample(task.sample_indices[r]).labels(task.categories[c]));
    }
}

TEST(Decompose, EmptySubTaskIsAnError) {
    const auto set = testing_util::from_labels({{1, 0}, {1, 0}});
    LabelPartition p;
    p.clusters = {{0}, {1}};
    try {
        decompose(set, p);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("empty sub-task: cluster 1"), std::string::npos);
    }
}

TEST(AdjustedRandIndex, KnownValues) {
    EXPECT_DOUBLE_EQ(adjusted_rand_index({{0, 1}, {2, 3}}, {{2, 3}, {1, 0}}, 4), 1.0);
    // Contingency [[1,1],[1,1]]: index 0, expected 0.5*... -> -0.5.
    EXPECT_DOUBLE_EQ(adjusted_rand_index({{0, 1}, {2, 3}}, {{0, 2}, {1, 3}}, 4), -0.5);
}
