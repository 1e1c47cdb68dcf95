#include "support.hpp"

#include "fcadl/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>

using namespace fcadl;

namespace {

struct Blobs {
    DistanceMatrix dm;
    std::vector<int> truth;
};

Blobs three_blobs(std::uint64_t seed) {
    auto rng = make_engine(seed, 3);
    std::vector<double> x;
    Blobs b;
    for (int c = 0; c < 3; ++c) {
        for (int k = 0; k < 50; ++k) {
            x.push_back(10.0 * c + 0.5 * gaussian(rng));
            b.truth.push_back(c);
        }
    }
    Eigen::MatrixXd d(150, 150);
    for (Eigen::Index i = 0; i < 150; ++i) {
        for (Eigen::Index j = 0; j < 150; ++j) {
            d(i, j) = std::abs(x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)]);
        }
    }
    b.dm = test::distances_of(d);
    return b;
}

DistanceMatrix two_blocks(Eigen::Index a, Eigen::Index b, std::uint64_t seed) {
    auto rng = make_engine(seed, 4);
    const Eigen::Index t = a + b;
    Eigen::MatrixXd d(t, t);
    for (Eigen::Index i = 0; i < t; ++i) {
        d(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < t; ++j) {
            const bool same = (i < a) == (j < a);
            d(i, j) = d(j, i) = same ? uniform(rng, 0.01, 0.1) : uniform(rng, 10.0, 12.0);
        }
    }
    return test::distances_of(d);
}

// Fraction of points whose label disagrees with the majority label of their
// true group, counting noise as wrong.
double mislabel_rate(const std::vector<int>& labels, const std::vector<int>& truth) {
    std::map<int, std::map<int, int>> votes;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        ++votes[truth[i]][labels[i]];
    }
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto& v = votes[truth[i]];
        const auto best = std::max_element(v.begin(), v.end(), [](auto& l, auto& r) {
            return (l.first == kNoise ? -1 : l.second) < (r.first == kNoise ? -1 : r.second);
        });
        if (labels[i] == kNoise || labels[i] != best->first) {
            ++wrong;
        }
    }
    return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

void check_invariants(const ClusterAssignment& a, const ClusterParams& p) {
    CHECK(a.labels.size() == a.probabilities.size());
    std::map<int, int> sizes;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.labels[i] == kNoise) {
            CHECK(a.probabilities[i] == 0.0);
        } else {
            CHECK(a.probabilities[i] > 0.0);
            CHECK(a.probabilities[i] <= 1.0);
            ++sizes[a.labels[i]];
        }
    }
    for (const auto& [label, n] : sizes) {
        CHECK(n >= p.min_cluster_size);
        CHECK(label < static_cast<int>(sizes.size()));
    }
    CHECK(a.cluster_count() == static_cast<int>(sizes.size()));
}

} // namespace

TEST_CASE("core distances count the point itself") {
    Eigen::MatrixXd d(4, 4);
    d << 0, 1, 4, 9, 1, 0, 2, 5, 4, 2, 0, 3, 9, 5, 3, 0;
    ClusterParams p;
    p.min_cluster_size = 2;
    p.min_samples = 3;
    const auto model = HdbscanModel::fit(test::distances_of(d), p);
    // Third smallest entry of each row, self included.
    CHECK(model.core_distances() == std::vector<double>{4, 2, 3, 5});
}

TEST_CASE("three separated blobs") {
    const auto b = three_blobs(1);
    const auto p = ClusterParams::defaults_for(150);
    CHECK(p.min_cluster_size == 30);
    const auto a = cluster(b.dm, p);
    CHECK(a.cluster_count() == 3);
    CHECK(mislabel_rate(a.labels, b.truth) <= 0.05);
    check_invariants(a, p);
}

TEST_CASE("two-block matrix gives exactly two deterministic clusters") {
    const auto dm = two_blocks(40, 60, 5);
    const auto p = ClusterParams::defaults_for(100);
    const auto a = cluster(dm, p);
    const auto again = cluster(dm, p);
    CHECK(a.cluster_count() == 2);
    CHECK(a.labels == again.labels);
    CHECK(a.probabilities == again.probabilities);
    for (Eigen::Index i = 0; i < 100; ++i) {
        CHECK(a.labels[static_cast<std::size_t>(i)] == (i < 40 ? 0 : 1));
    }
    check_invariants(a, p);
}

TEST_CASE("equal distances never give more than one cluster") {
    Eigen::MatrixXd d = Eigen::MatrixXd::Constant(30, 30, 2.0);
    d.diagonal().setZero();
    const auto a = cluster(test::distances_of(d), ClusterParams::defaults_for(30));
    CHECK(a.cluster_count() <= 1);
}

TEST_CASE("too few snapshots fall back to one cluster with a warning") {
    ClusterParams p;
    p.min_cluster_size = 10;
    const auto a = cluster(two_blocks(8, 7, 1), p);
    CHECK(a.cluster_count() == 1);
    CHECK(!a.warnings.empty());
    CHECK(std::all_of(a.labels.begin(), a.labels.end(), [](int l) { return l == 0; }));
}

TEST_CASE("bad distance input is a contract error") {
    Eigen::MatrixXd d = two_blocks(10, 10, 2).d;
    d(0, 3) += 1.0;
    CHECK_THROWS_AS(cluster(test::distances_of(d), ClusterParams::defaults_for(20)), Error);
    d = two_blocks(10, 10, 2).d;
    d(2, 5) = d(5, 2) = -1.0;
    try {
        cluster(test::distances_of(d), ClusterParams::defaults_for(20));
        FAIL("negative distance accepted");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::contract);
    }
}

TEST_CASE("permuting snapshots permutes the partition") {
    const auto b = three_blobs(7);
    const auto p = ClusterParams::defaults_for(150);
    const auto a = cluster(b.dm, p);
    std::vector<int> order(150);
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_engine(9);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
        std::swap(order[i], order[static_cast<std::size_t>(uniform_index(rng, i + 1))]);
    }
    Eigen::MatrixXd d(150, 150);
    for (Eigen::Index i = 0; i < 150; ++i) {
        for (Eigen::Index j = 0; j < 150; ++j) {
            d(i, j) = b.dm.d(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }
    }
    const auto q = cluster(test::distances_of(d), p);
    std::map<int, int> rename;
    for (std::size_t i = 0; i < 150; ++i) {
        const int before = a.labels[static_cast<std::size_t>(order[i])];
        const int after = q.labels[i];
        CHECK((before == kNoise) == (after == kNoise));
        if (before != kNoise) {
            auto [it, inserted] = rename.emplace(before, after);
            CHECK(it->second == after);
        }
    }
}

TEST_CASE("detect_change decision rule") {
    auto assignment_of = [](std::vector<int> labels) {
        ClusterAssignment a;
        a.labels = std::move(labels);
        a.probabilities.assign(a.labels.size(), 1.0);
        for (std::size_t i = 0; i < a.labels.size(); ++i) {
            a.snapshot_timestamps.push_back(100 + static_cast<Timestamp>(i));
        }
        return a;
    };
    std::vector<int> clean(50, 0);
    clean.resize(100, 1);
    auto r = detect_change(assignment_of(clean));
    CHECK(r.change_index == 50);
    CHECK(r.change_timestamp == 150);
    CHECK(r.pre_label == 0);
    CHECK(r.post_label == 1);

    CHECK(!detect_change(assignment_of(std::vector<int>(50, 0))).has_change());

    std::vector<int> flicker(48, 0);
    flicker.push_back(1);
    flicker.push_back(0);
    flicker.resize(100, 1);
    CHECK(detect_change(assignment_of(flicker)).change_index == 50);

    // Noise neither triggers nor resets.
    std::vector<int> noisy{kNoise, kNoise, 1, 1, 1, kNoise, kNoise, 0, 0, kNoise, 0, kNoise, 0, 0, 0};
    r = detect_change(assignment_of(noisy));
    CHECK(r.pre_label == 1);
    CHECK(r.change_index == 7);
    CHECK(detect_change(assignment_of(noisy), 6).change_index == 7);
    CHECK(!detect_change(assignment_of(noisy), 7).has_change());

    try {
        detect_change(assignment_of(std::vector<int>(10, kNoise)));
        FAIL("all-noise accepted");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::no_signal);
    }
    const auto j = to_json(detect_change(assignment_of(std::vector<int>(5, 0))));
    CHECK(j["no_change"] == true);
}

TEST_CASE("far outliers are scored as noise") {
    const auto dm = two_blocks(40, 60, 3);
    const auto model = HdbscanModel::fit(dm, ClusterParams::defaults_for(100));
    const std::vector<double> far(100, 100.0 * dm.d.maxCoeff());
    const auto pred = score_new_snapshot(far, model.assignment(), model);
    CHECK(pred.label == kNoise);
    CHECK(pred.probability == 0.0);
    CHECK_THROWS_AS(model.predict(std::vector<double>(99, 0.0)), Error);

    std::vector<double> near_first(100);
    for (Eigen::Index i = 0; i < 100; ++i) {
        near_first[static_cast<std::size_t>(i)] = dm.d(3, i);
    }
    CHECK(model.predict(near_first).label == 0);
}

TEST_CASE("streaming replay agrees with batch labels") {
    const auto s = test::scenario("fault_kind = dependency_break\n", 4);
    const auto graphs = build_fc_sequence(difference(s.panel), FcParams{});
    const auto dm = distance_matrix(graphs);
    const auto model = HdbscanModel::fit(dm, ClusterParams::defaults_for(dm.size()));
    std::size_t agree = 0;
    for (Eigen::Index t = 0; t < dm.d.rows(); ++t) {
        const Eigen::VectorXd row = dm.d.row(t).transpose();
        const auto pred = model.predict(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
        agree += pred.label == model.assignment().labels[static_cast<std::size_t>(t)] ? 1U : 0U;
    }
    CHECK(static_cast<double>(agree) / static_cast<double>(dm.size()) >= 0.9);
}

TEST_CASE("single-fault scenarios split into exactly two clusters") {
    int two = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto s = test::scenario("fault_kind = dependency_break\n", seed);
        const auto graphs = build_fc_sequence(difference(s.panel), FcParams{});
        const auto a = cluster(distance_matrix(graphs), ClusterParams::defaults_for(graphs.size()));
        check_invariants(a, ClusterParams::defaults_for(graphs.size()));
        two += a.cluster_count() == 2 ? 1 : 0;
    }
    CHECK(two >= 18);
}

TEST_CASE("assignment csv layout") {
    const auto a = cluster(two_blocks(10, 10, 1), ClusterParams::defaults_for(20));
    std::ostringstream out;
    write_assignment_csv(a, out);
    CHECK(out.str().rfind("timestamp,label,probability\n1000,0,", 0) == 0);
}
