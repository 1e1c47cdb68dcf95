#include "support.hpp"

#include "fcadl/error.hpp"
#include "fcadl/fc_graph.hpp"
#include "fcadl/synthgen.hpp"

#include <doctest.h>

using namespace fcadl;

namespace {

// Oracle |EWMA Pearson| of columns a, b over the window starting at differenced row g.
double window_corr(const DifferencedPanel& d, Eigen::Index a, Eigen::Index b, std::size_t g, std::size_t window) {
    std::vector<double> x(window), y(window);
    for (std::size_t k = 0; k < window; ++k) {
        x[k] = d.values(static_cast<Eigen::Index>(g + k), a);
        y[k] = d.values(static_cast<Eigen::Index>(g + k), b);
    }
    return std::abs(test::oracle_weighted_corr(x, y, static_cast<double>(window) / 3.0));
}

} // namespace

TEST_CASE("identical spec and seed give bit-identical panels") {
    for (const char* kind : {"none", "dependency_break", "cpu_hog", "coupling_leak_nn", "delay_decouple"}) {
        const std::string text = std::string("fault_kind = ") + kind + "\n";
        const auto a = test::scenario(text, 17);
        const auto b = test::scenario(text, 17);
        CHECK(a.panel.values == b.panel.values);
        CHECK(a.panel.timestamps == b.panel.timestamps);
        CHECK(to_json(a.truth) == to_json(b.truth));
        CHECK(a.panel.values != test::scenario(text, 18).panel.values);
    }
}

TEST_CASE("coupled pair correlates in every window") {
    const auto s = test::scenario("n_services = 2\nworkload_group_size = 1\nedges = 0-1:0.9\n"
                                  "gain_min = 0.05\ngain_max = 0.05\nnoise_sigma = 0.01\n",
                                  5);
    const auto d = difference(s.panel);
    double lowest = 1.0;
    for (std::size_t g = 0; g + 360 <= d.rows(); g += 10) {
        lowest = std::min(lowest, window_corr(d, 0, 1, g, 360));
    }
    CHECK(lowest >= 0.7);
}

TEST_CASE("coupled pairs are stationary before the fault") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto spec = scenario_from_config(test::kv("fault_kind = dependency_break\n"), seed);
        const auto s = generate(spec);
        const auto graphs = build_fc_sequence(difference(s.panel), FcParams{});
        const std::size_t onset = *s.truth.onset_index;
        double worst = 0.0;
        for (const auto& c : spec.dependencies) {
            double lo = 1.0, hi = 0.0;
            for (std::size_t g = 0; g + 360 < onset; ++g) {
                const double w = graphs[g].weights(static_cast<Eigen::Index>(c.a), static_cast<Eigen::Index>(c.b));
                lo = std::min(lo, w);
                hi = std::max(hi, w);
            }
            worst = std::max(worst, hi - lo);
        }
        CHECK(worst < 0.2);
    }
}

TEST_CASE("dependency break removes the target's edges within a window") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto s = test::scenario("fault_kind = dependency_break\n", seed);
        const auto graphs = build_fc_sequence(difference(s.panel), FcParams{});
        const auto& ids = s.panel.service_ids;
        const auto x = static_cast<Eigen::Index>(std::find(ids.begin(), ids.end(), s.truth.targets[0]) - ids.begin());
        const std::size_t onset = *s.truth.onset_index;
        CHECK(graphs[onset - 361].weights.row(x).maxCoeff() >= 0.1);
        // Graph g ends at raw sample g + window, so g = onset + window ends one window after t* + window.
        std::optional<std::size_t> cleared;
        double mean_after = 0.0;
        for (std::size_t g = onset; g < graphs.size(); ++g) {
            if (!cleared && graphs[g].weights.row(x).maxCoeff() < 0.1) {
                cleared = g;
            }
            mean_after += graphs[g].weights.row(x).sum() / static_cast<double>((graphs.size() - onset) * (ids.size() - 1));
        }
        REQUIRE(cleared.has_value());
        CHECK(*cleared <= onset + 360);
        CHECK(mean_after < 0.05);
    }
}

TEST_CASE("onset lies strictly inside the panel") {
    for (const char* kind : {"dependency_break", "cpu_hog", "coupling_leak_nn", "delay_decouple"}) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto s = test::scenario(std::string("fault_kind = ") + kind + "\n", seed);
            REQUIRE(s.truth.onset_index.has_value());
            CHECK(*s.truth.onset_index > 0);
            CHECK(*s.truth.onset_index + 1 < s.panel.timestamps.size());
            CHECK(s.panel.timestamps[*s.truth.onset_index] == *s.truth.onset_timestamp);
            CHECK(s.truth.fault_kind == kind);
        }
    }
    const auto none = test::scenario("", 0);
    CHECK_FALSE(none.truth.onset_index.has_value());
    CHECK(to_json(none.truth)["onset_timestamp"].is_null());
}

TEST_CASE("explicit fault targets and co-location") {
    const auto spec = scenario_from_config(test::kv("fault_kind = cpu_hog\nfault_targets = 3, 7\n"), 2);
    REQUIRE(spec.faults.size() == 1);
    CHECK(spec.faults[0].targets == std::vector<std::size_t>{3, 7});
    for (std::size_t i = 0; i < spec.node_of.size(); ++i) {
        CHECK(spec.node_of[i] == static_cast<int>(i % 5));
    }
    for (const auto& comps : spec.workload) {
        for (const auto& c : comps) {
            CHECK(c.frequency_hz >= 0.01);
            CHECK(c.frequency_hz <= 0.06);
        }
    }
}

TEST_CASE("infeasible scenarios are rejected") {
    const auto code_of = [](const std::string& text) {
        try {
            generate(scenario_from_config(test::kv(text), 0));
        } catch (const Error& e) {
            return e.code();
        }
        return Errc::contract;
    };
    CHECK(code_of("fault_kind = cpu_hog\nfault_start_s = 600\n") == Errc::spec);
    CHECK(code_of("fault_kind = cpu_hog\nfault_start_s = 9000\n") == Errc::spec);
    CHECK(code_of("fault_kind = cpu_hog\nfault_start_s = 4000\nfault_end_s = 3000\n") == Errc::spec);
    CHECK(code_of("duration_s = 3000\n") == Errc::spec);
    CHECK(code_of("n_services = 1\n") == Errc::spec);
    CHECK(code_of("fault_kind = meltdown\n") == Errc::spec);
    CHECK(code_of("fault_kind = cpu_hog\nfault_targets = nosuch\n") == Errc::spec);
    CHECK(code_of("edges = 0-1\n") == Errc::spec);
    CHECK(code_of("frequency_min_hz = 0.001\n") == Errc::spec);
    CHECK(code_of("colour = blue\n") == Errc::config);
}
