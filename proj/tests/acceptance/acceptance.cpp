// Acceptance checks: one PASS/FAIL line per criterion.
#include "../support.hpp"

#include "fcadl/evalharness.hpp"
#include "fcadl/pipeline.hpp"
#include "fcadl/random.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

using namespace fcadl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

Outcome correlation_oracle() {
    const auto t0 = Clock::now();
    double worst_weighted = 0.0, worst_uniform = 0.0;
    for (std::uint64_t p = 0; p < 1000; ++p) {
        auto rng = make_engine(11, p);
        const double mix = uniform(rng, -1.0, 1.0);
        std::vector<double> x(360), y(360);
        for (std::size_t k = 0; k < 360; ++k) {
            x[k] = uniform(rng, 1.0, 5.0) * gaussian(rng);
            y[k] = mix * x[k] + gaussian(rng);
        }
        worst_weighted = std::max(worst_weighted, std::abs(ewma_pearson(x, y, 120.0) - test::oracle_weighted_corr(x, y, 120.0)));
        worst_uniform = std::max(worst_uniform, std::abs(ewma_pearson(x, y, 1e12) - test::oracle_pearson(x, y)));
    }
    const double secs = seconds_since(t0);
    return {worst_weighted <= 1e-12 && worst_uniform <= 1e-9 && secs < 5.0,
            fmt("max |err| weighted %.2e, uniform limit %.2e, %.2f s", worst_weighted, worst_uniform, secs)};
}

Outcome deltacon_oracle() {
    double residual = 0.0, distance_err = 0.0, matrix_err = 0.0, largest = 0.0;
    for (std::uint64_t g = 0; g < 100; ++g) {
        const auto n = static_cast<Eigen::Index>(2 + (g * 198) / 99);
        const auto w = test::random_graph(n, 0.1, g);
        const auto s = affinity(w);
        residual = std::max(residual, (affinity_system(w, kDefaultEpsilon) * s.s -
                                       Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff());
        if (g % 10 == 0) {
            const auto other = affinity(test::random_graph(n, 0.1, g + 1000));
            const double got = rooted_distance(s, other);
            largest = std::max(largest, got);
            distance_err = std::max(distance_err, std::abs(got - test::oracle_rooted_distance(s.s, other.s)));
        }
    }
    std::vector<FcGraph> graphs, permuted;
    std::vector<Eigen::Index> perm(30);
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.begin() + 17);
    Eigen::PermutationMatrix<Eigen::Dynamic> p(Eigen::Map<Eigen::VectorX<Eigen::Index>>(perm.data(), 30).cast<int>());
    for (std::uint64_t k = 0; k < 12; ++k) {
        const auto w = test::random_graph(30, 0.2, 500 + k);
        graphs.push_back(test::graph_from(w));
        permuted.push_back(test::graph_from(p * w * p.transpose()));
    }
    const auto dm = distance_matrix(graphs);
    const auto dp = distance_matrix(permuted);
    matrix_err = std::max({(dm.d - dm.d.transpose()).cwiseAbs().maxCoeff(), dm.d.diagonal().cwiseAbs().maxCoeff(),
                           (dm.d - dp.d).cwiseAbs().maxCoeff()});
    return {residual <= 1e-8 && distance_err <= 1e-10 && matrix_err <= 1e-10,
            fmt("residual %.2e, distance err %.2e (largest distance %.3g), symmetry/diagonal/permutation %.2e",
                residual, distance_err, largest, matrix_err)};
}

Outcome clustering_fixtures() {
    std::vector<double> x;
    std::vector<int> truth;
    auto rng = make_engine(1, 3);
    for (int c = 0; c < 3; ++c) {
        for (int k = 0; k < 50; ++k) {
            x.push_back(10.0 * c + 0.5 * gaussian(rng));
            truth.push_back(c);
        }
    }
    Eigen::MatrixXd d(150, 150);
    for (Eigen::Index i = 0; i < 150; ++i) {
        for (Eigen::Index j = 0; j < 150; ++j) {
            d(i, j) = std::abs(x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)]);
        }
    }
    const auto blobs = cluster(test::distances_of(d), ClusterParams::defaults_for(150));
    std::size_t wrong = 0;
    for (int c = 0; c < 3; ++c) {
        std::map<int, int> votes;
        for (std::size_t i = 0; i < 150; ++i) {
            if (truth[i] == c && blobs.labels[i] != kNoise) {
                ++votes[blobs.labels[i]];
            }
        }
        const int majority = votes.empty() ? kNoise
                                           : std::max_element(votes.begin(), votes.end(), [](auto& a, auto& b) {
                                                 return a.second < b.second;
                                             })->first;
        for (std::size_t i = 0; i < 150; ++i) {
            wrong += truth[i] == c && (blobs.labels[i] == kNoise || blobs.labels[i] != majority) ? 1U : 0U;
        }
    }
    const double mislabel = static_cast<double>(wrong) / 150.0;

    auto brng = make_engine(5, 4);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(100, 100);
    for (Eigen::Index i = 0; i < 100; ++i) {
        for (Eigen::Index j = i + 1; j < 100; ++j) {
            b(i, j) = b(j, i) = (i < 40) == (j < 40) ? uniform(brng, 0.01, 0.1) : uniform(brng, 10.0, 12.0);
        }
    }
    const auto one = cluster(test::distances_of(b), ClusterParams::defaults_for(100));
    const auto two = cluster(test::distances_of(b), ClusterParams::defaults_for(100));
    const bool ok = blobs.cluster_count() == 3 && mislabel <= 0.05 && one.cluster_count() == 2 &&
                    one.labels == two.labels && one.probabilities == two.probabilities;
    return {ok, fmt("blobs: %d clusters, %.1f%% mislabelled; blocks: %d clusters, repeat %s", blobs.cluster_count(),
                    100.0 * mislabel, one.cluster_count(), one.labels == two.labels ? "identical" : "differs")};
}

struct SeedRun {
    std::optional<std::size_t> boundary;
    std::size_t truth_window = 0;
    std::size_t windows = 0;
    std::optional<RcaRanking> ranking;
    std::set<std::string> targets;
};

SeedRun run_seed(const std::string& scenario_text, std::uint64_t seed, const PipelineConfig& config) {
    const auto s = test::scenario(scenario_text, seed);
    const auto run = run_detection(s.panel, config);
    SeedRun out;
    out.windows = run.graphs.size();
    out.boundary = run.report.change_index;
    out.targets = {s.truth.targets.begin(), s.truth.targets.end()};
    if (s.truth.onset_index) {
        out.truth_window = sample_to_window(*s.truth.onset_index, 360, 1);
    }
    if (run.report.has_change()) {
        out.ranking = run_localisation(run, config);
    }
    return out;
}

Outcome detection_and_localisation(Outcome& localisation) {
    const auto config = PipelineConfig::from_kv(KvConfig{});
    const auto t0 = Clock::now();
    double f1 = 0.0;
    int near = 0, top1 = 0, top3 = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto r = run_seed("fault_kind = dependency_break\n", seed, config);
        f1 += score_detection(r.boundary, r.truth_window, r.windows).f1 / 20.0;
        near += r.boundary && std::abs(static_cast<double>(*r.boundary) - static_cast<double>(r.truth_window)) <= 360.0;
        top1 += r.ranking && score_topk(*r.ranking, r.targets, 1);
        top3 += r.ranking && score_topk(*r.ranking, r.targets, 3);
    }
    const double secs = seconds_since(t0);
    int nn_top5 = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto r = run_seed("fault_kind = coupling_leak_nn\n", seed, config);
        nn_top5 += r.ranking && score_topk(*r.ranking, r.targets, 5);
    }
    localisation = {top1 >= 16 && top3 >= 18 && nn_top5 >= 10,
                    fmt("dependency_break top-1 %d/20, top-3 %d/20; coupling_leak_nn top-5 %d/20", top1, top3, nn_top5)};
    return {f1 >= 0.85 && near >= 16 && secs < 300.0,
            fmt("mean F1 %.3f, boundary within one window %d/20, %.1f s", f1, near, secs)};
}

Outcome false_positive_control() {
    const auto config = PipelineConfig::from_kv(KvConfig{});
    int quiet = 0, nsigma = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto s = test::scenario("load_surge_start_s = 3600\nload_surge_factor = 3\n", seed);
        quiet += run_detection(s.panel, config).report.has_change() ? 0 : 1;
        nsigma += nsigma_detect(s.panel, 0.5).boundary ? 1 : 0;
    }
    return {quiet >= 18 && nsigma >= 10, fmt("FC-ADL silent %d/20, N-Sigma fired %d/20", quiet, nsigma)};
}

Outcome scalability() {
    const unsigned threads = std::max(1U, std::thread::hardware_concurrency());
    auto kv = KvConfig{};
    kv.set("threads", std::to_string(threads));
    const auto config = PipelineConfig::from_kv(kv);
    const auto big = test::scenario("n_services = 250\nduration_s = 5400\nfault_kind = dependency_break\n", 3);
    auto t0 = Clock::now();
    const auto run = run_detection(big.panel, config);
    if (run.report.has_change()) {
        run_localisation(run, config);
    }
    const double batch = seconds_since(t0);

    // 1000 services: fit on reference snapshots, then time one streaming step.
    const auto huge = test::scenario("n_services = 1000\nduration_s = 3800\n", 4);
    const auto diff = difference(huge.panel);
    FcParams ref_params;
    ref_params.step = 12;
    const auto refs = build_fc_sequence(diff, ref_params, threads);
    std::vector<AffinityRoots> roots;
    const auto dm = distance_matrix(refs, kDefaultEpsilon, threads, roots);
    const auto model = HdbscanModel::fit(dm, ClusterParams::defaults_for(dm.size()));
    auto builder = OnlineFcBuilder::from_panel(diff, FcParams{});
    double online = 0.0;
    for (Eigen::Index r = 360; r < 363; ++r) {
        const Eigen::VectorXd row = diff.values.row(r).transpose();
        t0 = Clock::now();
        const auto& g = builder.push(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
        const auto d = distances_to_reference(g, roots);
        model.predict(d);
        online = std::max(online, seconds_since(t0));
    }
    return {batch <= 60.0 && online < 1.0,
            fmt("250x1080 batch %.1f s; 1000-service online step %.3f s against %zu references (%u threads)", batch,
                online, roots.size(), threads)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / ("fcadl_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    cmd_generate(test::kv("fault_kind = dependency_break\n"), root / "data", 6);
    auto kv = KvConfig{};
    kv.set("seed", "13");
    const auto config = PipelineConfig::from_kv(kv);
    const auto input = root / "data" / "metrics.csv";
    for (const char* run : {"a", "b"}) {
        cmd_detect(input, config, root / run / "detect");
        cmd_localise(input, config, root / run / "localise");
    }
    int files = 0, same = 0;
    for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
        if (entry.is_regular_file()) {
            ++files;
            same += slurp(entry.path()) == slurp(root / "b" / fs::relative(entry.path(), root / "a")) ? 1 : 0;
        }
    }
    fs::remove_all(root);
    return {files > 0 && same == files, fmt("%d/%d output files byte-identical", same, files)};
}

Outcome property_suites() {
    const std::vector<std::string> cases{
        "scale and shift invariance",
        "online updates reproduce the batch sequence",
        "graph invariants*",
        "walk-count conservation",
        "scaling change weights leaves the ranking unchanged",
        "difference matches a reference loop and round-trips",
        "distance matrix invariants and permutation invariance",
        "permuting snapshots permutes the partition",
        "identical spec and seed give bit-identical panels",
        "coupled pairs are stationary before the fault",
        "onset lies strictly inside the panel",
        "f1 never rises as the boundary moves away from the onset",
        "cli end to end is byte-identical and carries metadata",
    };
    std::string filter;
    for (const auto& c : cases) {
        filter += (filter.empty() ? "" : ",") + c;
    }
    const std::string cmd = std::string(FCADL_TESTS) + " \"-tc=" + filter + "\" > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    const bool ok = WIFEXITED(status) && WEXITSTATUS(status) == 0;
    return {ok, fmt("%zu property test cases %s", cases.size(), ok ? "passed" : "failed")};
}

} // namespace

int main() {
    spdlog::set_level(spdlog::level::err);
    Outcome localisation;
    std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, correlation_oracle},
        {2, deltacon_oracle},
        {3, clustering_fixtures},
        {4, [&] { return detection_and_localisation(localisation); }},
        {5, [&] { return localisation; }},
        {6, false_positive_control},
        {7, scalability},
        {8, determinism},
        {9, property_suites},
    };
    int failed = 0;
    for (const auto& [id, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("criterion %d: %s (%s)\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
