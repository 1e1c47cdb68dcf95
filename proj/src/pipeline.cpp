#include "fcadl/pipeline.hpp"

#include "fcadl/error.hpp"
#include "fcadl/evalharness.hpp"
#include "fcadl/synthgen.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace fcadl {
namespace {

namespace fs = std::filesystem;

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(Errc::io, "cannot write '" + path.string() + "'");
    }
    return out;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw Error(Errc::io, "cannot create '" + dir.string() + "': " + ec.message());
    }
}

std::string csv_header(const PipelineConfig& config) {
    return "# fcadl config_hash=" + hex64(config.hash()) + " seed=" + std::to_string(config.seed) + "\n";
}

nlohmann::json metadata(const PipelineConfig& config) {
    return {{"config_hash", hex64(config.hash())}, {"seed", config.seed}};
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    auto out = open_output(path);
    out << j.dump(2) << '\n';
}

MetricPanel load_input(const fs::path& input, const PipelineConfig& config) {
    if (!fs::exists(input)) {
        throw Error(Errc::io, "input '" + input.string() + "' does not exist");
    }
    return ingest_csv(input, config.gap_policy);
}

void write_detection_outputs(const MetricPanel& panel, const DetectionRun& run, const PipelineConfig& config,
                             const fs::path& out_dir) {
    ensure_dir(out_dir);
    {
        auto out = open_output(out_dir / "panel.csv");
        out << csv_header(config);
        write_wide_csv(panel, out);
    }
    {
        auto out = open_output(out_dir / "distances.csv");
        out << csv_header(config);
        write_distance_csv(run.distances, out);
    }
    {
        auto out = open_output(out_dir / "assignment.csv");
        out << csv_header(config);
        write_assignment_csv(run.model->assignment(), out);
    }
    nlohmann::json cp = to_json(run.report);
    if (run.no_signal) {
        cp = {{"no_change", true}, {"no_signal", true}};
    }
    cp["metadata"] = metadata(config);
    write_json(out_dir / "change_point.json", cp);
}

} // namespace

int exit_code_for(Errc code) noexcept {
    switch (code) {
    case Errc::io: return kExitNoInput;
    case Errc::config: return kExitConfig;
    case Errc::parse:
    case Errc::alignment:
    case Errc::gap:
    case Errc::insufficient_data:
    case Errc::dimension:
    case Errc::input:
    case Errc::spec:
    case Errc::insufficient_evidence:
    case Errc::no_signal:
    case Errc::precondition:
        return kExitDataError;
    case Errc::numerical:
    case Errc::contract:
    case Errc::degenerate_embedding:
        return kExitSoftware;
    }
    return kExitSoftware;
}

PipelineConfig PipelineConfig::from_kv(const KvConfig& kv) {
    kv.reject_unknown({"window", "step", "decay_theta", "threshold", "epsilon", "min_cluster_size", "min_samples",
                       "allow_single_cluster", "persistence_run", "rca_threshold", "walks_per_vertex",
                       "max_walk_length", "n_landmarks", "seed", "gap_policy", "threads", "train_fraction",
                       "eval_seeds"});
    PipelineConfig c;
    c.fc.window = static_cast<int>(kv.get_int("window", 360));
    c.fc.step = static_cast<int>(kv.get_int("step", 1));
    c.fc.threshold = kv.get_double("threshold", 0.1);
    c.decay_theta_auto = !kv.contains("decay_theta") || kv.get_double("decay_theta", 0.0) == 0.0;
    c.fc.decay_theta = c.decay_theta_auto ? c.fc.window / 3.0 : kv.get_double("decay_theta", 0.0);
    c.epsilon = kv.get_double("epsilon", kDefaultEpsilon);
    c.min_cluster_size = static_cast<int>(kv.get_int("min_cluster_size", 0));
    c.min_samples = static_cast<int>(kv.get_int("min_samples", 0));
    c.allow_single_cluster = kv.get_bool("allow_single_cluster", false);
    c.persistence_run = static_cast<int>(kv.get_int("persistence_run", 5));
    c.rca_threshold = kv.get_double("rca_threshold", c.fc.threshold);
    c.seed = kv.get_u64("seed", 0);
    c.walk.walks_per_vertex = static_cast<int>(kv.get_int("walks_per_vertex", 10));
    c.walk.max_walk_length = static_cast<int>(kv.get_int("max_walk_length", 10));
    c.walk.rng_seed = c.seed;
    c.n_landmarks = static_cast<std::size_t>(kv.get_int("n_landmarks", 0));
    c.gap_policy = parse_gap_policy(kv.get_string("gap_policy", "forward_fill"));
    c.threads = static_cast<unsigned>(std::max(1LL, kv.get_int("threads", 1)));
    c.train_fraction = kv.get_double("train_fraction", 0.5);
    c.eval_seeds = static_cast<int>(kv.get_int("eval_seeds", 20));

    c.fc.validate();
    c.walk.validate();
    if (!(c.epsilon > 0.0)) {
        throw Error(Errc::config, "epsilon must be positive");
    }
    if (c.min_cluster_size == 1 || c.min_cluster_size < 0 || c.min_samples < 0) {
        throw Error(Errc::config, "min_cluster_size must be 0 (auto) or at least 2");
    }
    if (c.persistence_run < 1) {
        throw Error(Errc::config, "persistence_run must be at least 1");
    }
    if (c.eval_seeds < 1) {
        throw Error(Errc::config, "eval_seeds must be at least 1");
    }
    return c;
}

ClusterParams PipelineConfig::cluster_params(std::size_t snapshots) const {
    ClusterParams p = ClusterParams::defaults_for(snapshots);
    if (min_cluster_size > 0) {
        p.min_cluster_size = min_cluster_size;
    }
    p.min_samples = min_samples;
    p.allow_single_cluster = allow_single_cluster;
    return p;
}

std::string PipelineConfig::canonical() const {
    std::map<std::string, std::string> kv{
        {"window", std::to_string(fc.window)},
        {"step", std::to_string(fc.step)},
        {"decay_theta", decay_theta_auto ? "auto" : std::to_string(fc.decay_theta)},
        {"threshold", std::to_string(fc.threshold)},
        {"epsilon", std::to_string(epsilon)},
        {"min_cluster_size", std::to_string(min_cluster_size)},
        {"min_samples", std::to_string(min_samples)},
        {"allow_single_cluster", allow_single_cluster ? "true" : "false"},
        {"persistence_run", std::to_string(persistence_run)},
        {"rca_threshold", std::to_string(rca_threshold)},
        {"walks_per_vertex", std::to_string(walk.walks_per_vertex)},
        {"max_walk_length", std::to_string(walk.max_walk_length)},
        {"n_landmarks", std::to_string(n_landmarks)},
        {"seed", std::to_string(seed)},
        {"gap_policy", to_string(gap_policy)},
        {"train_fraction", std::to_string(train_fraction)},
        {"eval_seeds", std::to_string(eval_seeds)},
    };
    std::string out;
    for (const auto& [k, v] : kv) {
        out += k + "=" + v + "\n";
    }
    return out;
}

std::uint64_t PipelineConfig::hash() const {
    return fnv1a64(canonical());
}

DetectionRun run_detection(const MetricPanel& panel, const PipelineConfig& config) {
    DetectionRun run;
    FcParams fc = config.fc;
    if (config.decay_theta_auto) {
        fc.decay_theta = fc.window / 3.0;
    }
    run.differenced = difference(panel);
    run.graphs = build_fc_sequence(run.differenced, fc, config.threads);
    spdlog::info("built {} FC graphs over {} services", run.graphs.size(), panel.services());
    run.distances = distance_matrix(run.graphs, config.epsilon, config.threads);
    run.model = HdbscanModel::fit(run.distances, config.cluster_params(run.graphs.size()));
    try {
        run.report = detect_change(run.model->assignment(), config.persistence_run);
    } catch (const Error& e) {
        if (e.code() != Errc::no_signal) {
            throw;
        }
        spdlog::warn("detect: {}", e.what());
        run.no_signal = true;
    }
    return run;
}

RcaRanking run_localisation(const DetectionRun& run, const PipelineConfig& config) {
    LocaliseParams params;
    params.threshold = config.rca_threshold;
    params.walk = config.walk;
    params.walk.rng_seed = config.seed;
    return localise(run.graphs, run.model->assignment(), run.report, params);
}

int cmd_generate(const KvConfig& scenario, const fs::path& out_dir, std::optional<std::uint64_t> seed) {
    KvConfig cfg = scenario;
    if (seed) {
        cfg.set("seed", std::to_string(*seed));
    }
    const auto spec = scenario_from_config(cfg);
    const auto result = generate(spec);
    ensure_dir(out_dir);
    const std::string header = "# fcadl config_hash=" + hex64(fnv1a64(cfg.canonical())) +
                               " seed=" + std::to_string(spec.rng_seed) + "\n";
    {
        auto out = open_output(out_dir / "metrics.csv");
        out << header;
        write_long_csv(result.panel, out);
    }
    auto truth = to_json(result.truth);
    truth["metadata"] = {{"config_hash", hex64(fnv1a64(cfg.canonical()))}, {"seed", spec.rng_seed}};
    write_json(out_dir / "ground_truth.json", truth);
    return kExitOk;
}

int cmd_detect(const fs::path& input_csv, const PipelineConfig& config, const fs::path& out_dir) {
    const auto panel = load_input(input_csv, config);
    const auto run = run_detection(panel, config);
    write_detection_outputs(panel, run, config, out_dir);
    return run.report.has_change() ? kExitAnomaly : kExitOk;
}

int cmd_localise(const fs::path& input_csv, const PipelineConfig& config, const fs::path& out_dir) {
    const auto panel = load_input(input_csv, config);
    const auto run = run_detection(panel, config);
    write_detection_outputs(panel, run, config, out_dir);
    nlohmann::json j;
    if (run.report.has_change()) {
        j = to_json(run_localisation(run, config));
    } else {
        j = {{"status", "no_change"}, {"ranking", nlohmann::json::array()}};
    }
    j["metadata"].update(metadata(config));
    write_json(out_dir / "ranking.json", j);
    return run.report.has_change() ? kExitAnomaly : kExitOk;
}

int cmd_embed(const fs::path& input_csv, const PipelineConfig& config, const fs::path& out_dir) {
    const auto panel = load_input(input_csv, config);
    const auto run = run_detection(panel, config);
    const std::size_t landmarks =
        config.n_landmarks > 0 ? config.n_landmarks : std::min<std::size_t>(run.distances.size(), 50);
    const auto embedding = lmds(run.distances, landmarks, config.seed);
    ensure_dir(out_dir);
    auto out = open_output(out_dir / "embedding.csv");
    out << csv_header(config);
    write_embedding_csv(embedding, run.distances, &run.model->assignment(), out);
    return kExitOk;
}

int cmd_evaluate(const fs::path& scenario_dir, const PipelineConfig& config, const fs::path& out_dir) {
    if (!fs::is_directory(scenario_dir)) {
        throw Error(Errc::io, "scenario directory '" + scenario_dir.string() + "' does not exist");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(scenario_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".conf") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw Error(Errc::io, "no *.conf scenarios in '" + scenario_dir.string() + "'");
    }

    struct Tally {
        double f1 = 0, precision = 0, recall = 0, seconds = 0;
        std::size_t scored = 0;
        TopKScore top1{1}, top3{3}, top5{5};
    };
    ensure_dir(out_dir);
    auto out = open_output(out_dir / "results.csv");
    out << csv_header(config);
    out << "scenario,method,f1,precision,recall,avg@1,avg@3,avg@5,wall_time_s\n";

    for (const auto& file : files) {
        const auto kv = KvConfig::load(file);
        const std::string name = kv.get_string("name", file.stem().string());
        Tally fcadl_tally, nsigma_tally;
        for (int s = 0; s < config.eval_seeds; ++s) {
            const auto spec = scenario_from_config(kv, config.seed + static_cast<std::uint64_t>(s));
            const auto scenario = generate(spec);
            const std::set<std::string> targets(scenario.truth.targets.begin(), scenario.truth.targets.end());
            const auto window = static_cast<std::size_t>(config.fc.window);
            const auto step = static_cast<std::size_t>(config.fc.step);

            auto t0 = std::chrono::steady_clock::now();
            const auto run = run_detection(scenario.panel, config);
            std::optional<RcaRanking> ranking;
            if (run.report.has_change()) {
                ranking = run_localisation(run, config);
            }
            fcadl_tally.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

            t0 = std::chrono::steady_clock::now();
            const auto ns = nsigma_detect(scenario.panel, config.train_fraction);
            std::optional<RcaRanking> ns_ranking;
            if (ns.boundary) {
                ns_ranking = nsigma_rank(scenario.panel, config.train_fraction, *ns.boundary);
            }
            nsigma_tally.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

            if (!scenario.truth.onset_index) {
                continue;
            }
            const std::size_t n_windows = run.graphs.size();
            const std::size_t truth = sample_to_window(*scenario.truth.onset_index, window, step);
            auto tally = [&](Tally& t, std::optional<std::size_t> boundary, const std::optional<RcaRanking>& r) {
                const auto score = score_detection(boundary, truth, n_windows);
                t.f1 += score.f1;
                t.precision += score.precision;
                t.recall += score.recall;
                ++t.scored;
                t.top1.add(r && score_topk(*r, targets, 1));
                t.top3.add(r && score_topk(*r, targets, 3));
                t.top5.add(r && score_topk(*r, targets, 5));
            };
            tally(fcadl_tally, run.report.change_index, ranking);
            std::optional<std::size_t> ns_window;
            if (ns.boundary) {
                ns_window = std::min(n_windows, sample_to_window(*ns.boundary, window, step));
            }
            tally(nsigma_tally, ns_window, ns_ranking);
        }
        auto row = [&](const std::string& method, const Tally& t) {
            char buf[512];
            const double n = static_cast<double>(std::max<std::size_t>(t.scored, 1));
            if (t.scored == 0) {
                std::snprintf(buf, sizeof(buf), "%s,%s,nan,nan,nan,nan,nan,nan,%.3f\n", name.c_str(), method.c_str(),
                              t.seconds / config.eval_seeds);
            } else {
                std::snprintf(buf, sizeof(buf), "%s,%s,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.3f\n", name.c_str(),
                              method.c_str(), t.f1 / n, t.precision / n, t.recall / n, t.top1.accuracy(),
                              t.top3.accuracy(), t.top5.accuracy(), t.seconds / config.eval_seeds);
            }
            out << buf;
        };
        row("fc-adl", fcadl_tally);
        row("n-sigma", nsigma_tally);
    }
    return kExitOk;
}

void init_logging() {
    auto logger = spdlog::stderr_color_mt("fcadl");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    const char* env = std::getenv("FC_ADL_LOG");
    spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
}

} // namespace fcadl
