#include "fcadl/error.hpp"
#include "fcadl/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <iostream>

int main(int argc, char** argv) {
    fcadl::init_logging();

    CLI::App app{"Functional-connectivity anomaly detection and localisation for microservice metrics"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    unsigned threads = 0;
    app.add_option("--config", config_path, "Flat key = value configuration file")->check(CLI::ExistingFile);
    app.add_option("--set", overrides, "Override a configuration key (key=value), repeatable");
    app.add_option("--seed", seed, "Seed for walks, landmarks and generated scenarios");
    app.add_option("--out-dir", out_dir, "Directory for output files");
    app.add_option("--threads", threads, "Worker threads");

    std::string input;
    auto* generate = app.add_subcommand("generate", "Generate a synthetic scenario (metrics.csv, ground_truth.json)");
    std::string scenario_path;
    generate->add_option("scenario", scenario_path, "Scenario configuration file")->required();

    auto* detect = app.add_subcommand("detect", "Detect a structural change point");
    detect->add_option("input", input, "Long-form metrics CSV")->required();
    auto* localise = app.add_subcommand("localise", "Detect, then rank candidate root-cause services");
    localise->add_option("input", input, "Long-form metrics CSV")->required();
    auto* embed = app.add_subcommand("embed", "2-D LMDS embedding of the snapshot distance matrix");
    embed->add_option("input", input, "Long-form metrics CSV")->required();
    auto* evaluate = app.add_subcommand("evaluate", "Score FC-ADL and N-Sigma over seeded scenario batches");
    std::string scenario_dir;
    evaluate->add_option("scenario_dir", scenario_dir, "Directory of *.conf scenario files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : fcadl::kExitUsage;
    }

    try {
        if (generate->parsed()) {
            auto scenario = fcadl::KvConfig::load(scenario_path);
            return fcadl::cmd_generate(scenario, out_dir, seed);
        }
        fcadl::KvConfig kv = config_path.empty() ? fcadl::KvConfig{} : fcadl::KvConfig::load(config_path);
        for (const auto& o : overrides) {
            kv.set_assignment(o);
        }
        if (seed) {
            kv.set("seed", std::to_string(*seed));
        }
        if (threads > 0) {
            kv.set("threads", std::to_string(threads));
        }
        const auto config = fcadl::PipelineConfig::from_kv(kv);
        if (detect->parsed()) {
            return fcadl::cmd_detect(input, config, out_dir);
        }
        if (localise->parsed()) {
            return fcadl::cmd_localise(input, config, out_dir);
        }
        if (embed->parsed()) {
            return fcadl::cmd_embed(input, config, out_dir);
        }
        return fcadl::cmd_evaluate(scenario_dir, config, out_dir);
    } catch (const fcadl::Error& e) {
        spdlog::error("{}", e.what());
        return fcadl::exit_code_for(e.code());
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return fcadl::kExitSoftware;
    }
}
