#pragma once

#include "fcadl/clustering.hpp"
#include "fcadl/deltacon.hpp"
#include "fcadl/embed.hpp"
#include "fcadl/error.hpp"
#include "fcadl/fc_graph.hpp"
#include "fcadl/kvconfig.hpp"
#include "fcadl/rca.hpp"
#include "fcadl/timeseries.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fcadl {

/// Process exit codes shared by every subcommand.
enum ExitCode : int {
    kExitOk = 0,
    kExitAnomaly = 10,
    kExitUsage = 64,
    kExitDataError = 65,
    kExitNoInput = 66,
    kExitSoftware = 70,
    kExitIoError = 74,
    kExitConfig = 78,
};

int exit_code_for(Errc code) noexcept;

/// Every tunable of the pipeline. Zero-valued "auto" fields resolve once the
/// snapshot count is known.
struct PipelineConfig {
    FcParams fc;
    bool decay_theta_auto = true;
    double epsilon = kDefaultEpsilon;
    int min_cluster_size = 0;
    int min_samples = 0;
    bool allow_single_cluster = false;
    int persistence_run = 5;
    double rca_threshold = 0.1;
    WalkParams walk;
    std::size_t n_landmarks = 0;
    std::uint64_t seed = 0;
    GapPolicy gap_policy = GapPolicy::forward_fill;
    unsigned threads = 1;
    double train_fraction = 0.5;
    int eval_seeds = 20;

    /// Rejects unknown keys.
    static PipelineConfig from_kv(const KvConfig& kv);

    ClusterParams cluster_params(std::size_t snapshots) const;
    std::string canonical() const;
    std::uint64_t hash() const;
};

struct DetectionRun {
    DifferencedPanel differenced;
    std::vector<FcGraph> graphs;
    DistanceMatrix distances;
    std::optional<HdbscanModel> model;
    ChangePointReport report;
    /// True when clustering left every snapshot as noise.
    bool no_signal = false;
};

DetectionRun run_detection(const MetricPanel& panel, const PipelineConfig& config);
RcaRanking run_localisation(const DetectionRun& run, const PipelineConfig& config);

/// Subcommand bodies. Each writes its artifacts under out_dir and returns a
/// process exit code; errors propagate as fcadl::Error.
int cmd_generate(const KvConfig& scenario, const std::filesystem::path& out_dir, std::optional<std::uint64_t> seed);
int cmd_detect(const std::filesystem::path& input_csv, const PipelineConfig& config,
               const std::filesystem::path& out_dir);
int cmd_localise(const std::filesystem::path& input_csv, const PipelineConfig& config,
                 const std::filesystem::path& out_dir);
int cmd_embed(const std::filesystem::path& input_csv, const PipelineConfig& config,
              const std::filesystem::path& out_dir);
int cmd_evaluate(const std::filesystem::path& scenario_dir, const PipelineConfig& config,
                 const std::filesystem::path& out_dir);

/// Reads FC_ADL_LOG (trace, debug, info, warn, error, off); default warn.
void init_logging();

} // namespace fcadl
