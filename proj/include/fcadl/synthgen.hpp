#pragma once

#include "fcadl/kvconfig.hpp"
#include "fcadl/timeseries.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fcadl {

enum class FaultKind { cpu_hog, dependency_break, coupling_leak_nn, delay_decouple };

FaultKind parse_fault_kind(const std::string& name);
std::string to_string(FaultKind kind);

struct FaultEvent {
    FaultKind kind = FaultKind::dependency_break;
    std::vector<std::size_t> targets;
    std::int64_t start_s = 0;
    std::optional<std::int64_t> end_s;
};

/// Undirected dependency between two services; coupling in (0, 1].
struct Coupling {
    std::size_t a = 0;
    std::size_t b = 0;
    double strength = 1.0;
};

struct Sinusoid {
    double frequency_hz = 0.01;
    double amplitude = 0.0;
    double phase = 0.0;
};

/// Multiplies every service's fluctuating load by `factor` from `start_s`
/// on, without touching the dependency structure.
struct LoadSurge {
    std::int64_t start_s = 0;
    double factor = 1.0;
};

struct ScenarioSpec {
    int n_services = 20;
    std::int64_t duration_s = 7200;
    std::int64_t sampling_period_s = 5;
    std::vector<Coupling> dependencies;
    /// User traffic streams; service i receives stream workload_group[i]
    /// scaled by workload_gain[i].
    std::vector<std::vector<Sinusoid>> shared_workload;
    std::vector<std::size_t> workload_group;
    std::vector<double> workload_gain;
    /// Sinusoid components of each service's own driver signal.
    std::vector<std::vector<Sinusoid>> workload;
    /// AR(1) stochastic load added to every driver.
    double driver_sigma = 0.5;
    double driver_persistence = 0.95;
    double noise_sigma = 0.05;
    double frequency_min_hz = 0.01;
    double frequency_max_hz = 0.06;
    bool heavy_tailed_noise = false;
    std::vector<FaultEvent> faults;
    /// Worker node of each service (co-location for noisy-neighbour faults).
    std::vector<int> node_of;
    std::optional<LoadSurge> load_surge;
    bool paper_faithful = true;
    /// Window length the scenario must accommodate before the first fault.
    std::int64_t min_window = 360;
    std::uint64_t rng_seed = 0;
    Timestamp start_timestamp = 1'700'000'000;

    std::size_t samples() const noexcept { return static_cast<std::size_t>(duration_s / sampling_period_s); }
    std::vector<std::string> service_names() const;
    void validate() const;
};

struct GroundTruth {
    std::optional<std::size_t> onset_index;
    std::optional<Timestamp> onset_timestamp;
    std::string fault_kind = "none";
    std::vector<std::string> targets;
};

struct Scenario {
    MetricPanel panel;
    GroundTruth truth;
};

/// Builds a randomized scenario (topology, workload, fault targets) from a
/// flat configuration; `seed` drives every random choice.
ScenarioSpec scenario_from_config(const KvConfig& config);
ScenarioSpec scenario_from_config(const KvConfig& config, std::uint64_t seed);

Scenario generate(const ScenarioSpec& spec);

nlohmann::json to_json(const GroundTruth& truth);

} // namespace fcadl
