#include "fcadl/synthgen.hpp"

#include "fcadl/error.hpp"
#include "fcadl/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace fcadl {
namespace {

constexpr std::uint64_t kDriverStream = 1'000;
constexpr std::uint64_t kNoiseStream = 2'000'000;
constexpr std::uint64_t kHogStream = 3'000'000;
constexpr std::uint64_t kContentionStream = 4'000'000;
constexpr std::uint64_t kLayoutStream = 7;
constexpr std::uint64_t kSurrogateStream = 10'000'000;

// Fault archetype constants, in units of driver_sigma where they scale.
constexpr double kHogSigmaScale = 6.0;
constexpr double kHogRampPerSample = 0.002;
constexpr double kContentionSigmaScale = 4.0;
constexpr double kContentionRampSamples = 120.0;
constexpr double kNeighbourBleed = 0.6;
constexpr double kLeakPerSample = 0.001;
constexpr std::int64_t kLagGrowthSamples = 12;
constexpr std::int64_t kMaxLagSamples = 12;
constexpr double kMinSeparationHz = 0.01;
constexpr double kBreakScale = std::numbers::sqrt2;
constexpr std::uint64_t kSharedStream = 500'000;

// Frequency in [f_lo, f_hi] at least `gap` away from every frequency in
// `avoid`, when the range leaves room for one.
double spaced_frequency(std::mt19937_64& rng, const std::vector<Sinusoid>& avoid, double gap, double f_lo,
                        double f_hi) {
    const auto clearance = [&](double f) {
        double c = std::numeric_limits<double>::infinity();
        for (const auto& a : avoid) {
            c = std::min(c, std::abs(a.frequency_hz - f));
        }
        return c;
    };
    // Best-separated draw when the band is too crowded for the full gap.
    double best = uniform(rng, f_lo, f_hi);
    double best_clearance = clearance(best);
    for (int tries = 0; tries < 64 && best_clearance < gap; ++tries) {
        const double f = uniform(rng, f_lo, f_hi);
        if (const double c = clearance(f); c > best_clearance) {
            best = f;
            best_clearance = c;
        }
    }
    return best;
}

std::vector<Sinusoid> random_components(std::mt19937_64& rng, int count, double amp_lo, double amp_hi, double f_lo,
                                        double f_hi, std::vector<Sinusoid> avoid = {}) {
    std::vector<Sinusoid> out;
    for (int k = 0; k < count; ++k) {
        Sinusoid c;
        c.frequency_hz = spaced_frequency(rng, avoid, kMinSeparationHz, f_lo, f_hi);
        avoid.push_back(c);
        c.amplitude = uniform(rng, amp_lo, amp_hi);
        c.phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        out.push_back(c);
    }
    return out;
}

// Same amplitudes, frequencies redrawn away from every frequency in `avoid`
// so the replacement does not beat against the original within a window.
std::vector<Sinusoid> separated_components(std::mt19937_64& rng, std::vector<Sinusoid> comps,
                                           std::vector<Sinusoid> avoid, double f_lo, double f_hi) {
    for (auto& c : comps) {
        c.frequency_hz = spaced_frequency(rng, avoid, kMinSeparationHz, f_lo, f_hi);
        c.phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        avoid.push_back(c);
    }
    return comps;
}

// Sinusoid sum plus a stationary AR(1) load process.
std::vector<double> driver_series(const std::vector<Sinusoid>& components, double sigma, double persistence,
                                  std::int64_t period, std::size_t samples, std::mt19937_64& rng) {
    std::vector<double> out(samples, 0.0);
    double ar = sigma > 0.0 ? gaussian(rng) * sigma / std::sqrt(1.0 - persistence * persistence) : 0.0;
    for (std::size_t k = 0; k < samples; ++k) {
        const double t = static_cast<double>(k) * static_cast<double>(period);
        double v = 0.0;
        for (const auto& c : components) {
            v += c.amplitude * std::sin(2.0 * std::numbers::pi * c.frequency_hz * t + c.phase);
        }
        if (k > 0) {
            ar = persistence * ar + sigma * gaussian(rng);
        }
        out[k] = v + ar;
    }
    return out;
}

double noise_draw(std::mt19937_64& rng, bool heavy_tailed) {
    if (!heavy_tailed) {
        return gaussian(rng);
    }
    // Student-t with 3 degrees of freedom, rescaled to unit variance.
    const double z = gaussian(rng);
    double chi2 = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double g = gaussian(rng);
        chi2 += g * g;
    }
    return z / std::sqrt(chi2 / 3.0) / std::sqrt(3.0);
}

std::vector<std::size_t> parse_targets(const std::string& text, const std::vector<std::string>& names) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(' '));
        item.erase(item.find_last_not_of(' ') + 1);
        if (item.empty()) {
            continue;
        }
        const auto it = std::find(names.begin(), names.end(), item);
        if (it != names.end()) {
            out.push_back(static_cast<std::size_t>(it - names.begin()));
            continue;
        }
        try {
            std::size_t used = 0;
            const auto idx = std::stoul(item, &used);
            if (used != item.size() || idx >= names.size()) {
                throw Error(Errc::spec, "");
            }
            out.push_back(idx);
        } catch (const std::exception&) {
            throw Error(Errc::spec, "unknown fault target '" + item + "'");
        }
    }
    return out;
}

std::vector<Coupling> parse_edges(const std::string& text, int n) {
    // "a-b:c;a-b:c"
    std::vector<Coupling> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) {
        if (item.find_first_not_of(' ') == std::string::npos) {
            continue;
        }
        Coupling c;
        char dash = 0, colon = 0;
        std::istringstream is(item);
        if (!(is >> c.a >> dash >> c.b >> colon >> c.strength) || dash != '-' || colon != ':') {
            throw Error(Errc::spec, "malformed edge '" + item + "', expected a-b:coupling");
        }
        if (c.a >= static_cast<std::size_t>(n) || c.b >= static_cast<std::size_t>(n)) {
            throw Error(Errc::spec, "edge '" + item + "' references a missing service");
        }
        out.push_back(c);
    }
    return out;
}

} // namespace

FaultKind parse_fault_kind(const std::string& name) {
    if (name == "cpu_hog") return FaultKind::cpu_hog;
    if (name == "dependency_break") return FaultKind::dependency_break;
    if (name == "coupling_leak_nn") return FaultKind::coupling_leak_nn;
    if (name == "delay_decouple") return FaultKind::delay_decouple;
    throw Error(Errc::spec, "unknown fault kind '" + name + "'");
}

std::string to_string(FaultKind kind) {
    switch (kind) {
    case FaultKind::cpu_hog: return "cpu_hog";
    case FaultKind::dependency_break: return "dependency_break";
    case FaultKind::coupling_leak_nn: return "coupling_leak_nn";
    case FaultKind::delay_decouple: return "delay_decouple";
    }
    return "dependency_break";
}

std::vector<std::string> ScenarioSpec::service_names() const {
    int width = 2;
    for (int n = n_services - 1; n >= 100; n /= 10) {
        ++width;
    }
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(n_services));
    for (int i = 0; i < n_services; ++i) {
        std::string digits = std::to_string(i);
        names.push_back("svc-" + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(digits.size()))), '0') + digits);
    }
    return names;
}

void ScenarioSpec::validate() const {
    if (n_services < 2) {
        throw Error(Errc::spec, "need at least 2 services");
    }
    if (sampling_period_s <= 0 || duration_s <= 0) {
        throw Error(Errc::spec, "duration and sampling period must be positive");
    }
    if (static_cast<std::int64_t>(samples()) < 2 * min_window) {
        throw Error(Errc::spec, "duration holds " + std::to_string(samples()) + " samples, fewer than 2 windows of " +
                                    std::to_string(min_window));
    }
    if (workload.size() != static_cast<std::size_t>(n_services)) {
        throw Error(Errc::spec, "workload needs one component list per service");
    }
    if (!workload_gain.empty() && (workload_gain.size() != static_cast<std::size_t>(n_services) ||
                                   workload_group.size() != workload_gain.size())) {
        throw Error(Errc::spec, "workload_gain and workload_group need one entry per service");
    }
    for (auto g : workload_group) {
        if (g >= shared_workload.size()) {
            throw Error(Errc::spec, "workload group " + std::to_string(g) + " has no traffic stream");
        }
    }
    if (!node_of.empty() && node_of.size() != static_cast<std::size_t>(n_services)) {
        throw Error(Errc::spec, "co-location map must cover every service");
    }
    if (noise_sigma < 0.0 || driver_sigma < 0.0 || !(driver_persistence >= 0.0 && driver_persistence < 1.0)) {
        throw Error(Errc::spec, "noise/driver parameters out of range");
    }
    for (const auto& d : dependencies) {
        if (d.a >= static_cast<std::size_t>(n_services) || d.b >= static_cast<std::size_t>(n_services) || d.a == d.b) {
            throw Error(Errc::spec, "dependency references an invalid service pair");
        }
        if (!(d.strength > 0.0 && d.strength <= 1.0)) {
            throw Error(Errc::spec, "coupling coefficients must lie in (0, 1]");
        }
    }
    if (paper_faithful) {
        auto all = workload;
        all.insert(all.end(), shared_workload.begin(), shared_workload.end());
        for (const auto& comps : all) {
            for (const auto& c : comps) {
                if (c.frequency_hz < 0.01 || c.frequency_hz > 0.06) {
                    throw Error(Errc::spec, "workload frequency " + std::to_string(c.frequency_hz) +
                                                " Hz outside [0.01, 0.06]");
                }
            }
        }
        if (frequency_min_hz < 0.01 || frequency_max_hz > 0.06) {
            throw Error(Errc::spec, "workload frequency range outside [0.01, 0.06] Hz");
        }
    }
    if (frequency_min_hz > frequency_max_hz) {
        throw Error(Errc::spec, "frequency_min_hz exceeds frequency_max_hz");
    }
    for (const auto& f : faults) {
        if (f.targets.empty()) {
            throw Error(Errc::spec, "fault has no targets");
        }
        for (auto t : f.targets) {
            if (t >= static_cast<std::size_t>(n_services)) {
                throw Error(Errc::spec, "fault target out of range");
            }
        }
        if (f.end_s && *f.end_s <= f.start_s) {
            throw Error(Errc::spec, "fault end must follow its start");
        }
        const auto start_idx = f.start_s / sampling_period_s;
        if (start_idx < min_window) {
            throw Error(Errc::spec, "fault starts at sample " + std::to_string(start_idx) +
                                        ", before the first full window of " + std::to_string(min_window));
        }
        if (start_idx >= static_cast<std::int64_t>(samples()) - 1) {
            throw Error(Errc::spec, "fault starts after the end of the run");
        }
    }
    if (load_surge && (load_surge->factor <= 0.0 || load_surge->start_s < 0)) {
        throw Error(Errc::spec, "load surge needs a positive factor and non-negative start");
    }
}

ScenarioSpec scenario_from_config(const KvConfig& config) {
    return scenario_from_config(config, config.get_u64("seed", 0));
}

ScenarioSpec scenario_from_config(const KvConfig& config, std::uint64_t seed) {
    config.reject_unknown({"name", "n_services", "duration_s", "sampling_period_s", "seed", "noise_sigma",
                           "driver_sigma", "driver_persistence", "components", "amplitude_min", "amplitude_max",
                           "shared_components", "shared_amplitude_min", "shared_amplitude_max", "gain_min", "gain_max",
                           "workload_group_size",
                           "frequency_min_hz", "frequency_max_hz", "coupling_min", "coupling_max", "extra_edges",
                           "edges", "n_nodes", "fault_kind", "fault_targets", "fault_count", "fault_start_s",
                           "fault_end_s", "load_surge_start_s", "load_surge_factor", "heavy_tailed_noise",
                           "paper_faithful", "min_window", "start_timestamp"});
    ScenarioSpec spec;
    spec.rng_seed = seed;
    spec.n_services = static_cast<int>(config.get_int("n_services", 20));
    spec.duration_s = config.get_int("duration_s", 7200);
    spec.sampling_period_s = config.get_int("sampling_period_s", 5);
    spec.noise_sigma = config.get_double("noise_sigma", spec.noise_sigma);
    spec.driver_sigma = config.get_double("driver_sigma", spec.driver_sigma);
    spec.driver_persistence = config.get_double("driver_persistence", spec.driver_persistence);
    spec.frequency_min_hz = config.get_double("frequency_min_hz", 0.01);
    spec.frequency_max_hz = config.get_double("frequency_max_hz", 0.06);
    spec.heavy_tailed_noise = config.get_bool("heavy_tailed_noise", false);
    spec.paper_faithful = config.get_bool("paper_faithful", true);
    spec.min_window = config.get_int("min_window", 360);
    spec.start_timestamp = config.get_int("start_timestamp", spec.start_timestamp);
    if (spec.n_services < 2) {
        throw Error(Errc::spec, "need at least 2 services");
    }
    const auto n = static_cast<std::size_t>(spec.n_services);

    auto rng = make_engine(seed, kLayoutStream);
    const auto group_size = config.get_int("workload_group_size", 25);
    if (group_size < 1) {
        throw Error(Errc::spec, "workload_group_size must be positive");
    }
    const auto groups = (n + static_cast<std::size_t>(group_size) - 1) / static_cast<std::size_t>(group_size);
    const int shared_components = static_cast<int>(config.get_int("shared_components", 3));
    const double shared_lo = config.get_double("shared_amplitude_min", 0.5);
    const double shared_hi = config.get_double("shared_amplitude_max", 1.5);
    std::vector<Sinusoid> taken;
    spec.shared_workload.resize(groups);
    for (auto& w : spec.shared_workload) {
        w = random_components(rng, shared_components, shared_lo, shared_hi, spec.frequency_min_hz,
                              spec.frequency_max_hz, taken);
        taken.insert(taken.end(), w.begin(), w.end());
    }
    const double gain_lo = config.get_double("gain_min", 0.6);
    const double gain_hi = config.get_double("gain_max", 1.0);
    spec.workload_group.resize(n);
    spec.workload_gain.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        spec.workload_group[i] = i / static_cast<std::size_t>(group_size);
        spec.workload_gain[i] = uniform(rng, gain_lo, gain_hi);
    }
    const int components = static_cast<int>(config.get_int("components", 2));
    const double amp_lo = config.get_double("amplitude_min", 0.05);
    const double amp_hi = config.get_double("amplitude_max", 0.15);
    spec.workload.resize(n);
    for (auto& w : spec.workload) {
        w = random_components(rng, components, amp_lo, amp_hi, spec.frequency_min_hz, spec.frequency_max_hz);
    }

    if (const auto edges = config.get("edges")) {
        spec.dependencies = parse_edges(*edges, spec.n_services);
    } else {
        // Random attachment tree plus a few extra random edges.
        const double c_lo = config.get_double("coupling_min", 0.6);
        const double c_hi = config.get_double("coupling_max", 1.0);
        std::set<std::pair<std::size_t, std::size_t>> present;
        for (std::size_t i = 1; i < n; ++i) {
            const auto parent = static_cast<std::size_t>(uniform_index(rng, i));
            spec.dependencies.push_back({parent, i, uniform(rng, c_lo, c_hi)});
            present.insert({parent, i});
        }
        const auto extra = config.get_int("extra_edges", static_cast<long long>(n / 4));
        const std::size_t max_edges = n * (n - 1) / 2;
        for (long long e = 0; e < extra && present.size() < max_edges; ++e) {
            std::size_t a = 0, b = 0;
            do {
                a = static_cast<std::size_t>(uniform_index(rng, n));
                b = static_cast<std::size_t>(uniform_index(rng, n));
                if (a > b) {
                    std::swap(a, b);
                }
            } while (a == b || present.count({a, b}));
            present.insert({a, b});
            spec.dependencies.push_back({a, b, uniform(rng, c_lo, c_hi)});
        }
    }

    const int nodes = static_cast<int>(config.get_int("n_nodes", 5));
    if (nodes < 1) {
        throw Error(Errc::spec, "n_nodes must be positive");
    }
    spec.node_of.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        spec.node_of[i] = static_cast<int>(i % static_cast<std::size_t>(nodes));
    }

    const std::string kind = config.get_string("fault_kind", "none");
    if (kind != "none") {
        FaultEvent fault;
        fault.kind = parse_fault_kind(kind);
        fault.start_s = config.get_int("fault_start_s", spec.duration_s / 2);
        if (config.contains("fault_end_s")) {
            fault.end_s = config.get_int("fault_end_s", 0);
        }
        const std::string targets = config.get_string("fault_targets", "auto");
        if (targets == "auto") {
            const auto count = static_cast<std::size_t>(config.get_int("fault_count", 1));
            std::vector<std::size_t> degree(n, 0);
            for (const auto& d : spec.dependencies) {
                ++degree[d.a];
                ++degree[d.b];
            }
            std::vector<std::size_t> pool;
            for (std::size_t i = 0; i < n; ++i) {
                // Decoupling a service with a single dependency leaves little structure to lose.
                if (fault.kind == FaultKind::coupling_leak_nn || degree[i] >= 2) {
                    pool.push_back(i);
                }
            }
            if (pool.size() < count) {
                pool.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    pool[i] = i;
                }
            }
            if (count == 0 || count > pool.size()) {
                throw Error(Errc::spec, "cannot pick " + std::to_string(count) + " fault targets");
            }
            for (std::size_t k = 0; k < count; ++k) {
                const auto j = k + static_cast<std::size_t>(uniform_index(rng, pool.size() - k));
                std::swap(pool[k], pool[j]);
                fault.targets.push_back(pool[k]);
            }
            std::sort(fault.targets.begin(), fault.targets.end());
        } else {
            fault.targets = parse_targets(targets, spec.service_names());
        }
        spec.faults.push_back(fault);
    }

    if (config.contains("load_surge_start_s")) {
        spec.load_surge = LoadSurge{config.get_int("load_surge_start_s", 0), config.get_double("load_surge_factor", 3.0)};
    }
    spec.validate();
    return spec;
}

Scenario generate(const ScenarioSpec& spec) {
    spec.validate();
    const std::size_t n = static_cast<std::size_t>(spec.n_services);
    const std::size_t samples = spec.samples();
    const auto period = spec.sampling_period_s;

    std::vector<std::vector<double>> drivers(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto rng = make_engine(spec.rng_seed, kDriverStream + i);
        drivers[i] = driver_series(spec.workload[i], spec.driver_sigma, spec.driver_persistence, period, samples, rng);
    }

    std::vector<std::vector<double>> shared(spec.shared_workload.size());
    for (std::size_t g = 0; g < shared.size(); ++g) {
        auto rng = make_engine(spec.rng_seed, kSharedStream + g);
        shared[g] = driver_series(spec.shared_workload[g], spec.driver_sigma, spec.driver_persistence, period,
                                  samples, rng);
    }
    const auto gain = [&](std::size_t i) { return spec.workload_gain.empty() ? 0.0 : spec.workload_gain[i]; };

    std::vector<std::vector<std::pair<std::size_t, double>>> neighbours(n);
    for (const auto& d : spec.dependencies) {
        neighbours[d.a].emplace_back(d.b, d.strength);
        neighbours[d.b].emplace_back(d.a, d.strength);
    }

    struct ActiveFault {
        const FaultEvent* event;
        std::size_t start;
        std::size_t end;
        std::set<std::size_t> targets;
    };
    std::vector<ActiveFault> faults;
    for (const auto& f : spec.faults) {
        ActiveFault a{&f, static_cast<std::size_t>(f.start_s / period),
                      f.end_s ? std::min(samples, static_cast<std::size_t>(*f.end_s / period)) : samples,
                      std::set<std::size_t>(f.targets.begin(), f.targets.end())};
        faults.push_back(std::move(a));
    }

    // Replacement shared component for a broken (receiver, source) link;
    // source == n stands for the shared workload.
    std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> surrogates;
    auto surrogate = [&](std::size_t receiver, std::size_t source) -> const std::vector<double>& {
        auto it = surrogates.find({receiver, source});
        if (it == surrogates.end()) {
            auto rng = make_engine(spec.rng_seed, kSurrogateStream + receiver * (n + 1) + source);
            const auto& stream = spec.shared_workload[spec.workload_group.empty() ? 0 : spec.workload_group[receiver]];
            const auto& original = source == n ? stream : spec.workload[source];
            auto avoid = stream;
            avoid.insert(avoid.end(), original.begin(), original.end());
            auto comps = separated_components(rng, original, avoid, spec.frequency_min_hz, spec.frequency_max_hz);
            for (auto& c : comps) {
                c.amplitude *= kBreakScale;
            }
            it = surrogates
                     .emplace(std::pair{receiver, source},
                              driver_series(comps, kBreakScale * spec.driver_sigma, spec.driver_persistence, period, samples, rng))
                     .first;
        }
        return it->second;
    };
    auto broken = [&](std::size_t i, std::size_t j, std::size_t k) {
        for (const auto& f : faults) {
            if (f.event->kind == FaultKind::dependency_break && k >= f.start && k < f.end &&
                (f.targets.count(i) || f.targets.count(j))) {
                return true;
            }
        }
        return false;
    };

    // Fluctuating part of every service before faults that add load.
    Eigen::MatrixXd fluct = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < samples; ++k) {
            double v = drivers[i][k];
            if (gain(i) > 0.0) {
                v += gain(i) * (broken(i, i, k) ? surrogate(i, n)[k] : shared[spec.workload_group[i]][k]);
            }
            for (const auto& [j, c] : neighbours[i]) {
                v += c * (broken(i, j, k) ? surrogate(i, j)[k] : drivers[j][k]);
            }
            fluct(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = v;
        }
    }
    // A delayed service emits its whole load late, by a growing lag.
    for (const auto& f : faults) {
        if (f.event->kind != FaultKind::delay_decouple) {
            continue;
        }
        for (auto i : f.targets) {
            const Eigen::VectorXd original = fluct.col(static_cast<Eigen::Index>(i));
            for (std::size_t k = f.start; k < f.end; ++k) {
                const auto lag = std::min<std::int64_t>(
                    kMaxLagSamples, 1 + static_cast<std::int64_t>(k - f.start) / kLagGrowthSamples);
                const auto from = static_cast<std::int64_t>(k) - lag;
                fluct(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) =
                    original(static_cast<Eigen::Index>(std::max<std::int64_t>(0, from)));
            }
        }
    }

    // Observation noise: i.i.d. Gaussian increments.
    for (std::size_t i = 0; i < n; ++i) {
        auto rng = make_engine(spec.rng_seed, kNoiseStream + i);
        double level = 0.0;
        for (std::size_t k = 0; k < samples; ++k) {
            level += spec.noise_sigma * noise_draw(rng, spec.heavy_tailed_noise);
            fluct(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) += level;
        }
    }

    if (spec.load_surge) {
        const auto from = static_cast<Eigen::Index>(std::min<std::size_t>(
            samples, static_cast<std::size_t>(spec.load_surge->start_s / period)));
        fluct.bottomRows(static_cast<Eigen::Index>(samples) - from) *= spec.load_surge->factor;
    }

    for (std::size_t fi = 0; fi < faults.size(); ++fi) {
        const auto& f = faults[fi];
        if (f.event->kind == FaultKind::cpu_hog) {
            for (auto i : f.targets) {
                auto rng = make_engine(spec.rng_seed, kHogStream + i);
                const auto hog = driver_series({}, kHogSigmaScale * spec.driver_sigma, spec.driver_persistence, period,
                                               f.end - f.start, rng);
                for (std::size_t k = f.start; k < f.end; ++k) {
                    fluct(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) +=
                        kHogRampPerSample * static_cast<double>(k - f.start) + hog[k - f.start];
                }
            }
        } else if (f.event->kind == FaultKind::coupling_leak_nn) {
            auto rng = make_engine(spec.rng_seed, kContentionStream + fi);
            const auto contention = driver_series({}, kContentionSigmaScale * spec.driver_sigma,
                                                  spec.driver_persistence, period, f.end - f.start, rng);
            std::set<int> nodes;
            for (auto t : f.targets) {
                nodes.insert(spec.node_of.empty() ? 0 : spec.node_of[t]);
            }
            for (std::size_t i = 0; i < n; ++i) {
                const bool target = f.targets.count(i) != 0;
                const bool colocated = nodes.count(spec.node_of.empty() ? 0 : spec.node_of[i]) != 0;
                if (!target && !colocated) {
                    continue;
                }
                const double bleed = target ? 1.0 : kNeighbourBleed;
                for (std::size_t k = f.start; k < f.end; ++k) {
                    const double gain = std::min(1.0, static_cast<double>(k - f.start) / kContentionRampSamples);
                    double add = bleed * gain * contention[k - f.start];
                    if (target) {
                        add += kLeakPerSample * static_cast<double>(k - f.start);
                    }
                    fluct(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) += add;
                }
            }
        }
    }

    Scenario out;
    auto& panel = out.panel;
    panel.service_ids = spec.service_names();
    panel.sampling_period = period;
    panel.timestamps.resize(samples);
    for (std::size_t k = 0; k < samples; ++k) {
        panel.timestamps[k] = spec.start_timestamp + static_cast<Timestamp>(k) * period;
    }
    auto base_rng = make_engine(spec.rng_seed, kLayoutStream + 1);
    panel.values = fluct;
    for (std::size_t i = 0; i < n; ++i) {
        panel.values.col(static_cast<Eigen::Index>(i)).array() += uniform(base_rng, 1.0, 4.0);
    }
    panel.validate();

    if (!faults.empty()) {
        const auto first = std::min_element(faults.begin(), faults.end(),
                                            [](const auto& a, const auto& b) { return a.start < b.start; });
        out.truth.onset_index = first->start;
        out.truth.onset_timestamp = panel.timestamps[first->start];
        out.truth.fault_kind = to_string(first->event->kind);
        std::set<std::string> names;
        for (const auto& f : faults) {
            for (auto t : f.targets) {
                names.insert(panel.service_ids[t]);
            }
        }
        out.truth.targets.assign(names.begin(), names.end());
    }
    return out;
}

nlohmann::json to_json(const GroundTruth& truth) {
    nlohmann::json j{{"fault_kind", truth.fault_kind}, {"targets", truth.targets}};
    j["onset_timestamp"] = truth.onset_timestamp ? nlohmann::json(*truth.onset_timestamp) : nlohmann::json(nullptr);
    j["onset_index"] = truth.onset_index ? nlohmann::json(*truth.onset_index) : nlohmann::json(nullptr);
    return j;
}

} // namespace fcadl
