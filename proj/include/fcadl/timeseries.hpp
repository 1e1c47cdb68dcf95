#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace fcadl {

using Timestamp = std::int64_t;

/// How a missing (timestamp, service) cell is resolved during ingestion.
enum class GapPolicy { forward_fill, zero_fill, reject };

GapPolicy parse_gap_policy(const std::string& name);
std::string to_string(GapPolicy policy);

/// Aligned per-service samples on a uniform time grid. Row t holds every
/// service's sample at timestamps[t]; columns follow service_ids.
struct MetricPanel {
    std::vector<std::string> service_ids;
    std::vector<Timestamp> timestamps;
    Eigen::MatrixXd values;
    std::int64_t sampling_period = 0;
    std::vector<std::string> warnings;

    std::size_t rows() const noexcept { return timestamps.size(); }
    std::size_t services() const noexcept { return service_ids.size(); }

    /// Throws Errc::contract if any panel invariant is violated.
    void validate() const;
};

/// First differences of a panel. Row t is x[t+1] - x[t] and is stamped with
/// the later of the two timestamps.
struct DifferencedPanel {
    std::vector<std::string> service_ids;
    std::vector<Timestamp> timestamps;
    Eigen::MatrixXd values;
    std::int64_t sampling_period = 0;

    std::size_t rows() const noexcept { return timestamps.size(); }
    std::size_t services() const noexcept { return service_ids.size(); }
};

/// Reads the long-form `timestamp,service,value` CSV. Services are ordered
/// lexicographically; fractional timestamps are floored to whole seconds.
MetricPanel ingest_csv(const std::filesystem::path& path, GapPolicy policy = GapPolicy::forward_fill);
MetricPanel ingest_csv(std::istream& in, GapPolicy policy = GapPolicy::forward_fill);

DifferencedPanel difference(const MetricPanel& panel);

/// Long form, one row per cell, rows ordered by timestamp then service.
void write_long_csv(const MetricPanel& panel, std::ostream& out);
/// Wide form `timestamp,<svc1>,<svc2>,...` for inspection.
void write_wide_csv(const MetricPanel& panel, std::ostream& out);

} // namespace fcadl
