#pragma once

#include "fcadl/deltacon.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fcadl {

inline constexpr int kNoise = -1;

struct ClusterParams {
    int min_cluster_size = 2;
    /// 0 means "same as min_cluster_size".
    int min_samples = 0;
    /// Let the root of the condensed tree win excess-of-mass selection.
    bool allow_single_cluster = false;

    /// min_cluster_size = floor(T / 5), clamped to at least 2.
    static ClusterParams defaults_for(std::size_t snapshots);
    int effective_min_samples() const noexcept { return min_samples > 0 ? min_samples : min_cluster_size; }
    void validate() const;
};

struct ClusterAssignment {
    std::vector<int> labels;
    std::vector<double> probabilities;
    std::vector<Timestamp> snapshot_timestamps;
    std::vector<std::string> warnings;

    std::size_t size() const noexcept { return labels.size(); }
    int cluster_count() const;
    std::vector<std::size_t> members(int label) const;
};

struct ChangePointReport {
    std::optional<std::size_t> change_index;
    std::optional<Timestamp> change_timestamp;
    int pre_label = kNoise;
    int post_label = kNoise;

    bool has_change() const noexcept { return change_index.has_value(); }
};

struct Prediction {
    int label = kNoise;
    double probability = 0.0;
};

/// HDBSCAN over a precomputed distance matrix. Keeps what approximate
/// prediction of new snapshots needs once fitted.
class HdbscanModel {
public:
    static HdbscanModel fit(const DistanceMatrix& distances, const ClusterParams& params);

    const ClusterAssignment& assignment() const noexcept { return assignment_; }
    const ClusterParams& params() const noexcept { return params_; }
    const std::vector<double>& core_distances() const noexcept { return core_; }

    /// Label and membership strength for a snapshot given its distances to
    /// every fitted snapshot.
    Prediction predict(std::span<const double> distances) const;

private:
    ClusterParams params_;
    std::vector<double> core_;
    ClusterAssignment assignment_;
    std::vector<double> radius_;     // per output label
    std::vector<double> max_lambda_; // per output label
    bool single_root_ = false;
};

ClusterAssignment cluster(const DistanceMatrix& distances, const ClusterParams& params);

/// First durable departure from the initial cluster. Noise neither starts
/// nor breaks a run; a run must reach `persistence_run` snapshots.
ChangePointReport detect_change(const ClusterAssignment& assignment, int persistence_run = 5);

Prediction score_new_snapshot(std::span<const double> new_graph_distances, const ClusterAssignment& assignment,
                              const HdbscanModel& model);

/// CSV `timestamp,label,probability`.
void write_assignment_csv(const ClusterAssignment& assignment, std::ostream& out);
/// {change_timestamp, pre_label, post_label} or {no_change: true}.
nlohmann::json to_json(const ChangePointReport& report);

} // namespace fcadl
