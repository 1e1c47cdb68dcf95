#pragma once

#include "fcadl/timeseries.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fcadl {

struct FcParams {
    int window = 360;
    int step = 1;
    /// e-folding length of the exponential weights, in samples.
    double decay_theta = 120.0;
    double threshold = 0.1;

    /// Defaults for a given window with theta = window / 3.
    static FcParams for_window(int window);
    void validate() const;
};

/// One thresholded |correlation| graph for the window ending at
/// window_end_index (a row of the differenced panel).
struct FcGraph {
    std::shared_ptr<const std::vector<std::string>> service_ids;
    Eigen::MatrixXd weights;
    std::size_t window_end_index = 0;
    Timestamp window_end_timestamp = 0;

    std::size_t size() const noexcept { return static_cast<std::size_t>(weights.rows()); }
};

/// Normalised weights w_i proportional to exp((i - n + 1) / theta).
std::vector<double> ewma_weights(std::size_t n, double decay_theta);

/// Exponentially weighted Pearson correlation; the last sample weighs most.
/// Returns 0 when either series has no weighted variance; `degenerate` (if
/// given) reports that case.
double ewma_pearson(std::span<const double> x, std::span<const double> y, double decay_theta,
                    bool* degenerate = nullptr);

/// Weighted correlation matrix of the columns of `rows` (samples x services).
/// Zero-variance columns get zero correlation with everything.
Eigen::MatrixXd ewma_correlation_matrix(const Eigen::Ref<const Eigen::MatrixXd>& rows,
                                        std::span<const double> weights);

/// |r| with sub-threshold entries and the diagonal zeroed.
Eigen::MatrixXd threshold_adjacency(const Eigen::MatrixXd& correlation, double threshold);

std::vector<FcGraph> build_fc_sequence(const DifferencedPanel& panel, const FcParams& params,
                                       unsigned threads = 1);

/// Number of graphs build_fc_sequence emits for `rows` differenced rows.
std::size_t fc_graph_count(std::size_t rows, const FcParams& params);

/// Sliding-window state for streaming use. Each push recomputes the window
/// exactly, so results are identical to the batch path on the same rows.
class OnlineFcBuilder {
public:
    /// `initial` holds exactly params.window rows, oldest first.
    OnlineFcBuilder(std::vector<std::string> service_ids, const FcParams& params,
                    const Eigen::Ref<const Eigen::MatrixXd>& initial, std::size_t window_end_index,
                    Timestamp window_end_timestamp, std::int64_t sampling_period);

    /// Convenience: seed from the first window of a differenced panel.
    static OnlineFcBuilder from_panel(const DifferencedPanel& panel, const FcParams& params);

    const FcGraph& current() const noexcept { return current_; }
    const FcGraph& push(std::span<const double> row);

private:
    FcGraph compute() const;

    FcParams params_;
    std::shared_ptr<const std::vector<std::string>> ids_;
    std::vector<double> weights_;
    Eigen::MatrixXd ring_;
    Eigen::Index head_ = 0; // index of the oldest row in ring_
    std::size_t end_index_;
    Timestamp end_timestamp_;
    std::int64_t period_;
    FcGraph current_;
};

/// {window_end_timestamp, services, edges: [[i, j, w], ...]} with the
/// non-zero upper triangle only.
nlohmann::json to_json(const FcGraph& graph);

} // namespace fcadl
