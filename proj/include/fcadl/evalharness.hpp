#pragma once

#include "fcadl/rca.hpp"
#include "fcadl/timeseries.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fcadl {

struct DetectionScore {
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct TopKScore {
    int k = 1;
    std::size_t hits = 0;
    std::size_t trials = 0;
    double accuracy() const noexcept { return trials ? static_cast<double>(hits) / static_cast<double>(trials) : 0.0; }
    void add(bool hit) noexcept {
        ++trials;
        hits += hit ? 1U : 0U;
    }
};

/// Binary labelling: everything before the boundary is normal, everything
/// from it on is abnormal. No boundary means all normal.
DetectionScore score_detection(std::optional<std::size_t> predicted_boundary, std::size_t ground_truth_onset,
                               std::size_t n_samples);

bool score_topk(const RcaRanking& ranking, const std::set<std::string>& true_targets, int k);

struct NSigmaResult {
    std::optional<std::size_t> boundary;
    std::vector<std::string> warnings;
};

/// Three-sigma detector; the first train_fraction of rows fit per-service
/// mean and standard deviation.
NSigmaResult nsigma_detect(const MetricPanel& panel, double train_fraction = 0.5);

/// Ranks services by their largest |z| from the boundary on (N-Sigma RCA).
RcaRanking nsigma_rank(const MetricPanel& panel, double train_fraction, std::size_t boundary);

/// First window whose span reaches raw sample `sample_index` (window g ends at
/// differenced row g + window - 1, i.e. raw sample g + window).
std::size_t sample_to_window(std::size_t sample_index, std::size_t window, std::size_t step = 1);

} // namespace fcadl
