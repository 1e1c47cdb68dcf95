#include "fcadl/evalharness.hpp"

#include "fcadl/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fcadl {

DetectionScore score_detection(std::optional<std::size_t> predicted_boundary, std::size_t ground_truth_onset,
                               std::size_t n_samples) {
    if (ground_truth_onset >= n_samples) {
        throw Error(Errc::input, "onset " + std::to_string(ground_truth_onset) + " outside " +
                                     std::to_string(n_samples) + " samples");
    }
    if (predicted_boundary && *predicted_boundary > n_samples) {
        throw Error(Errc::input, "predicted boundary outside the scored range");
    }
    const std::size_t boundary = predicted_boundary.value_or(n_samples);
    DetectionScore s;
    // Closed-form confusion counts for two step labellings.
    const std::size_t lo = std::min(boundary, ground_truth_onset);
    const std::size_t hi = std::max(boundary, ground_truth_onset);
    s.tn = lo;
    s.tp = n_samples - hi;
    if (boundary < ground_truth_onset) {
        s.fp = hi - lo;
    } else {
        s.fn = hi - lo;
    }
    s.precision = (s.tp + s.fp) ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp) : 0.0;
    s.recall = (s.tp + s.fn) ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn) : 0.0;
    s.f1 = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

bool score_topk(const RcaRanking& ranking, const std::set<std::string>& true_targets, int k) {
    for (const auto& e : ranking.entries) {
        if (e.rank <= k && true_targets.count(e.service)) {
            return true;
        }
    }
    return false;
}

namespace {

struct TrainingStats {
    std::size_t train_rows;
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;
    std::vector<std::string> warnings;
};

TrainingStats training_stats(const MetricPanel& panel, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw Error(Errc::input, "train_fraction must lie in (0, 1)");
    }
    TrainingStats st;
    st.train_rows = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(panel.rows())));
    if (st.train_rows < 2) {
        throw Error(Errc::insufficient_data, "N-Sigma training prefix has fewer than 2 rows");
    }
    const auto train = panel.values.topRows(static_cast<Eigen::Index>(st.train_rows));
    st.mean = train.colwise().mean().transpose();
    st.sd = ((train.rowwise() - st.mean.transpose()).array().square().colwise().sum() /
             static_cast<double>(st.train_rows - 1))
                .sqrt()
                .transpose();
    for (Eigen::Index s = 0; s < st.sd.size(); ++s) {
        if (!(st.sd(s) > 0.0)) {
            st.warnings.push_back("service '" + panel.service_ids[static_cast<std::size_t>(s)] +
                                  "' has zero training variance; skipped");
        }
    }
    return st;
}

} // namespace

NSigmaResult nsigma_detect(const MetricPanel& panel, double train_fraction) {
    auto st = training_stats(panel, train_fraction);
    NSigmaResult out;
    out.warnings = std::move(st.warnings);
    for (const auto& w : out.warnings) {
        spdlog::warn("nsigma: {}", w);
    }
    for (std::size_t t = st.train_rows; t < panel.rows() && !out.boundary; ++t) {
        for (Eigen::Index s = 0; s < panel.values.cols(); ++s) {
            if (st.sd(s) > 0.0 &&
                std::abs(panel.values(static_cast<Eigen::Index>(t), s) - st.mean(s)) > 3.0 * st.sd(s)) {
                out.boundary = t;
                break;
            }
        }
    }
    return out;
}

RcaRanking nsigma_rank(const MetricPanel& panel, double train_fraction, std::size_t boundary) {
    const auto st = training_stats(panel, train_fraction);
    std::vector<double> score(panel.services(), 0.0);
    for (std::size_t t = std::min(boundary, panel.rows()); t < panel.rows(); ++t) {
        for (std::size_t s = 0; s < panel.services(); ++s) {
            const auto si = static_cast<Eigen::Index>(s);
            if (st.sd(si) > 0.0) {
                score[s] = std::max(score[s],
                                    std::abs(panel.values(static_cast<Eigen::Index>(t), si) - st.mean(si)) / st.sd(si));
            }
        }
    }
    std::vector<std::size_t> order(panel.services());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (score[a] != score[b]) {
            return score[a] > score[b];
        }
        return panel.service_ids[a] < panel.service_ids[b];
    });
    RcaRanking out;
    for (std::size_t r = 0; r < order.size(); ++r) {
        out.entries.push_back({panel.service_ids[order[r]], score[order[r]], static_cast<int>(r + 1)});
    }
    return out;
}

std::size_t sample_to_window(std::size_t sample_index, std::size_t window, std::size_t step) {
    if (sample_index <= window) {
        return 0;
    }
    return (sample_index - window + step - 1) / step;
}

} // namespace fcadl
