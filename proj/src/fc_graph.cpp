#include "fcadl/fc_graph.hpp"

#include "fcadl/error.hpp"
#include "fcadl/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace fcadl {
namespace {

// Variance below this fraction of the weighted mean square is rounding residue
// of a constant series.
constexpr double kRelativeVarianceFloor = 1e-20;

} // namespace

FcParams FcParams::for_window(int window) {
    FcParams p;
    p.window = window;
    p.decay_theta = window / 3.0;
    return p;
}

void FcParams::validate() const {
    if (window < 3) {
        throw Error(Errc::config, "window must be at least 3, got " + std::to_string(window));
    }
    if (step < 1) {
        throw Error(Errc::config, "step must be positive");
    }
    if (!(decay_theta > 0.0) || !std::isfinite(decay_theta)) {
        throw Error(Errc::config, "decay_theta must be positive");
    }
    if (!(threshold >= 0.0 && threshold < 1.0)) {
        throw Error(Errc::config, "threshold must lie in [0, 1)");
    }
}

std::vector<double> ewma_weights(std::size_t n, double decay_theta) {
    std::vector<double> w(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = std::exp((static_cast<double>(i) - static_cast<double>(n) + 1.0) / decay_theta);
        total += w[i];
    }
    for (auto& v : w) {
        v /= total;
    }
    return w;
}

double ewma_pearson(std::span<const double> x, std::span<const double> y, double decay_theta, bool* degenerate) {
    if (x.size() != y.size()) {
        throw Error(Errc::dimension, "ewma_pearson: sequences differ in length");
    }
    if (x.size() < 3) {
        throw Error(Errc::insufficient_data, "ewma_pearson needs at least 3 samples");
    }
    if (!(decay_theta > 0.0)) {
        throw Error(Errc::input, "ewma_pearson: decay_theta must be positive");
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::isnan(x[i]) || std::isnan(y[i])) {
            throw Error(Errc::input, "ewma_pearson: NaN at sample " + std::to_string(i));
        }
    }
    const auto w = ewma_weights(x.size(), decay_theta);
    double mx = 0.0, my = 0.0, sx2 = 0.0, sy2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += w[i] * x[i];
        my += w[i] * y[i];
        sx2 += w[i] * x[i] * x[i];
        sy2 += w[i] * y[i] * y[i];
    }
    double vx = 0.0, vy = 0.0, cxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        vx += w[i] * dx * dx;
        vy += w[i] * dy * dy;
        cxy += w[i] * dx * dy;
    }
    const bool flat = vx <= kRelativeVarianceFloor * sx2 || vy <= kRelativeVarianceFloor * sy2;
    if (degenerate) {
        *degenerate = flat;
    }
    if (flat) {
        return 0.0;
    }
    return std::clamp(cxy / std::sqrt(vx * vy), -1.0, 1.0);
}

Eigen::MatrixXd ewma_correlation_matrix(const Eigen::Ref<const Eigen::MatrixXd>& rows,
                                        std::span<const double> weights) {
    if (static_cast<std::size_t>(rows.rows()) != weights.size()) {
        throw Error(Errc::dimension, "weight count does not match window length");
    }
    if (rows.hasNaN()) {
        throw Error(Errc::input, "NaN in correlation window");
    }
    const Eigen::Map<const Eigen::VectorXd> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
    const Eigen::RowVectorXd mean = w.transpose() * rows;
    const Eigen::VectorXd mean_square = rows.array().square().matrix().transpose() * w;
    Eigen::MatrixXd scaled = rows.rowwise() - mean;
    scaled.array().colwise() *= w.array().sqrt();

    const Eigen::Index n = rows.cols();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    cov.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());

    Eigen::VectorXd inv_sd(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double v = cov(i, i);
        inv_sd(i) = (v <= kRelativeVarianceFloor * mean_square(i) || v <= 0.0) ? 0.0 : 1.0 / std::sqrt(v);
    }
    Eigen::MatrixXd corr(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        corr(j, j) = inv_sd(j) > 0.0 ? 1.0 : 0.0;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double r = std::clamp(cov(i, j) * inv_sd(i) * inv_sd(j), -1.0, 1.0);
            corr(i, j) = r;
            corr(j, i) = r;
        }
    }
    return corr;
}

Eigen::MatrixXd threshold_adjacency(const Eigen::MatrixXd& correlation, double threshold) {
    Eigen::MatrixXd w = correlation.cwiseAbs();
    w = (w.array() >= threshold).select(w, 0.0);
    w.diagonal().setZero();
    return w;
}

std::size_t fc_graph_count(std::size_t rows, const FcParams& params) {
    const auto window = static_cast<std::size_t>(params.window);
    if (rows < window) {
        return 0;
    }
    return (rows - window) / static_cast<std::size_t>(params.step) + 1;
}

std::vector<FcGraph> build_fc_sequence(const DifferencedPanel& panel, const FcParams& params, unsigned threads) {
    params.validate();
    const auto window = static_cast<std::size_t>(params.window);
    if (panel.rows() < window) {
        throw Error(Errc::insufficient_data, "FC construction needs at least " + std::to_string(window) +
                                                 " differenced rows, panel has " + std::to_string(panel.rows()));
    }
    const auto ids = std::make_shared<const std::vector<std::string>>(panel.service_ids);
    const auto weights = ewma_weights(window, params.decay_theta);
    std::vector<FcGraph> graphs(fc_graph_count(panel.rows(), params));
    parallel_for(graphs.size(), threads, [&](std::size_t g) {
        const std::size_t start = g * static_cast<std::size_t>(params.step);
        const std::size_t end = start + window - 1;
        auto& out = graphs[g];
        out.service_ids = ids;
        out.weights = threshold_adjacency(
            ewma_correlation_matrix(panel.values.middleRows(static_cast<Eigen::Index>(start),
                                                            static_cast<Eigen::Index>(window)),
                                    weights),
            params.threshold);
        out.window_end_index = end;
        out.window_end_timestamp = panel.timestamps[end];
    });
    return graphs;
}

OnlineFcBuilder::OnlineFcBuilder(std::vector<std::string> service_ids, const FcParams& params,
                                 const Eigen::Ref<const Eigen::MatrixXd>& initial, std::size_t window_end_index,
                                 Timestamp window_end_timestamp, std::int64_t sampling_period)
    : params_(params),
      ids_(std::make_shared<const std::vector<std::string>>(std::move(service_ids))),
      weights_(ewma_weights(static_cast<std::size_t>(params.window), params.decay_theta)),
      ring_(initial),
      end_index_(window_end_index),
      end_timestamp_(window_end_timestamp),
      period_(sampling_period) {
    params_.validate();
    if (initial.rows() != params_.window) {
        throw Error(Errc::dimension, "online state needs exactly " + std::to_string(params_.window) +
                                         " initial rows, got " + std::to_string(initial.rows()));
    }
    if (static_cast<std::size_t>(initial.cols()) != ids_->size()) {
        throw Error(Errc::dimension, "initial window column count does not match service count");
    }
    current_ = compute();
}

OnlineFcBuilder OnlineFcBuilder::from_panel(const DifferencedPanel& panel, const FcParams& params) {
    params.validate();
    if (panel.rows() < static_cast<std::size_t>(params.window)) {
        throw Error(Errc::insufficient_data, "online state needs at least " + std::to_string(params.window) +
                                                 " differenced rows");
    }
    const auto end = static_cast<std::size_t>(params.window) - 1;
    return OnlineFcBuilder(panel.service_ids, params, panel.values.topRows(params.window), end,
                           panel.timestamps[end], panel.sampling_period);
}

const FcGraph& OnlineFcBuilder::push(std::span<const double> row) {
    if (static_cast<Eigen::Index>(row.size()) != ring_.cols()) {
        throw Error(Errc::dimension, "row has " + std::to_string(row.size()) + " values, expected " +
                                         std::to_string(ring_.cols()));
    }
    ring_.row(head_) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), static_cast<Eigen::Index>(row.size()));
    head_ = (head_ + 1) % ring_.rows();
    ++end_index_;
    end_timestamp_ += period_;
    current_ = compute();
    return current_;
}

FcGraph OnlineFcBuilder::compute() const {
    const Eigen::Index n = ring_.rows();
    Eigen::MatrixXd ordered(n, ring_.cols());
    ordered.topRows(n - head_) = ring_.bottomRows(n - head_);
    ordered.bottomRows(head_) = ring_.topRows(head_);
    FcGraph g;
    g.service_ids = ids_;
    g.weights = threshold_adjacency(ewma_correlation_matrix(ordered, weights_), params_.threshold);
    g.window_end_index = end_index_;
    g.window_end_timestamp = end_timestamp_;
    return g;
}

nlohmann::json to_json(const FcGraph& graph) {
    nlohmann::json edges = nlohmann::json::array();
    const Eigen::Index n = graph.weights.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (graph.weights(i, j) != 0.0) {
                edges.push_back({i, j, graph.weights(i, j)});
            }
        }
    }
    return {{"window_end_timestamp", graph.window_end_timestamp},
            {"services", graph.service_ids ? *graph.service_ids : std::vector<std::string>{}},
            {"edges", std::move(edges)}};
}

} // namespace fcadl
