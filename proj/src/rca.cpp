#include "fcadl/rca.hpp"

#include "fcadl/error.hpp"
#include "fcadl/random.hpp"

#include <algorithm>
#include <numeric>

namespace fcadl {

void WalkParams::validate() const {
    if (walks_per_vertex < 1) {
        throw Error(Errc::config, "walks_per_vertex must be at least 1");
    }
    if (max_walk_length < 1) {
        throw Error(Errc::config, "max_walk_length must be at least 1");
    }
}

int RcaRanking::rank_of(const std::string& service) const {
    for (const auto& e : entries) {
        if (e.service == service) {
            return e.rank;
        }
    }
    return 0;
}

Eigen::MatrixXd centroid(std::span<const FcGraph> graphs) {
    std::vector<std::size_t> all(graphs.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return centroid(graphs, all);
}

Eigen::MatrixXd centroid(std::span<const FcGraph> graphs, std::span<const std::size_t> members) {
    if (members.empty()) {
        throw Error(Errc::insufficient_data, "centroid of an empty set of graphs");
    }
    const auto& first = graphs[members.front()].weights;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(first.rows(), first.cols());
    for (std::size_t m : members) {
        if (m >= graphs.size()) {
            throw Error(Errc::dimension, "centroid member index out of range");
        }
        const auto& w = graphs[m].weights;
        if (w.rows() != sum.rows() || w.cols() != sum.cols()) {
            throw Error(Errc::dimension, "centroid inputs differ in size");
        }
        sum += w;
    }
    return sum / static_cast<double>(members.size());
}

ChangeGraph change_graph(const Eigen::MatrixXd& normal, const Eigen::MatrixXd& abnormal, double threshold,
                         std::vector<std::string> service_ids) {
    if (normal.rows() != abnormal.rows() || normal.cols() != abnormal.cols() || normal.rows() != normal.cols()) {
        throw Error(Errc::dimension, "centroid matrices differ in size or are not square");
    }
    if (!service_ids.empty() && static_cast<Eigen::Index>(service_ids.size()) != normal.rows()) {
        throw Error(Errc::dimension, "service id count does not match centroid size");
    }
    ChangeGraph out;
    out.service_ids = std::move(service_ids);
    if (out.service_ids.empty()) {
        for (Eigen::Index i = 0; i < normal.rows(); ++i) {
            out.service_ids.push_back(std::to_string(i));
        }
    }
    out.weights = (abnormal - normal).cwiseAbs();
    out.weights = (out.weights.array() >= threshold).select(out.weights, 0.0);
    out.weights.diagonal().setZero();
    return out;
}

RcaRanking random_walk_rank(const ChangeGraph& change, const WalkParams& walk) {
    walk.validate();
    RcaRanking out;
    out.walk = walk;
    out.normal_cluster = change.normal_label;
    out.abnormal_cluster = change.abnormal_label;
    if (change.empty()) {
        out.status = RcaStatus::no_structural_change;
        return out;
    }

    const Eigen::Index n = change.weights.rows();
    const Eigen::VectorXd degree = change.weights.rowwise().sum();
    std::vector<std::vector<std::pair<Eigen::Index, double>>> neighbours(static_cast<std::size_t>(n));
    for (Eigen::Index u = 0; u < n; ++u) {
        for (Eigen::Index v = 0; v < n; ++v) {
            if (change.weights(u, v) > 0.0) {
                neighbours[static_cast<std::size_t>(u)].emplace_back(v, change.weights(u, v));
            }
        }
    }

    std::vector<std::uint64_t> visits(static_cast<std::size_t>(n), 0);
    for (Eigen::Index start = 0; start < n; ++start) {
        auto rng = make_engine(walk.rng_seed, static_cast<std::uint64_t>(start));
        for (int w = 0; w < walk.walks_per_vertex; ++w) {
            Eigen::Index at = start;
            ++visits[static_cast<std::size_t>(at)];
            for (int step = 0; step < walk.max_walk_length; ++step) {
                const auto& nb = neighbours[static_cast<std::size_t>(at)];
                if (nb.empty()) {
                    break;
                }
                double target = uniform01(rng) * degree(at);
                Eigen::Index next = nb.back().first;
                for (const auto& [v, weight] : nb) {
                    if (target < weight) {
                        next = v;
                        break;
                    }
                    target -= weight;
                }
                at = next;
                ++visits[static_cast<std::size_t>(at)];
            }
        }
    }

    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (visits[a] != visits[b]) {
            return visits[a] > visits[b];
        }
        return change.service_ids[a] < change.service_ids[b];
    });
    for (std::size_t r = 0; r < order.size(); ++r) {
        out.entries.push_back(
            {change.service_ids[order[r]], static_cast<double>(visits[order[r]]), static_cast<int>(r + 1)});
    }
    return out;
}

RcaRanking localise(std::span<const FcGraph> graphs, const ClusterAssignment& assignment,
                    const ChangePointReport& report, const LocaliseParams& params) {
    if (!report.has_change()) {
        throw Error(Errc::precondition, "localisation needs a detected change point");
    }
    if (graphs.size() != assignment.size()) {
        throw Error(Errc::dimension, "graph count does not match assignment length");
    }
    const auto normal = assignment.members(report.pre_label);
    const auto abnormal = assignment.members(report.post_label);
    if (normal.empty() || abnormal.empty()) {
        throw Error(Errc::insufficient_evidence, "cluster " + std::to_string(normal.empty() ? report.pre_label
                                                                                            : report.post_label) +
                                                     " has no snapshots");
    }
    std::vector<std::string> ids = graphs.front().service_ids ? *graphs.front().service_ids : std::vector<std::string>{};
    auto change = change_graph(centroid(graphs, normal), centroid(graphs, abnormal), params.threshold, std::move(ids));
    change.normal_label = report.pre_label;
    change.abnormal_label = report.post_label;
    auto ranking = random_walk_rank(change, params.walk);
    ranking.normal_snapshots = normal.size();
    ranking.abnormal_snapshots = abnormal.size();
    ranking.threshold = params.threshold;
    return ranking;
}

nlohmann::json to_json(const RcaRanking& ranking) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : ranking.entries) {
        entries.push_back({{"rank", e.rank}, {"service", e.service}, {"score", e.score}});
    }
    return {{"status", ranking.status == RcaStatus::ranked ? "ranked" : "no_structural_change"},
            {"ranking", std::move(entries)},
            {"metadata",
             {{"seed", ranking.walk.rng_seed},
              {"prng", kPrngName},
              {"walks_per_vertex", ranking.walk.walks_per_vertex},
              {"max_walk_length", ranking.walk.max_walk_length},
              {"normal_cluster", ranking.normal_cluster},
              {"abnormal_cluster", ranking.abnormal_cluster},
              {"normal_snapshots", ranking.normal_snapshots},
              {"abnormal_snapshots", ranking.abnormal_snapshots},
              {"threshold", ranking.threshold}}}};
}

} // namespace fcadl
