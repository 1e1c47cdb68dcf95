#pragma once

#include "fcadl/clustering.hpp"
#include "fcadl/fc_graph.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fcadl {

/// Thresholded |abnormal - normal| between two centroid graphs.
struct ChangeGraph {
    std::vector<std::string> service_ids;
    Eigen::MatrixXd weights;
    int normal_label = kNoise;
    int abnormal_label = kNoise;

    bool empty() const { return (weights.array() == 0.0).all(); }
};

struct WalkParams {
    int walks_per_vertex = 10;
    /// Counted in transitions: a full walk visits max_walk_length + 1 vertices.
    int max_walk_length = 10;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

struct RankEntry {
    std::string service;
    double score = 0.0;
    int rank = 0;
};

enum class RcaStatus { ranked, no_structural_change };

struct RcaRanking {
    RcaStatus status = RcaStatus::ranked;
    std::vector<RankEntry> entries;
    WalkParams walk;
    int normal_cluster = kNoise;
    int abnormal_cluster = kNoise;
    std::size_t normal_snapshots = 0;
    std::size_t abnormal_snapshots = 0;
    double threshold = 0.0;

    /// Rank of a service (1-based), 0 when absent.
    int rank_of(const std::string& service) const;
};

/// Entrywise mean of the graphs' weight matrices.
Eigen::MatrixXd centroid(std::span<const FcGraph> graphs);
Eigen::MatrixXd centroid(std::span<const FcGraph> graphs, std::span<const std::size_t> members);

ChangeGraph change_graph(const Eigen::MatrixXd& normal, const Eigen::MatrixXd& abnormal, double threshold,
                         std::vector<std::string> service_ids = {});

/// Visit counts of weighted random walks started walks_per_vertex times from
/// every vertex. Start vertices count as visits; walks stop early at
/// zero-degree vertices. Vertex v draws from its own substream of rng_seed.
RcaRanking random_walk_rank(const ChangeGraph& change, const WalkParams& walk);

struct LocaliseParams {
    double threshold = 0.1;
    WalkParams walk;
};

RcaRanking localise(std::span<const FcGraph> graphs, const ClusterAssignment& assignment,
                    const ChangePointReport& report, const LocaliseParams& params);

/// {status, ranking: [{rank, service, score}], metadata: {...}}.
nlohmann::json to_json(const RcaRanking& ranking);

} // namespace fcadl
