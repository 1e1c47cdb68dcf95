#pragma once

#include "fcadl/fc_graph.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <span>
#include <vector>

namespace fcadl {

inline constexpr double kDefaultEpsilon = 1e-2;

/// S = (I + eps^2 D - eps A)^-1 with D the weighted degree matrix.
struct AffinityMatrix {
    Eigen::MatrixXd s;
    double epsilon = kDefaultEpsilon;

    std::size_t size() const noexcept { return static_cast<std::size_t>(s.rows()); }
};

/// Element-wise square roots of an affinity matrix, packed upper triangle
/// with off-diagonal entries scaled by sqrt(2). Plain squared Euclidean
/// distance between two packings equals the full double sum over (i, j).
struct AffinityRoots {
    std::vector<double> packed;
    std::size_t n = 0;
};

struct DistanceMatrix {
    Eigen::MatrixXd d;
    std::vector<Timestamp> snapshot_timestamps;

    std::size_t size() const noexcept { return static_cast<std::size_t>(d.rows()); }
};

/// The system matrix I + eps^2 D - eps A.
Eigen::MatrixXd affinity_system(const Eigen::MatrixXd& adjacency, double epsilon);

AffinityMatrix affinity(const Eigen::MatrixXd& adjacency, double epsilon = kDefaultEpsilon);
AffinityMatrix affinity(const FcGraph& graph, double epsilon = kDefaultEpsilon);

AffinityRoots affinity_roots(const AffinityMatrix& s);

/// Root-Euclidean distance sqrt(sum_ij (sqrt(Sm_ij) - sqrt(Sn_ij))^2).
double rooted_distance(const AffinityMatrix& sm, const AffinityMatrix& sn);
double rooted_distance(const AffinityRoots& a, const AffinityRoots& b);

DistanceMatrix distance_matrix(std::span<const FcGraph> graphs, double epsilon = kDefaultEpsilon,
                               unsigned threads = 1);
/// Same as above, also handing back the per-graph roots for later online use.
DistanceMatrix distance_matrix(std::span<const FcGraph> graphs, double epsilon, unsigned threads,
                               std::vector<AffinityRoots>& roots_out);

std::vector<double> distances_to_reference(const FcGraph& new_graph, std::span<const AffinityMatrix> references);
std::vector<double> distances_to_reference(const FcGraph& new_graph, std::span<const AffinityRoots> references,
                                           double epsilon = kDefaultEpsilon);

/// Dense CSV, header row of snapshot timestamps.
void write_distance_csv(const DistanceMatrix& dm, std::ostream& out);

} // namespace fcadl
