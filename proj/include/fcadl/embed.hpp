#pragma once

#include "fcadl/clustering.hpp"
#include "fcadl/deltacon.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace fcadl {

struct Embedding2D {
    Eigen::MatrixX2d coords;
    std::vector<std::size_t> landmark_indices;
    /// sqrt(sum (d^2 - |xi - xj|^2)^2 / sum d^4) over landmark pairs.
    double stress = 0.0;
};

/// Landmark MDS: classical MDS on a seeded random landmark subset, then
/// distance-based triangulation of the remaining snapshots. Coordinates are
/// centred on the origin.
Embedding2D lmds(const DistanceMatrix& distances, std::size_t n_landmarks, std::uint64_t rng_seed);

/// CSV `timestamp,x,y,label`; label is -1 for every row when no assignment is given.
void write_embedding_csv(const Embedding2D& embedding, const DistanceMatrix& distances,
                         const ClusterAssignment* assignment, std::ostream& out);

} // namespace fcadl
