#include "fcadl/deltacon.hpp"

#include "fcadl/error.hpp"
#include "fcadl/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

namespace fcadl {
namespace {

constexpr double kNegativeTolerance = 1e-12;
// Packed entries per accumulation chunk. Distances are accumulated chunk by
// chunk everywhere so that batch and online paths sum in the same order.
constexpr std::size_t kChunk = 2048;
constexpr std::size_t kBlock = 24;

double checked_root(double v) {
    if (v < -kNegativeTolerance) {
        throw Error(Errc::numerical, "affinity entry " + std::to_string(v) +
                                         " is negative; eps * max degree is too large");
    }
    return v <= 0.0 ? 0.0 : std::sqrt(v);
}

double chunked_squared_distance(const double* a, const double* b, std::size_t len) {
    double total = 0.0;
    for (std::size_t off = 0; off < len; off += kChunk) {
        const auto n = static_cast<Eigen::Index>(std::min(kChunk, len - off));
        total += (Eigen::Map<const Eigen::VectorXd>(a + off, n) - Eigen::Map<const Eigen::VectorXd>(b + off, n))
                     .squaredNorm();
    }
    return total;
}

void check_same_services(std::span<const FcGraph> graphs) {
    const auto& first = graphs.front();
    for (std::size_t g = 1; g < graphs.size(); ++g) {
        const bool same_ptr = graphs[g].service_ids == first.service_ids;
        const bool same = same_ptr || (graphs[g].service_ids && first.service_ids &&
                                       *graphs[g].service_ids == *first.service_ids);
        if (!same || graphs[g].size() != first.size()) {
            throw Error(Errc::input, "snapshot " + std::to_string(g) + " (timestamp " +
                                         std::to_string(graphs[g].window_end_timestamp) +
                                         ") has a different service set than snapshot 0");
        }
    }
}

} // namespace

Eigen::MatrixXd affinity_system(const Eigen::MatrixXd& adjacency, double epsilon) {
    Eigen::MatrixXd m = -epsilon * adjacency;
    const Eigen::VectorXd degree = adjacency.rowwise().sum();
    m.diagonal().array() += 1.0 + epsilon * epsilon * degree.array();
    return m;
}

AffinityMatrix affinity(const Eigen::MatrixXd& adjacency, double epsilon) {
    if (adjacency.rows() != adjacency.cols()) {
        throw Error(Errc::dimension, "adjacency matrix is not square");
    }
    if (!(epsilon > 0.0)) {
        throw Error(Errc::input, "epsilon must be positive");
    }
    if ((adjacency.array() < 0.0).any()) {
        throw Error(Errc::input, "adjacency has negative weights");
    }
    const Eigen::Index n = adjacency.rows();
    Eigen::LLT<Eigen::MatrixXd> llt(affinity_system(adjacency, epsilon));
    if (llt.info() != Eigen::Success) {
        const double max_degree = n > 0 ? adjacency.rowwise().sum().maxCoeff() : 0.0;
        throw Error(Errc::numerical, "affinity system is not positive definite (eps = " + std::to_string(epsilon) +
                                         ", max degree = " + std::to_string(max_degree) + ")");
    }
    AffinityMatrix out;
    out.epsilon = epsilon;
    out.s = llt.solve(Eigen::MatrixXd::Identity(n, n));
    // The exact inverse is symmetric; remove solver asymmetry.
    out.s = (0.5 * (out.s + out.s.transpose())).eval();
    if (!out.s.allFinite()) {
        throw Error(Errc::numerical, "affinity matrix has non-finite entries");
    }
    return out;
}

AffinityMatrix affinity(const FcGraph& graph, double epsilon) {
    return affinity(graph.weights, epsilon);
}

AffinityRoots affinity_roots(const AffinityMatrix& s) {
    const auto n = s.size();
    AffinityRoots out;
    out.n = n;
    out.packed.reserve(n * (n + 1) / 2);
    const Eigen::Index ni = static_cast<Eigen::Index>(n);
    for (Eigen::Index i = 0; i < ni; ++i) {
        out.packed.push_back(checked_root(s.s(i, i)));
    }
    for (Eigen::Index j = 0; j < ni; ++j) {
        for (Eigen::Index i = j + 1; i < ni; ++i) {
            out.packed.push_back(std::numbers::sqrt2 * checked_root(s.s(i, j)));
        }
    }
    return out;
}

double rooted_distance(const AffinityMatrix& sm, const AffinityMatrix& sn) {
    if (sm.s.rows() != sn.s.rows() || sm.s.cols() != sn.s.cols()) {
        throw Error(Errc::dimension, "affinity matrices differ in size");
    }
    double total = 0.0;
    for (Eigen::Index j = 0; j < sm.s.cols(); ++j) {
        for (Eigen::Index i = 0; i < sm.s.rows(); ++i) {
            const double diff = checked_root(sm.s(i, j)) - checked_root(sn.s(i, j));
            total += diff * diff;
        }
    }
    return std::sqrt(total);
}

double rooted_distance(const AffinityRoots& a, const AffinityRoots& b) {
    if (a.n != b.n || a.packed.size() != b.packed.size()) {
        throw Error(Errc::dimension, "affinity roots differ in size");
    }
    return std::sqrt(chunked_squared_distance(a.packed.data(), b.packed.data(), a.packed.size()));
}

DistanceMatrix distance_matrix(std::span<const FcGraph> graphs, double epsilon, unsigned threads) {
    std::vector<AffinityRoots> roots;
    return distance_matrix(graphs, epsilon, threads, roots);
}

DistanceMatrix distance_matrix(std::span<const FcGraph> graphs, double epsilon, unsigned threads,
                               std::vector<AffinityRoots>& roots) {
    if (graphs.size() < 2) {
        throw Error(Errc::insufficient_data, "distance matrix needs at least 2 snapshots");
    }
    check_same_services(graphs);
    const std::size_t t = graphs.size();
    roots.assign(t, {});
    parallel_for(t, threads, [&](std::size_t g) { roots[g] = affinity_roots(affinity(graphs[g], epsilon)); });

    DistanceMatrix out;
    out.d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(t));
    out.snapshot_timestamps.reserve(t);
    for (const auto& g : graphs) {
        out.snapshot_timestamps.push_back(g.window_end_timestamp);
    }

    // Cache-blocked over snapshot pairs and packed entries.
    const std::size_t len = roots.front().packed.size();
    const std::size_t blocks = (t + kBlock - 1) / kBlock;
    std::vector<std::pair<std::size_t, std::size_t>> tiles;
    for (std::size_t bi = 0; bi < blocks; ++bi) {
        for (std::size_t bj = bi; bj < blocks; ++bj) {
            tiles.emplace_back(bi, bj);
        }
    }
    parallel_for(tiles.size(), threads, [&](std::size_t k) {
        const auto [bi, bj] = tiles[k];
        const std::size_t i0 = bi * kBlock, i1 = std::min(t, i0 + kBlock);
        const std::size_t j0 = bj * kBlock, j1 = std::min(t, j0 + kBlock);
        std::vector<double> acc((i1 - i0) * (j1 - j0), 0.0);
        for (std::size_t off = 0; off < len; off += kChunk) {
            const auto n = static_cast<Eigen::Index>(std::min(kChunk, len - off));
            for (std::size_t i = i0; i < i1; ++i) {
                const Eigen::Map<const Eigen::VectorXd> a(roots[i].packed.data() + off, n);
                for (std::size_t j = std::max(j0, i + 1); j < j1; ++j) {
                    const Eigen::Map<const Eigen::VectorXd> b(roots[j].packed.data() + off, n);
                    acc[(i - i0) * (j1 - j0) + (j - j0)] += (a - b).squaredNorm();
                }
            }
        }
        for (std::size_t i = i0; i < i1; ++i) {
            for (std::size_t j = std::max(j0, i + 1); j < j1; ++j) {
                const double d = std::sqrt(acc[(i - i0) * (j1 - j0) + (j - j0)]);
                out.d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d;
                out.d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = d;
            }
        }
    });
    return out;
}

std::vector<double> distances_to_reference(const FcGraph& new_graph, std::span<const AffinityMatrix> references) {
    std::vector<double> out;
    out.reserve(references.size());
    if (references.empty()) {
        return out;
    }
    for (const auto& r : references) {
        if (r.size() != new_graph.size()) {
            throw Error(Errc::dimension, "reference affinity has " + std::to_string(r.size()) +
                                             " nodes, new graph has " + std::to_string(new_graph.size()));
        }
    }
    const auto roots = affinity_roots(affinity(new_graph, references.front().epsilon));
    for (const auto& r : references) {
        out.push_back(rooted_distance(roots, affinity_roots(r)));
    }
    return out;
}

std::vector<double> distances_to_reference(const FcGraph& new_graph, std::span<const AffinityRoots> references,
                                           double epsilon) {
    std::vector<double> out;
    out.reserve(references.size());
    if (references.empty()) {
        return out;
    }
    for (const auto& r : references) {
        if (r.n != new_graph.size()) {
            throw Error(Errc::dimension, "reference affinity has " + std::to_string(r.n) +
                                             " nodes, new graph has " + std::to_string(new_graph.size()));
        }
    }
    const auto roots = affinity_roots(affinity(new_graph, epsilon));
    for (const auto& r : references) {
        out.push_back(rooted_distance(roots, r));
    }
    return out;
}

void write_distance_csv(const DistanceMatrix& dm, std::ostream& out) {
    char buf[64];
    for (std::size_t i = 0; i < dm.snapshot_timestamps.size(); ++i) {
        out << (i ? "," : "") << dm.snapshot_timestamps[i];
    }
    out << '\n';
    for (Eigen::Index i = 0; i < dm.d.rows(); ++i) {
        for (Eigen::Index j = 0; j < dm.d.cols(); ++j) {
            auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), dm.d(i, j));
            out << (j ? "," : "") << std::string_view(buf, static_cast<std::size_t>(end - buf));
        }
        out << '\n';
    }
}

} // namespace fcadl
