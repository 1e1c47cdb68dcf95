#include "fcadl/clustering.hpp"

#include "fcadl/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace fcadl {
namespace {

// Stand-in for 1/0 so that stabilities stay finite for duplicate snapshots.
constexpr double kInfiniteLambda = 1e200;

double to_lambda(double distance) {
    return distance > 0.0 ? std::min(1.0 / distance, kInfiniteLambda) : kInfiniteLambda;
}

struct MstEdge {
    std::size_t a;
    std::size_t b;
    double weight;
};

struct CondensedCluster {
    int parent = -1;
    double birth = 0.0;
    std::size_t size = 0;
    std::vector<int> children;
    double stability = 0.0;
};

struct CondensedTree {
    std::vector<CondensedCluster> clusters; // 0 is the root
    std::vector<int> point_cluster;         // cluster each point fell out of
    std::vector<double> point_lambda;
};

void validate_distances(const DistanceMatrix& dm) {
    const auto& d = dm.d;
    if (d.rows() != d.cols()) {
        throw Error(Errc::contract, "distance matrix is not square");
    }
    if (!d.allFinite()) {
        throw Error(Errc::contract, "distance matrix has non-finite entries");
    }
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        for (Eigen::Index j = i; j < d.cols(); ++j) {
            if (d(i, j) < 0.0) {
                throw Error(Errc::contract, "negative distance at (" + std::to_string(i) + ", " +
                                                std::to_string(j) + ")");
            }
            const double tol = 1e-12 * std::max(1.0, std::abs(d(i, j)));
            if (std::abs(d(i, j) - d(j, i)) > tol) {
                throw Error(Errc::contract, "distance matrix is not symmetric at (" + std::to_string(i) + ", " +
                                                std::to_string(j) + ")");
            }
        }
    }
}

std::vector<double> compute_core_distances(const Eigen::MatrixXd& d, int min_samples) {
    const auto t = static_cast<std::size_t>(d.rows());
    // The point itself is its own first neighbour.
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(min_samples), t) - 1;
    std::vector<double> core(t);
    std::vector<double> row(t);
    for (std::size_t i = 0; i < t; ++i) {
        for (std::size_t j = 0; j < t; ++j) {
            row[j] = d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
        row[i] = 0.0;
        std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k), row.end());
        core[i] = row[k];
    }
    return core;
}

double mutual_reachability(const Eigen::MatrixXd& d, const std::vector<double>& core, std::size_t a, std::size_t b) {
    return std::max({core[a], core[b], d(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))});
}

// Prim's algorithm on the dense mutual-reachability graph; ties go to the
// lowest index.
std::vector<MstEdge> mutual_reachability_mst(const Eigen::MatrixXd& d, const std::vector<double>& core) {
    const std::size_t t = core.size();
    std::vector<MstEdge> edges;
    edges.reserve(t - 1);
    std::vector<bool> in_tree(t, false);
    std::vector<double> best(t, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> from(t, 0);
    std::size_t current = 0;
    in_tree[0] = true;
    for (std::size_t added = 1; added < t; ++added) {
        std::size_t next = t;
        for (std::size_t v = 0; v < t; ++v) {
            if (in_tree[v]) {
                continue;
            }
            const double w = mutual_reachability(d, core, current, v);
            if (w < best[v]) {
                best[v] = w;
                from[v] = current;
            }
            if (next == t || best[v] < best[next]) {
                next = v;
            }
        }
        in_tree[next] = true;
        edges.push_back({from[next], next, best[next]});
        current = next;
    }
    std::stable_sort(edges.begin(), edges.end(), [](const MstEdge& x, const MstEdge& y) { return x.weight < y.weight; });
    return edges;
}

struct LinkageNode {
    std::size_t left;
    std::size_t right;
    double distance;
    std::size_t size;
};

// Single-linkage dendrogram: leaves are 0..T-1, merge k creates node T+k.
std::vector<LinkageNode> single_linkage(const std::vector<MstEdge>& sorted_edges, std::size_t t) {
    std::vector<std::size_t> parent(2 * t - 1);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    std::vector<std::size_t> size(2 * t - 1, 1);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    std::vector<LinkageNode> nodes;
    nodes.reserve(t - 1);
    for (const auto& e : sorted_edges) {
        const std::size_t ra = find(e.a);
        const std::size_t rb = find(e.b);
        const std::size_t id = t + nodes.size();
        nodes.push_back({ra, rb, e.weight, size[ra] + size[rb]});
        size[id] = size[ra] + size[rb];
        parent[ra] = id;
        parent[rb] = id;
    }
    return nodes;
}

CondensedTree condense(const std::vector<LinkageNode>& nodes, std::size_t t, std::size_t min_cluster_size) {
    CondensedTree tree;
    tree.point_cluster.assign(t, 0);
    tree.point_lambda.assign(t, 0.0);
    tree.clusters.push_back({});
    tree.clusters[0].size = t;

    auto node_size = [&](std::size_t id) { return id < t ? std::size_t{1} : nodes[id - t].size; };
    auto drop_subtree = [&](std::size_t id, int cluster, double lambda) {
        std::vector<std::size_t> stack{id};
        while (!stack.empty()) {
            const std::size_t n = stack.back();
            stack.pop_back();
            if (n < t) {
                tree.point_cluster[n] = cluster;
                tree.point_lambda[n] = lambda;
            } else {
                stack.push_back(nodes[n - t].left);
                stack.push_back(nodes[n - t].right);
            }
        }
    };

    // Breadth-first from the root so that child clusters get larger ids.
    std::vector<std::pair<std::size_t, int>> queue{{2 * t - 2, 0}};
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const auto [id, cluster] = queue[head];
        if (id < t) {
            // A lone point still attached when its cluster bottoms out.
            continue;
        }
        const auto& node = nodes[id - t];
        const double lambda = to_lambda(node.distance);
        const std::size_t left_size = node_size(node.left);
        const std::size_t right_size = node_size(node.right);
        const bool left_big = left_size >= min_cluster_size;
        const bool right_big = right_size >= min_cluster_size;
        if (left_big && right_big) {
            for (const auto& [child, child_size] : {std::pair{node.left, left_size}, std::pair{node.right, right_size}}) {
                const int c = static_cast<int>(tree.clusters.size());
                tree.clusters.push_back({cluster, lambda, child_size, {}, 0.0});
                tree.clusters[static_cast<std::size_t>(cluster)].children.push_back(c);
                queue.emplace_back(child, c);
            }
        } else {
            if (!left_big) {
                drop_subtree(node.left, cluster, lambda);
            } else {
                queue.emplace_back(node.left, cluster);
            }
            if (!right_big) {
                drop_subtree(node.right, cluster, lambda);
            } else {
                queue.emplace_back(node.right, cluster);
            }
        }
    }

    for (std::size_t p = 0; p < t; ++p) {
        auto& c = tree.clusters[static_cast<std::size_t>(tree.point_cluster[p])];
        c.stability += tree.point_lambda[p] - c.birth;
    }
    for (auto& c : tree.clusters) {
        for (int child : c.children) {
            const auto& k = tree.clusters[static_cast<std::size_t>(child)];
            c.stability += (k.birth - c.birth) * static_cast<double>(k.size);
        }
    }
    return tree;
}

// Excess-of-mass selection; returns selected cluster ids.
std::vector<int> select_clusters(CondensedTree& tree, bool allow_single_cluster) {
    const auto n = tree.clusters.size();
    std::vector<bool> selected(n, true);
    std::vector<double> stability(n);
    for (std::size_t c = 0; c < n; ++c) {
        stability[c] = tree.clusters[c].stability;
    }
    const std::size_t last = allow_single_cluster ? 0 : 1;
    if (!allow_single_cluster) {
        selected[0] = false;
    }
    for (std::size_t c = n; c-- > last;) {
        double subtree = 0.0;
        for (int k : tree.clusters[c].children) {
            subtree += stability[static_cast<std::size_t>(k)];
        }
        if (!tree.clusters[c].children.empty() && subtree > stability[c]) {
            selected[c] = false;
            stability[c] = subtree;
        } else {
            std::vector<int> stack(tree.clusters[c].children.begin(), tree.clusters[c].children.end());
            while (!stack.empty()) {
                const auto k = static_cast<std::size_t>(stack.back());
                stack.pop_back();
                selected[k] = false;
                stack.insert(stack.end(), tree.clusters[k].children.begin(), tree.clusters[k].children.end());
            }
        }
    }
    std::vector<int> out;
    for (std::size_t c = 0; c < n; ++c) {
        if (selected[c]) {
            out.push_back(static_cast<int>(c));
        }
    }
    return out;
}

} // namespace

ClusterParams ClusterParams::defaults_for(std::size_t snapshots) {
    ClusterParams p;
    p.min_cluster_size = std::max(2, static_cast<int>(snapshots / 5));
    return p;
}

void ClusterParams::validate() const {
    if (min_cluster_size < 2) {
        throw Error(Errc::config, "min_cluster_size must be at least 2");
    }
    if (min_samples < 0) {
        throw Error(Errc::config, "min_samples must be non-negative");
    }
}

int ClusterAssignment::cluster_count() const {
    int top = kNoise;
    for (int l : labels) {
        top = std::max(top, l);
    }
    return top + 1;
}

std::vector<std::size_t> ClusterAssignment::members(int label) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) {
            out.push_back(i);
        }
    }
    return out;
}

HdbscanModel HdbscanModel::fit(const DistanceMatrix& distances, const ClusterParams& params) {
    params.validate();
    validate_distances(distances);
    const std::size_t t = distances.size();
    if (t < 2) {
        throw Error(Errc::insufficient_data, "clustering needs at least 2 snapshots");
    }

    HdbscanModel model;
    model.params_ = params;
    model.core_ = compute_core_distances(distances.d, params.effective_min_samples());
    const auto mst = mutual_reachability_mst(distances.d, model.core_);
    const auto mcs = static_cast<std::size_t>(params.min_cluster_size);
    auto tree = condense(single_linkage(mst, t), t, mcs);

    auto& out = model.assignment_;
    out.snapshot_timestamps = distances.snapshot_timestamps;
    if (out.snapshot_timestamps.size() != t) {
        out.snapshot_timestamps.assign(t, 0);
    }
    out.labels.assign(t, kNoise);
    out.probabilities.assign(t, 0.0);

    std::vector<int> chosen;
    if (t < 2 * mcs) {
        out.warnings.push_back("only " + std::to_string(t) + " snapshots for min_cluster_size " + std::to_string(mcs) +
                               "; returning a single cluster");
    } else {
        chosen = select_clusters(tree, params.allow_single_cluster);
        if (chosen.empty()) {
            // The usual outcome on fault-free data.
            out.warnings.push_back("condensed tree never splits; returning a single cluster");
            spdlog::info("cluster: {}", out.warnings.back());
        }
    }
    model.single_root_ = chosen.empty() || (chosen.size() == 1 && chosen.front() == 0);
    if (t < 2 * mcs) {
        spdlog::warn("cluster: {}", out.warnings.back());
    }

    // Map each condensed cluster to the selected cluster at or above it.
    std::vector<int> owner(tree.clusters.size(), -1);
    if (model.single_root_) {
        std::fill(owner.begin(), owner.end(), 0);
    } else {
        for (int c : chosen) {
            owner[static_cast<std::size_t>(c)] = c;
        }
        for (std::size_t c = 1; c < tree.clusters.size(); ++c) {
            // Parents precede children, so the owner of the parent is final.
            const int parent = tree.clusters[c].parent;
            if (owner[c] < 0 && parent >= 0) {
                owner[c] = owner[static_cast<std::size_t>(parent)];
            }
        }
    }

    // Output labels in order of first appearance in time.
    std::vector<int> relabel(tree.clusters.size(), kNoise);
    int next_label = 0;
    for (std::size_t p = 0; p < t; ++p) {
        const int o = owner[static_cast<std::size_t>(tree.point_cluster[p])];
        if (o < 0) {
            continue;
        }
        if (relabel[static_cast<std::size_t>(o)] == kNoise) {
            relabel[static_cast<std::size_t>(o)] = next_label++;
        }
        out.labels[p] = relabel[static_cast<std::size_t>(o)];
    }

    const auto n_labels = static_cast<std::size_t>(next_label);
    model.max_lambda_.assign(n_labels, 0.0);
    model.radius_.assign(n_labels, 0.0);
    for (std::size_t p = 0; p < t; ++p) {
        if (out.labels[p] != kNoise) {
            auto& m = model.max_lambda_[static_cast<std::size_t>(out.labels[p])];
            m = std::max(m, tree.point_lambda[p]);
        }
    }
    for (std::size_t p = 0; p < t; ++p) {
        const int l = out.labels[p];
        if (l == kNoise) {
            continue;
        }
        const double max_lambda = model.max_lambda_[static_cast<std::size_t>(l)];
        const double lambda = tree.point_lambda[p];
        out.probabilities[p] =
            (max_lambda <= 0.0 || lambda >= kInfiniteLambda) ? 1.0 : std::min(lambda, max_lambda) / max_lambda;
    }

    if (model.single_root_) {
        double widest = 0.0;
        for (const auto& e : mst) {
            widest = std::max(widest, e.weight);
        }
        std::fill(model.radius_.begin(), model.radius_.end(), widest);
    } else {
        for (int c : chosen) {
            const int l = relabel[static_cast<std::size_t>(c)];
            if (l != kNoise) {
                model.radius_[static_cast<std::size_t>(l)] = 1.0 / tree.clusters[static_cast<std::size_t>(c)].birth;
            }
        }
    }
    return model;
}

Prediction HdbscanModel::predict(std::span<const double> distances) const {
    const std::size_t t = core_.size();
    if (distances.size() != t) {
        throw Error(Errc::dimension, "expected " + std::to_string(t) + " distances, got " +
                                         std::to_string(distances.size()));
    }
    for (double d : distances) {
        if (!(d >= 0.0) || !std::isfinite(d)) {
            throw Error(Errc::input, "distances must be finite and non-negative");
        }
    }
    std::vector<double> sorted(distances.begin(), distances.end());
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(params_.effective_min_samples()), t) - 1;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
    const double core_new = sorted[k];

    std::size_t nearest = t;
    double nearest_mr = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < t; ++p) {
        if (assignment_.labels[p] == kNoise) {
            continue;
        }
        const double mr = std::max({core_new, core_[p], distances[p]});
        if (mr < nearest_mr) {
            nearest_mr = mr;
            nearest = p;
        }
    }
    if (nearest == t) {
        return {};
    }
    const auto label = static_cast<std::size_t>(assignment_.labels[nearest]);
    const bool inside = single_root_ ? nearest_mr <= radius_[label] : nearest_mr < radius_[label];
    if (!inside) {
        return {};
    }
    const double lambda = to_lambda(nearest_mr);
    const double max_lambda = max_lambda_[label];
    const double prob =
        (max_lambda <= 0.0 || lambda >= kInfiniteLambda) ? 1.0 : std::min(lambda, max_lambda) / max_lambda;
    return {static_cast<int>(label), prob};
}

ClusterAssignment cluster(const DistanceMatrix& distances, const ClusterParams& params) {
    return HdbscanModel::fit(distances, params).assignment();
}

ChangePointReport detect_change(const ClusterAssignment& assignment, int persistence_run) {
    if (assignment.labels.empty()) {
        throw Error(Errc::precondition, "empty cluster assignment");
    }
    if (persistence_run < 1) {
        throw Error(Errc::config, "persistence_run must be at least 1");
    }
    ChangePointReport report;
    const auto& labels = assignment.labels;
    const auto first = std::find_if(labels.begin(), labels.end(), [](int l) { return l != kNoise; });
    if (first == labels.end()) {
        throw Error(Errc::no_signal, "every snapshot is noise");
    }
    report.pre_label = *first;

    std::optional<std::size_t> run_start;
    int run_length = 0;
    for (std::size_t t = 0; t < labels.size(); ++t) {
        const int l = labels[t];
        if (l == kNoise) {
            continue;
        }
        if (l == report.pre_label) {
            run_start.reset();
            run_length = 0;
            continue;
        }
        if (!run_start) {
            run_start = t;
        }
        if (++run_length >= persistence_run) {
            report.change_index = *run_start;
            report.post_label = labels[*run_start];
            if (*run_start < assignment.snapshot_timestamps.size()) {
                report.change_timestamp = assignment.snapshot_timestamps[*run_start];
            }
            break;
        }
    }
    return report;
}

Prediction score_new_snapshot(std::span<const double> new_graph_distances, const ClusterAssignment& assignment,
                              const HdbscanModel& model) {
    if (new_graph_distances.size() != assignment.size()) {
        throw Error(Errc::dimension, "expected " + std::to_string(assignment.size()) + " distances, got " +
                                         std::to_string(new_graph_distances.size()));
    }
    return model.predict(new_graph_distances);
}

void write_assignment_csv(const ClusterAssignment& assignment, std::ostream& out) {
    out << "timestamp,label,probability\n";
    char buf[64];
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), assignment.probabilities[i]);
        out << assignment.snapshot_timestamps[i] << ',' << assignment.labels[i] << ','
            << std::string_view(buf, static_cast<std::size_t>(end - buf)) << '\n';
    }
}

nlohmann::json to_json(const ChangePointReport& report) {
    if (!report.has_change()) {
        return {{"no_change", true}, {"pre_label", report.pre_label}};
    }
    nlohmann::json j{{"change_index", *report.change_index},
                     {"pre_label", report.pre_label},
                     {"post_label", report.post_label}};
    if (report.change_timestamp) {
        j["change_timestamp"] = *report.change_timestamp;
    }
    return j;
}

} // namespace fcadl
