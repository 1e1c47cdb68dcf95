#pragma once

#include "fcadl/clustering.hpp"
#include "fcadl/deltacon.hpp"
#include "fcadl/fc_graph.hpp"
#include "fcadl/kvconfig.hpp"
#include "fcadl/random.hpp"
#include "fcadl/synthgen.hpp"
#include "fcadl/timeseries.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace fcadl::test {

inline MetricPanel panel_from(const Eigen::MatrixXd& values, std::int64_t period = 5, Timestamp start = 1'000) {
    MetricPanel p;
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
        p.service_ids.push_back("s" + std::to_string(100 + c));
    }
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        p.timestamps.push_back(start + r * period);
    }
    p.values = values;
    p.sampling_period = period;
    return p;
}

inline Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    auto rng = make_engine(seed, 99);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = gaussian(rng);
        }
    }
    return m;
}

// Symmetric weights in [0.1, 1] with the given edge density, zero diagonal.
inline Eigen::MatrixXd random_graph(Eigen::Index n, double density, std::uint64_t seed) {
    auto rng = make_engine(seed, 7);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (uniform01(rng) < density) {
                a(i, j) = a(j, i) = uniform(rng, 0.1, 1.0);
            }
        }
    }
    return a;
}

inline FcGraph graph_from(const Eigen::MatrixXd& w) {
    FcGraph g;
    std::vector<std::string> ids;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        ids.push_back("v" + std::to_string(i));
    }
    g.service_ids = std::make_shared<const std::vector<std::string>>(std::move(ids));
    g.weights = w;
    return g;
}

// Three-pass definitional weighted correlation.
inline double oracle_weighted_corr(const std::vector<double>& x, const std::vector<double>& y, double theta) {
    const std::size_t n = x.size();
    std::vector<long double> w(n);
    long double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = std::exp(static_cast<long double>(static_cast<double>(i) - static_cast<double>(n) + 1.0) / theta);
        total += w[i];
    }
    long double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += w[i] / total * x[i];
        my += w[i] / total * y[i];
    }
    long double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const long double wi = w[i] / total;
        sxy += wi * (x[i] - mx) * (y[i] - my);
        sxx += wi * (x[i] - mx) * (x[i] - mx);
        syy += wi * (y[i] - my) * (y[i] - my);
    }
    return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

inline double oracle_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

// Definitional root-Euclidean distance over every (i, j).
inline double oracle_rooted_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            const double d = std::sqrt(std::max(0.0, a(i, j))) - std::sqrt(std::max(0.0, b(i, j)));
            sum += d * d;
        }
    }
    return std::sqrt(sum);
}

inline KvConfig kv(const std::string& text) {
    std::istringstream in(text);
    return KvConfig::parse(in);
}

inline Scenario scenario(const std::string& text, std::uint64_t seed) {
    return generate(scenario_from_config(kv(text), seed));
}

inline DistanceMatrix distances_of(const Eigen::MatrixXd& d) {
    DistanceMatrix dm;
    dm.d = d;
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        dm.snapshot_timestamps.push_back(1'000 + i);
    }
    return dm;
}

inline std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index c) {
    return {m.col(c).data(), m.col(c).data() + m.rows()};
}

} // namespace fcadl::test
