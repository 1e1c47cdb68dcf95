#include "fcadl/embed.hpp"

#include "fcadl/error.hpp"
#include "fcadl/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>

namespace fcadl {
namespace {

std::vector<std::size_t> choose_landmarks(std::size_t t, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> idx(t);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto rng = make_engine(seed, 0x4C4D4453ULL);
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(uniform_index(rng, t - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace

Embedding2D lmds(const DistanceMatrix& distances, std::size_t n_landmarks, std::uint64_t rng_seed) {
    const std::size_t t = distances.size();
    if (n_landmarks < 3 || n_landmarks > t) {
        throw Error(Errc::input, "n_landmarks must lie in [3, " + std::to_string(t) + "], got " +
                                     std::to_string(n_landmarks));
    }
    Embedding2D out;
    out.landmark_indices = choose_landmarks(t, n_landmarks, rng_seed);
    out.coords = Eigen::MatrixX2d::Zero(static_cast<Eigen::Index>(t), 2);
    if ((distances.d.array() == 0.0).all()) {
        return out;
    }

    const auto k = static_cast<Eigen::Index>(n_landmarks);
    Eigen::MatrixXd sq(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index b = 0; b < k; ++b) {
            const double d = distances.d(static_cast<Eigen::Index>(out.landmark_indices[static_cast<std::size_t>(a)]),
                                         static_cast<Eigen::Index>(out.landmark_indices[static_cast<std::size_t>(b)]));
            sq(a, b) = d * d;
        }
    }
    const Eigen::VectorXd column_mean = sq.colwise().mean().transpose();
    const double grand_mean = column_mean.mean();
    // b = -1/2 J sq J without forming J.
    Eigen::MatrixXd b = -0.5 * ((sq.rowwise() - column_mean.transpose()).colwise() - column_mean);
    b.array() -= 0.5 * grand_mean;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b);
    if (eig.info() != Eigen::Success) {
        throw Error(Errc::numerical, "landmark eigendecomposition failed");
    }
    const Eigen::VectorXd& evals = eig.eigenvalues(); // ascending
    const double scale = std::max(std::abs(evals(0)), std::abs(evals(k - 1)));
    const double floor = 1e-10 * scale;
    if (!(evals(k - 1) > floor) || !(evals(k - 2) > floor)) {
        throw Error(Errc::degenerate_embedding,
                    "landmark geometry has fewer than 2 positive eigenvalues; try more landmarks");
    }

    // Rows of the pseudo-inverse transpose: v_i / sqrt(lambda_i).
    Eigen::Matrix<double, 2, Eigen::Dynamic> pinv(2, k);
    for (int c = 0; c < 2; ++c) {
        const double lambda = evals(k - 1 - c);
        Eigen::VectorXd v = eig.eigenvectors().col(k - 1 - c);
        // Sign convention: largest-magnitude component positive.
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) {
            v = -v;
        }
        pinv.row(c) = v.transpose() / std::sqrt(lambda);
    }

    Eigen::VectorXd delta(k);
    for (std::size_t p = 0; p < t; ++p) {
        for (Eigen::Index a = 0; a < k; ++a) {
            const double d = distances.d(static_cast<Eigen::Index>(p),
                                         static_cast<Eigen::Index>(out.landmark_indices[static_cast<std::size_t>(a)]));
            delta(a) = d * d;
        }
        out.coords.row(static_cast<Eigen::Index>(p)) = (-0.5 * pinv * (delta - column_mean)).transpose();
    }
    out.coords.rowwise() -= out.coords.colwise().mean();

    double num = 0.0, den = 0.0;
    for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index c = a + 1; c < k; ++c) {
            const auto pa = static_cast<Eigen::Index>(out.landmark_indices[static_cast<std::size_t>(a)]);
            const auto pc = static_cast<Eigen::Index>(out.landmark_indices[static_cast<std::size_t>(c)]);
            const double embedded = (out.coords.row(pa) - out.coords.row(pc)).squaredNorm();
            num += (sq(a, c) - embedded) * (sq(a, c) - embedded);
            den += sq(a, c) * sq(a, c);
        }
    }
    out.stress = den > 0.0 ? std::sqrt(num / den) : 0.0;
    return out;
}

void write_embedding_csv(const Embedding2D& embedding, const DistanceMatrix& distances,
                         const ClusterAssignment* assignment, std::ostream& out) {
    out << "timestamp,x,y,label\n";
    char bx[64], by[64];
    for (Eigen::Index i = 0; i < embedding.coords.rows(); ++i) {
        auto [ex, e1] = std::to_chars(bx, bx + sizeof(bx), embedding.coords(i, 0));
        auto [ey, e2] = std::to_chars(by, by + sizeof(by), embedding.coords(i, 1));
        const int label = assignment ? assignment->labels[static_cast<std::size_t>(i)] : kNoise;
        out << distances.snapshot_timestamps[static_cast<std::size_t>(i)] << ','
            << std::string_view(bx, static_cast<std::size_t>(ex - bx)) << ','
            << std::string_view(by, static_cast<std::size_t>(ey - by)) << ',' << label << '\n';
    }
}

} // namespace fcadl
