#pragma once

// Independent reference computations for tests. Nothing here calls into the
// code paths it is used to check.

#include "abacode/common.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace abacode::oracle {

inline Matrix brute_inverse(const Matrix& m) {
    return m.fullPivLu().inverse();
}

/// (I + X^T X)^{-1} X^T r via a QR solve of the stacked least-squares system
/// [X; I] w = [r; 0].
inline Vector batch_ridge(const std::vector<Vector>& xs, const std::vector<double>& rs, std::size_t d) {
    const auto n = static_cast<Eigen::Index>(xs.size());
    const auto di = static_cast<Eigen::Index>(d);
    Matrix A = Matrix::Zero(n + di, di);
    Vector b = Vector::Zero(n + di);
    for (Eigen::Index i = 0; i < n; ++i) {
        A.row(i) = xs[static_cast<std::size_t>(i)].transpose();
        b[i] = rs[static_cast<std::size_t>(i)];
    }
    A.bottomRows(di) = Matrix::Identity(di, di);
    return A.colPivHouseholderQr().solve(b);
}

inline double max_abs(const Matrix& m) {
    return m.cwiseAbs().maxCoeff();
}

inline double rel_error(const Vector& got, const Vector& want) {
    return (got - want).norm() / std::max(1.0, want.norm());
}

/// Nearest-centroid index by an explicit distance loop.
inline std::size_t nearest_scan(const Matrix& centroids, const Vector& x) {
    std::size_t best = 0;
    double best_d = INFINITY;
    for (Eigen::Index j = 0; j < centroids.rows(); ++j) {
        double d = 0.0;
        for (Eigen::Index c = 0; c < centroids.cols(); ++c) {
            const double diff = centroids(j, c) - x[c];
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = static_cast<std::size_t>(j);
        }
    }
    return best;
}

/// Linear bandit with Bernoulli rewards of mean clip(mu_k^T x, 0, 1). Contexts
/// are sparse Dirichlet draws so the best arm varies strongly with x.
struct LinearBanditProblem {
    std::vector<Vector> mu;

    LinearBanditProblem(std::size_t d, std::size_t K, std::uint64_t seed) {
        Rng rng(seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (std::size_t k = 0; k < K; ++k)
            mu.push_back(Vector::NullaryExpr(static_cast<Eigen::Index>(d), [&](auto&&...) { return u(rng); }));
    }

    Vector context(Rng& rng) const {
        std::gamma_distribution<double> g(0.2, 1.0);
        Vector x(mu.front().size());
        do {
            for (Eigen::Index i = 0; i < x.size(); ++i)
                x[i] = g(rng);
        } while (x.sum() <= 0.0);
        return x / x.sum();
    }

    double mean(std::size_t arm, const Vector& x) const {
        return std::clamp(mu[arm].dot(x), 0.0, 1.0);
    }

    double best_mean(const Vector& x) const {
        double best = 0.0;
        for (std::size_t k = 0; k < mu.size(); ++k)
            best = std::max(best, mean(k, x));
        return best;
    }
};

} // namespace abacode::oracle
