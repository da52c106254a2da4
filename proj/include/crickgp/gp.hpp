#pragma once

#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "crickgp/common.hpp"

namespace crickgp {

/// Hyperparameters of the powered-exponential process on log mu2:
/// K(j,k) = sigma^2 exp(-|j-k|^alpha / ell^alpha), mean log(lambda).
struct GPHyper {
    double lambda = 25.0;
    double sigma = 0.2;
    double ell = 20.0;
    double alpha = 1.5;
};

inline void validate(const GPHyper& h) {
    if (!(h.lambda > 0.0 && h.sigma > 0.0 && h.ell > 0.0))
        throw DataError("GP hyperparameters lambda, sigma, ell must be positive");
    if (!(h.alpha >= 1.0 && h.alpha <= 2.0)) throw DataError("GP alpha must lie in [1,2]");
}

namespace detail {

/// Unit-scale covariance exp(-(d/ell)^alpha), filled by diagonals so the
/// matrix is exactly symmetric and stationary.
inline Eigen::MatrixXd unit_covariance(int T, double ell, double alpha) {
    Eigen::VectorXd by_gap(T);
    by_gap(0) = 1.0;
    for (int d = 1; d < T; ++d)
        by_gap(d) = std::exp(-std::pow(static_cast<double>(d) / ell, alpha));
    Eigen::MatrixXd K(T, T);
    for (int j = 0; j < T; ++j)
        for (int k = 0; k < T; ++k) K(j, k) = by_gap(std::abs(j - k));
    return K;
}

inline constexpr double chol_jitter_start = 1e-8;
inline constexpr double chol_jitter_max = 1e-4;

/// O(T^2) Schur-algorithm Cholesky of a symmetric positive-definite Toeplitz
/// matrix given its first column. Returns false (leaving L unspecified) when
/// a hyperbolic pivot shows the matrix is not comfortably positive definite;
/// callers escalate the jitter or fall back to the dense factorisation.
inline bool toeplitz_cholesky(const Eigen::VectorXd& c, Eigen::MatrixXd& L) {
    const int n = static_cast<int>(c.size());
    if (!(c(0) > 0.0)) return false;
    L.setZero(n, n);
    Eigen::VectorXd x = c / std::sqrt(c(0));
    Eigen::VectorXd y = x;
    y(0) = 0.0;
    L.col(0) = x;
    for (int k = 1; k < n; ++k) {
        for (int i = n - 1; i >= k; --i) x(i) = x(i - 1);
        const double rho = y(k) / x(k);
        if (!std::isfinite(rho) || std::abs(rho) >= 1.0 - 1e-10) return false;
        const double s = 1.0 / std::sqrt((1.0 - rho) * (1.0 + rho));
        for (int i = k; i < n; ++i) {
            const double xi = (x(i) - rho * y(i)) * s;
            const double yi = (y(i) - rho * x(i)) * s;
            x(i) = xi;
            y(i) = yi;
        }
        L.col(k).tail(n - k) = x.tail(n - k);
    }
    return true;
}

/// Cholesky of K + jitter*diag_scale*I, escalating the jitter by decades up
/// to the cap. diag_scale is the diagonal value of K (sigma^2, or 1 for the
/// unit-scale matrix).
inline Eigen::MatrixXd jittered_cholesky(const Eigen::MatrixXd& K, double diag_scale) {
    for (double jitter = chol_jitter_start; jitter <= chol_jitter_max * 1.0001; jitter *= 10.0) {
        Eigen::MatrixXd work = K;
        work.diagonal().array() += jitter * diag_scale;
        Eigen::LLT<Eigen::MatrixXd> llt(work);
        if (llt.info() == Eigen::Success) return llt.matrixL();
    }
    std::ostringstream msg;
    msg << "Cholesky factorisation failed for " << K.rows() << "x" << K.cols()
        << " covariance (diagonal " << K(0, 0) << ") even with jitter " << chol_jitter_max;
    throw NumericalError(msg.str());
}

/// Jittered factor of the unit-scale covariance, exploiting its Toeplitz
/// structure; falls back to the dense path when the fast algorithm balks.
inline Eigen::MatrixXd jittered_unit_cholesky(int T, double ell, double alpha) {
    Eigen::VectorXd c(T);
    c(0) = 1.0;
    for (int d = 1; d < T; ++d)
        c(d) = std::exp(-std::pow(static_cast<double>(d) / ell, alpha));
    Eigen::MatrixXd L;
    for (double jitter = chol_jitter_start; jitter <= chol_jitter_max * 1.0001; jitter *= 10.0) {
        Eigen::VectorXd cj = c;
        cj(0) += jitter;
        if (toeplitz_cholesky(cj, L)) return L;
    }
    return jittered_cholesky(unit_covariance(T, ell, alpha), 1.0);
}

}  // namespace detail

inline Eigen::MatrixXd covariance_matrix(int T, const GPHyper& h) {
    if (T < 1) throw DataError("covariance_matrix requires T >= 1");
    return h.sigma * h.sigma * detail::unit_covariance(T, h.ell, h.alpha);
}

/// Lower-triangular factor with L L^T = K + jitter*I, jitter starting at
/// 1e-8 * K(0,0) and escalated by decades to 1e-4 * K(0,0) on failure.
inline Eigen::MatrixXd chol_factor(const Eigen::MatrixXd& K) {
    return detail::jittered_cholesky(K, K(0, 0));
}

/// Whitened latent -> per-innings peak abilities:
/// mu2 = exp(log(lambda) + L_c z). The log-scale values are capped at 700
/// so extreme prior tails stay finite.
inline Eigen::ArrayXd latent_to_mu2(const Eigen::VectorXd& z, const GPHyper& h) {
    const Eigen::MatrixXd L = chol_factor(covariance_matrix(static_cast<int>(z.size()), h));
    Eigen::ArrayXd log_mu2 = (std::log(h.lambda) + (L * z).array()).min(700.0);
    return log_mu2.exp();
}

/// Per-fit cache: the unit-scale factor depends only on (T, ell, alpha), and
/// sigma enters as a pure scaling, so Metropolis moves that leave ell and
/// alpha untouched skip the O(T^3) refactorisation. Two slots are kept so a
/// rejected proposal does not evict the factor of the current state.
class GPLatentTransform {
  public:
    const Eigen::MatrixXd& unit_factor(int T, double ell, double alpha) {
        for (const Slot& s : slots_)
            if (s.T == T && s.ell == ell && s.alpha == alpha) return s.L;
        Slot& victim = slots_[next_];
        next_ = 1 - next_;
        victim.L = detail::jittered_unit_cholesky(T, ell, alpha);
        victim.T = T;
        victim.ell = ell;
        victim.alpha = alpha;
        return victim.L;
    }

    Eigen::ArrayXd log_mu2(const Eigen::VectorXd& z, const GPHyper& h) {
        const Eigen::MatrixXd& L = unit_factor(static_cast<int>(z.size()), h.ell, h.alpha);
        return (std::log(h.lambda) + h.sigma * (L * z).array()).min(700.0);
    }

    Eigen::ArrayXd mu2(const Eigen::VectorXd& z, const GPHyper& h) { return log_mu2(z, h).exp(); }

  private:
    struct Slot {
        int T = -1;
        double ell = 0.0, alpha = 0.0;
        Eigen::MatrixXd L;
    };
    Slot slots_[2];
    int next_ = 0;
};

/// Gaussian log-density of realised log mu2 under GP(log lambda, K); used by
/// the whitening-consistency checks.
inline double gp_log_density(const Eigen::VectorXd& log_mu2, const GPHyper& h) {
    const int T = static_cast<int>(log_mu2.size());
    const Eigen::MatrixXd L = chol_factor(covariance_matrix(T, h));
    const Eigen::VectorXd centred = log_mu2.array() - std::log(h.lambda);
    const Eigen::VectorXd white = L.triangularView<Eigen::Lower>().solve(centred);
    return -0.5 * white.squaredNorm() - L.diagonal().array().log().sum() -
           0.5 * T * std::log(2.0 * M_PI);
}

/// Draw log mu2 at indices T+1 .. T+horizon from the GP conditional on the
/// realised values at 1..T (same hyperparameters throughout).
template <class RngT>
Eigen::VectorXd conditional_forecast_log(const Eigen::VectorXd& log_mu2_realised, const GPHyper& h,
                                         int horizon, RngT& rng) {
    const int T = static_cast<int>(log_mu2_realised.size());
    if (horizon < 1) return Eigen::VectorXd(0);

    const Eigen::MatrixXd K_full = covariance_matrix(T + horizon, h);
    const Eigen::MatrixXd K11 = K_full.topLeftCorner(T, T);
    const Eigen::MatrixXd K12 = K_full.topRightCorner(T, horizon);
    const Eigen::MatrixXd K22 = K_full.bottomRightCorner(horizon, horizon);

    const Eigen::MatrixXd L = detail::jittered_cholesky(K11, K11(0, 0));
    const double mean_log = std::log(h.lambda);
    const Eigen::VectorXd centred = log_mu2_realised.array() - mean_log;
    const Eigen::VectorXd white = L.triangularView<Eigen::Lower>().solve(centred);
    const Eigen::MatrixXd A = L.triangularView<Eigen::Lower>().solve(K12);  // T x horizon

    const Eigen::VectorXd cond_mean =
        Eigen::VectorXd::Constant(horizon, mean_log) + A.transpose() * white;
    const Eigen::MatrixXd cond_cov = K22 - A.transpose() * A;
    const Eigen::MatrixXd Lc = detail::jittered_cholesky(cond_cov, K22(0, 0));

    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd eta(horizon);
    for (int i = 0; i < horizon; ++i) eta(i) = gauss(rng);
    return cond_mean + Lc * eta;
}

/// Forecast in ability units, conditioning on the trajectory implied by the
/// whitened latents.
template <class RngT>
Eigen::ArrayXd conditional_forecast(const Eigen::VectorXd& z, const GPHyper& h, int horizon,
                                    RngT& rng) {
    const Eigen::MatrixXd L = chol_factor(covariance_matrix(static_cast<int>(z.size()), h));
    const Eigen::VectorXd log_mu2 = (std::log(h.lambda) + (L * z).array()).matrix();
    return conditional_forecast_log(log_mu2, h, horizon, rng).array().min(700.0).exp();
}

}  // namespace crickgp
