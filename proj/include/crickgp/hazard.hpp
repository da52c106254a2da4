#pragma once

#include <cmath>
#include <span>

#include "crickgp/career.hpp"
#include "crickgp/common.hpp"

namespace crickgp {

/// Ability state for one innings. mu1 = C*mu2 is the starting ability,
/// L = D*mu2 the e-folding length of the transition to the peak mu2, and the
/// venue/team-innings multipliers psi^venue * phi^team_innings scale the
/// whole curve. venue and team_innings are the signed indicator values; 0
/// means neutral/unknown and contributes no multiplier.
struct InningsAbility {
    double mu2 = 25.0;
    double C = 0.3;
    double D = 0.15;
    double psi = 1.0;
    double phi = 1.0;
    int venue = 0;
    int team_innings = 0;
};

inline void validate(const InningsAbility& a) {
    if (!(a.mu2 > 0.0)) throw DataError("mu2 must be positive");
    if (!(a.C > 0.0 && a.C < 1.0)) throw DataError("C must lie in (0,1)");
    if (!(a.D > 0.0 && a.D < 1.0)) throw DataError("D must lie in (0,1)");
    if (!(a.psi > 0.0 && a.phi > 0.0)) throw DataError("psi and phi must be positive");
    if (a.venue < -1 || a.venue > 1) throw DataError("venue indicator must be -1, 0 or +1");
    if (a.team_innings < -1 || a.team_innings > 1)
        throw DataError("team innings indicator must be -1, 0 or +1");
}

namespace detail {

inline double signed_power(double base, int exponent) {
    if (exponent > 0) return base;
    if (exponent < 0) return 1.0 / base;
    return 1.0;
}

/// Caps exp() so extreme prior-tail abilities stay finite; mu/(1+mu) then
/// evaluates to exactly 1 instead of NaN.
inline double safe_exp(double x) { return std::exp(x < 700.0 ? x : 700.0); }

}  // namespace detail

inline double context_multiplier(const InningsAbility& a) {
    return detail::signed_power(a.psi, a.venue) * detail::signed_power(a.phi, a.team_innings);
}

/// Effective average on score x: the ability curve transitions from C*mu2 at
/// x=0 towards mu2 with e-folding length L = D*mu2, scaled by the context
/// multiplier.
inline double effective_average(int x, const InningsAbility& a) {
    const double L = a.D * a.mu2;
    const double arg = static_cast<double>(x) / L;
    const double decay = (x >= 1 && arg > 700.0) ? 0.0 : std::exp(-arg);
    return (a.mu2 + (a.C * a.mu2 - a.mu2) * decay) * context_multiplier(a);
}

/// Dismissal probability on score x given effective average mu.
inline double hazard(double mu) { return 1.0 / (mu + 1.0); }

namespace detail {

/// Iterates mu(x) = m * (1 + (C-1) * r^x) without calling exp per score;
/// r = exp(-1/L) so r^x tracks the transition decay.
struct HazardWalker {
    double m;  // limiting effective average mu2 * multiplier
    double cm1;
    double r;
    double q = 1.0;

    HazardWalker(const InningsAbility& a)
        : m(a.mu2 * context_multiplier(a)), cm1(a.C - 1.0) {
        const double inv_L = 1.0 / (a.D * a.mu2);
        r = inv_L > 745.0 ? 0.0 : std::exp(-inv_L);
    }

    double mu() const { return m * (1.0 + cm1 * q); }
    void advance() { q *= r; }
};

}  // namespace detail

/// Log-likelihood of a single innings: log H(x) + sum log[1 - H(a)] when
/// dismissed on x, or the log survival probability log P(X >= y) when not
/// out on y. Survival products are accumulated in log space (flushed in
/// chunks) so scores in the hundreds cannot underflow.
inline double innings_log_likelihood(int runs, bool dismissed, const InningsAbility& a) {
    detail::HazardWalker walk(a);
    double log_acc = 0.0;
    double prod = 1.0;
    for (int score = 0; score < runs; ++score) {
        const double mu = walk.mu();
        prod *= mu < 1e300 ? mu / (1.0 + mu) : 1.0;
        if (prod < 1e-280) {
            log_acc += std::log(prod);
            prod = 1.0;
        }
        walk.advance();
    }
    log_acc += std::log(prod);
    if (dismissed) {
        const double mu = walk.mu();
        log_acc -= mu < 1e300 ? std::log1p(mu) : std::log(mu);
    }
    return log_acc;
}

inline double innings_log_likelihood(const InningsRecord& rec, const InningsAbility& a) {
    return innings_log_likelihood(rec.runs, rec.dismissed, a);
}

/// log P(X = x): the score pmf implied by the hazard curve.
inline double log_score_pmf(int x, const InningsAbility& a) {
    return innings_log_likelihood(x, true, a);
}

/// log P(X >= y): the right-censored (not out) likelihood.
inline double log_survival(int y, const InningsAbility& a) {
    return innings_log_likelihood(y, false, a);
}

inline InningsAbility ability_for_innings(const InningsRecord& rec, double mu2, double C, double D,
                                          double psi, double phi) {
    return InningsAbility{mu2,
                          C,
                          D,
                          psi,
                          phi,
                          static_cast<int>(rec.venue),
                          static_cast<int>(rec.team_innings)};
}

/// Full-career log-likelihood: each innings uses its own mu2 (one per career
/// innings) with the shared C, D, psi, phi and that innings' context.
inline double career_log_likelihood(const CareerRecord& career, std::span<const double> mu2,
                                    double C, double D, double psi, double phi) {
    if (mu2.size() != career.innings.size())
        throw DataError("career_log_likelihood: need one mu2 per innings");
    double total = 0.0;
    for (std::size_t t = 0; t < mu2.size(); ++t) {
        const auto& rec = career.innings[t];
        total += innings_log_likelihood(rec, ability_for_innings(rec, mu2[t], C, D, psi, phi));
    }
    return total;
}

inline constexpr double survival_truncation = 1e-12;
inline constexpr long expected_score_max_terms = 2'000'000;

/// Expected runs E[X] = sum_{x>=0} P(X > x), summed until the survival
/// probability falls below the truncation threshold, plus the analytic
/// geometric tail S(x_cut) * mu_inf (the hazard converges to 1/(mu_inf + 1),
/// so the tail is geometric in the limit).
inline double expected_score(const InningsAbility& a) {
    detail::HazardWalker walk(a);
    double survival = 1.0;
    double total = 0.0;
    for (long x = 0; x < expected_score_max_terms; ++x) {
        const double mu = walk.mu();
        survival *= mu < 1e300 ? mu / (1.0 + mu) : 1.0;
        total += survival;
        if (survival < survival_truncation) return total + survival * walk.m;
        walk.advance();
    }
    throw NumericalError("expected_score did not converge (effective average too large)");
}

/// nu(t) in the default reporting convention: neutral venue, team innings
/// marginalised 50/50.
inline double expected_score_marginal(double mu2, double C, double D, double psi, double phi) {
    const InningsAbility first{mu2, C, D, psi, phi, 0, +1};
    const InningsAbility second{mu2, C, D, psi, phi, 0, -1};
    return 0.5 * expected_score(first) + 0.5 * expected_score(second);
}

/// Draw one score from the innings distribution by sequential dismissal.
template <class RngT>
int sample_score(const InningsAbility& a, RngT& rng) {
    detail::HazardWalker walk(a);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (long x = 0; x < expected_score_max_terms; ++x) {
        const double mu = walk.mu();
        if (unif(rng) < hazard(mu)) return static_cast<int>(x);
        walk.advance();
    }
    throw NumericalError("sample_score did not terminate (effective average too large)");
}

}  // namespace crickgp
