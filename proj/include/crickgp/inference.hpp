#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crickgp/career.hpp"
#include "crickgp/common.hpp"
#include "crickgp/gp.hpp"
#include "crickgp/hazard.hpp"
#include "crickgp/nested.hpp"

namespace crickgp {

/// One point in parameter space. For the constant-ability model sigma, ell
/// and alpha are unused and z is empty.
struct ModelParams {
    double C = 0.3;
    double D = 0.15;
    double lambda = 25.0;
    double sigma = 0.2;
    double ell = 20.0;
    double alpha = 1.5;
    double psi = 1.0;
    double phi = 1.0;
    Eigen::VectorXd z;
};

inline constexpr int gp_model_scalars = 8;
inline constexpr int constant_model_dimension = 5;

namespace detail {

inline double clamp_unit_open(double u) {
    return std::min(std::max(u, 1e-12), 1.0 - 1e-12);
}

}  // namespace detail

/// Inverse-CDF map from the unit hypercube to the parameter vector
/// [C, D, lambda, sigma, ell, alpha, psi, phi, z_1..z_T]:
/// C ~ Beta(1,2), D ~ Beta(1,5), log lambda ~ N(log 25, 0.75^2),
/// log sigma ~ N(log 0.2, 1), log ell ~ N(log 20, 1), alpha ~ U(1,2),
/// log psi, log phi ~ N(0, 0.25^2), z_k ~ N(0,1).
/// Coordinates at exactly 0 or 1 are clamped into the open interval.
inline std::vector<double> prior_transform_vector(const std::vector<double>& u) {
    if (u.size() < static_cast<std::size_t>(gp_model_scalars) + 1)
        throw DataError("prior_transform_vector requires dimension T+8 with T >= 1");
    std::vector<double> v(u.size());
    const double u0 = detail::clamp_unit_open(u[0]);
    const double u1 = detail::clamp_unit_open(u[1]);
    v[0] = 1.0 - std::sqrt(1.0 - u0);
    v[1] = 1.0 - std::pow(1.0 - u1, 0.2);
    v[2] = std::exp(std::log(25.0) + 0.75 * normal_quantile(detail::clamp_unit_open(u[2])));
    v[3] = std::exp(std::log(0.2) + normal_quantile(detail::clamp_unit_open(u[3])));
    v[4] = std::exp(std::log(20.0) + normal_quantile(detail::clamp_unit_open(u[4])));
    v[5] = 1.0 + detail::clamp_unit_open(u[5]);
    v[6] = std::exp(0.25 * normal_quantile(detail::clamp_unit_open(u[6])));
    v[7] = std::exp(0.25 * normal_quantile(detail::clamp_unit_open(u[7])));
    for (std::size_t k = gp_model_scalars; k < u.size(); ++k)
        v[k] = normal_quantile(detail::clamp_unit_open(u[k]));
    return v;
}

/// Reduced parameterisation [C, D, lambda, psi, phi] for the constant-ability
/// model (mu2_t = lambda for every innings); priors unchanged.
inline std::vector<double> prior_transform_constant_vector(const std::vector<double>& u) {
    if (u.size() != static_cast<std::size_t>(constant_model_dimension))
        throw DataError("prior_transform_constant_vector requires dimension 5");
    std::vector<double> v(u.size());
    v[0] = 1.0 - std::sqrt(1.0 - detail::clamp_unit_open(u[0]));
    v[1] = 1.0 - std::pow(1.0 - detail::clamp_unit_open(u[1]), 0.2);
    v[2] = std::exp(std::log(25.0) + 0.75 * normal_quantile(detail::clamp_unit_open(u[2])));
    v[3] = std::exp(0.25 * normal_quantile(detail::clamp_unit_open(u[3])));
    v[4] = std::exp(0.25 * normal_quantile(detail::clamp_unit_open(u[4])));
    return v;
}

inline ModelParams params_from_vector(const std::vector<double>& v) {
    if (v.size() < static_cast<std::size_t>(gp_model_scalars) + 1)
        throw DataError("params_from_vector: vector shorter than T+8 with T >= 1");
    ModelParams p;
    p.C = v[0];
    p.D = v[1];
    p.lambda = v[2];
    p.sigma = v[3];
    p.ell = v[4];
    p.alpha = v[5];
    p.psi = v[6];
    p.phi = v[7];
    const auto T = static_cast<Eigen::Index>(v.size()) - gp_model_scalars;
    p.z = Eigen::Map<const Eigen::VectorXd>(v.data() + gp_model_scalars, T);
    return p;
}

inline ModelParams params_from_constant_vector(const std::vector<double>& v) {
    if (v.size() != static_cast<std::size_t>(constant_model_dimension))
        throw DataError("params_from_constant_vector: vector must have dimension 5");
    ModelParams p;
    p.C = v[0];
    p.D = v[1];
    p.lambda = v[2];
    p.sigma = 0.0;
    p.ell = 1.0;
    p.alpha = 1.0;
    p.psi = v[3];
    p.phi = v[4];
    p.z.resize(0);
    return p;
}

inline ModelParams prior_transform(const std::vector<double>& u) {
    return params_from_vector(prior_transform_vector(u));
}

inline NSProblem gp_model_problem(std::shared_ptr<const CareerRecord> career) {
    const int T = career->length();
    auto cache = std::make_shared<GPLatentTransform>();
    NSProblem prob;
    prob.dimension = T + gp_model_scalars;
    prob.prior_transform = [](const std::vector<double>& u) { return prior_transform_vector(u); };
    prob.log_likelihood = [career, cache, T](const std::vector<double>& v) {
        const GPHyper h{v[2], v[3], v[4], v[5]};
        Eigen::Map<const Eigen::VectorXd> z(v.data() + gp_model_scalars, T);
        const Eigen::ArrayXd mu2 = cache->mu2(z, h);
        return career_log_likelihood(*career,
                                     std::span<const double>(mu2.data(), static_cast<std::size_t>(T)),
                                     v[0], v[1], v[6], v[7]);
    };
    return prob;
}

inline NSProblem constant_model_problem(std::shared_ptr<const CareerRecord> career) {
    const int T = career->length();
    NSProblem prob;
    prob.dimension = constant_model_dimension;
    prob.prior_transform = [](const std::vector<double>& u) {
        return prior_transform_constant_vector(u);
    };
    prob.log_likelihood = [career, T](const std::vector<double>& v) {
        const std::vector<double> mu2(static_cast<std::size_t>(T), v[2]);
        return career_log_likelihood(*career, std::span<const double>(mu2.data(), mu2.size()),
                                     v[0], v[1], v[3], v[4]);
    };
    return prob;
}

struct FitConfig {
    int n_live = 200;
    int mh_steps = 100;
    long max_iterations = 1'000'000;
    std::uint64_t seed = 0;
    std::function<void(const NSProgress&)> progress;
};

inline NSConfig to_ns_config(const FitConfig& f) {
    NSConfig c;
    c.n_live = f.n_live;
    c.mh_steps = f.mh_steps;
    c.max_iterations = f.max_iterations;
    c.seed = f.seed;
    c.progress = f.progress;
    return c;
}

inline NSResult fit_player(const CareerRecord& career, const FitConfig& cfg) {
    validate(career);
    return run_nested_sampling(gp_model_problem(std::make_shared<CareerRecord>(career)),
                               to_ns_config(cfg));
}

inline NSResult fit_constant_model(const CareerRecord& career, const FitConfig& cfg) {
    validate(career);
    return run_nested_sampling(constant_model_problem(std::make_shared<CareerRecord>(career)),
                               to_ns_config(cfg));
}

struct IntervalSummary {
    double median = 0.0;
    double lo68 = 0.0, hi68 = 0.0;
    double lo95 = 0.0, hi95 = 0.0;
};

/// Sorts `values` in place and reads off the median and central intervals.
inline IntervalSummary make_interval(std::vector<double>& values) {
    if (values.empty()) throw DataError("make_interval: no values");
    std::sort(values.begin(), values.end());
    IntervalSummary s;
    s.median = sample_quantile(values, 0.5);
    s.lo68 = sample_quantile(values, 0.16);
    s.hi68 = sample_quantile(values, 0.84);
    s.lo95 = sample_quantile(values, 0.025);
    s.hi95 = sample_quantile(values, 0.975);
    return s;
}

struct TrajectorySummary {
    int T = 0;
    int horizon = 0;
    /// Neutral venue, team innings marginalised 50/50; length T + horizon.
    std::vector<IntervalSummary> nu;
    /// Observed venue/team-innings context; length T.
    std::vector<double> nu_known_median;
    std::vector<double> career_low_samples, career_high_samples;
    std::vector<int> argmin_samples, argmax_samples;  // 1-based innings indices
    IntervalSummary career_low, career_high, next_innings;
    double ess = 0.0;
    std::vector<std::string> warnings;
};

inline constexpr int summary_draw_count = 2000;

/// Per-draw posterior functionals of the fitted GP model: the ability curve
/// nu(t) over the career, conditional forecasts to T+max(horizon,1) (the
/// first forecast step doubles as the next-innings prediction), and per-draw
/// career extremes. Summaries are pointwise medians with central 68%/95%
/// intervals over 2000 equal-weight resampled draws.
inline TrajectorySummary summarise_trajectory(const CareerRecord& career, const NSResult& result,
                                              int horizon, std::uint64_t seed) {
    validate(career);
    if (horizon < 0) throw DataError("summarise_trajectory requires horizon >= 0");
    const int T = career.length();
    const int fc_len = std::max(horizon, 1);

    TrajectorySummary out;
    out.T = T;
    out.horizon = horizon;
    out.ess = effective_sample_size(result);
    if (out.ess < 100.0) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "low effective sample size: %.1f < 100", out.ess);
        out.warnings.emplace_back(buf);
    }

    Rng rng(derive_seed(seed, "trajectory-summary"));
    const std::vector<std::size_t> picks = posterior_resample(result, summary_draw_count, rng);
    const int n_draws = static_cast<int>(picks.size());

    std::vector<std::vector<double>> nu_cols(static_cast<std::size_t>(T + fc_len));
    std::vector<std::vector<double>> known_cols(static_cast<std::size_t>(T));
    for (auto& c : nu_cols) c.reserve(static_cast<std::size_t>(n_draws));
    for (auto& c : known_cols) c.reserve(static_cast<std::size_t>(n_draws));
    out.career_low_samples.reserve(static_cast<std::size_t>(n_draws));
    out.career_high_samples.reserve(static_cast<std::size_t>(n_draws));
    out.argmin_samples.reserve(static_cast<std::size_t>(n_draws));
    out.argmax_samples.reserve(static_cast<std::size_t>(n_draws));

    GPLatentTransform cache;
    for (int d = 0; d < n_draws; ++d) {
        const std::vector<double>& v = result.samples[picks[static_cast<std::size_t>(d)]].params;
        const ModelParams p = params_from_vector(v);
        const GPHyper h{p.lambda, p.sigma, p.ell, p.alpha};
        const Eigen::ArrayXd log_mu2 = cache.log_mu2(p.z, h);

        double low = std::numeric_limits<double>::infinity();
        double high = -std::numeric_limits<double>::infinity();
        int arg_low = 1, arg_high = 1;
        for (int t = 0; t < T; ++t) {
            const double mu2_t = detail::safe_exp(log_mu2(t));
            const double nu_t = expected_score_marginal(mu2_t, p.C, p.D, p.psi, p.phi);
            nu_cols[static_cast<std::size_t>(t)].push_back(nu_t);
            known_cols[static_cast<std::size_t>(t)].push_back(expected_score(
                ability_for_innings(career.innings[static_cast<std::size_t>(t)], mu2_t, p.C, p.D,
                                    p.psi, p.phi)));
            if (nu_t < low) {
                low = nu_t;
                arg_low = t + 1;
            }
            if (nu_t > high) {
                high = nu_t;
                arg_high = t + 1;
            }
        }
        out.career_low_samples.push_back(low);
        out.career_high_samples.push_back(high);
        out.argmin_samples.push_back(arg_low);
        out.argmax_samples.push_back(arg_high);

        const Eigen::VectorXd fc = conditional_forecast_log(log_mu2.matrix(), h, fc_len, rng);
        for (int k = 0; k < fc_len; ++k) {
            const double mu2_k = detail::safe_exp(fc(k));
            nu_cols[static_cast<std::size_t>(T + k)].push_back(
                expected_score_marginal(mu2_k, p.C, p.D, p.psi, p.phi));
        }
    }

    out.nu.resize(static_cast<std::size_t>(T + horizon));
    for (int t = 0; t < T + horizon; ++t)
        out.nu[static_cast<std::size_t>(t)] = make_interval(nu_cols[static_cast<std::size_t>(t)]);
    out.next_innings = make_interval(nu_cols[static_cast<std::size_t>(T)]);
    out.nu_known_median.resize(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        std::vector<double>& col = known_cols[static_cast<std::size_t>(t)];
        std::sort(col.begin(), col.end());
        out.nu_known_median[static_cast<std::size_t>(t)] = sample_quantile(col, 0.5);
    }
    {
        std::vector<double> lows = out.career_low_samples;
        std::vector<double> highs = out.career_high_samples;
        out.career_low = make_interval(lows);
        out.career_high = make_interval(highs);
    }
    return out;
}

struct RankEntry {
    std::string player_id;
    int innings = 0;
    double career_average = 0.0;
    double nu_next_median = 0.0;
    double ci68_lo = 0.0, ci68_hi = 0.0;
};

/// Descending by next-innings median; ties broken by narrower 68% interval,
/// then player id.
inline std::vector<RankEntry> rank_players(std::vector<RankEntry> entries) {
    std::stable_sort(entries.begin(), entries.end(), [](const RankEntry& a, const RankEntry& b) {
        if (a.nu_next_median != b.nu_next_median) return a.nu_next_median > b.nu_next_median;
        const double wa = a.ci68_hi - a.ci68_lo;
        const double wb = b.ci68_hi - b.ci68_lo;
        if (wa != wb) return wa < wb;
        return a.player_id < b.player_id;
    });
    return entries;
}

/// One posterior draw of a player's next-innings generative state.
struct PredictiveDraw {
    double mu2 = 25.0;
    double C = 0.3;
    double D = 0.15;
    double psi = 1.0;
    double phi = 1.0;
};

struct HeadToHeadResult {
    double prob_a_beats_b = 0.5;
    double mean_margin = 0.0;
};

/// Equal-weight next-innings generative states from a fit: for the GP model
/// every draw extends its trajectory by a one-step forecast; the constant
/// model uses lambda directly.
inline std::vector<PredictiveDraw> predictive_draws(const NSResult& result, bool constant_model,
                                                    std::uint64_t seed) {
    Rng rng(derive_seed(seed, "predictive-draws"));
    const std::vector<std::size_t> picks = posterior_resample(result, summary_draw_count, rng);
    GPLatentTransform cache;
    std::vector<PredictiveDraw> draws;
    draws.reserve(picks.size());
    for (std::size_t i : picks) {
        const std::vector<double>& v = result.samples[i].params;
        PredictiveDraw d;
        if (constant_model) {
            const ModelParams p = params_from_constant_vector(v);
            d = {p.lambda, p.C, p.D, p.psi, p.phi};
        } else {
            const ModelParams p = params_from_vector(v);
            const GPHyper h{p.lambda, p.sigma, p.ell, p.alpha};
            const Eigen::ArrayXd log_mu2 = cache.log_mu2(p.z, h);
            const Eigen::VectorXd fc = conditional_forecast_log(log_mu2.matrix(), h, 1, rng);
            d = {detail::safe_exp(fc(0)), p.C, p.D, p.psi, p.phi};
        }
        draws.push_back(d);
    }
    return draws;
}

/// Monte Carlo P(X_A > X_B) for the next innings at a neutral venue with a
/// fair team-innings coin, plus the mean run margin. One score is simulated
/// per posterior draw and all cross pairs are compared with ties split
/// evenly. Both players' simulations consume identical random streams, so
/// identical draw sets give probability exactly 1/2 and margin exactly 0.
inline HeadToHeadResult head_to_head(std::span<const PredictiveDraw> a,
                                     std::span<const PredictiveDraw> b, std::uint64_t seed) {
    if (a.empty() || b.empty()) throw DataError("head_to_head requires non-empty sample sets");
    const std::uint64_t stream = derive_seed(seed, "head-to-head");
    const auto simulate = [stream](std::span<const PredictiveDraw> draws) {
        Rng rng(stream);
        std::bernoulli_distribution first_innings(0.5);
        std::vector<double> scores;
        scores.reserve(draws.size());
        for (const PredictiveDraw& d : draws) {
            InningsAbility ab;
            ab.mu2 = d.mu2;
            ab.C = d.C;
            ab.D = d.D;
            ab.psi = d.psi;
            ab.phi = d.phi;
            ab.venue = 0;
            ab.team_innings = first_innings(rng) ? +1 : -1;
            scores.push_back(static_cast<double>(sample_score(ab, rng)));
        }
        return scores;
    };
    const std::vector<double> sa = simulate(a);
    std::vector<double> sb = simulate(b);

    double mean_a = 0.0, mean_b = 0.0;
    for (double x : sa) mean_a += x;
    for (double x : sb) mean_b += x;
    mean_a /= static_cast<double>(sa.size());
    mean_b /= static_cast<double>(sb.size());

    std::sort(sb.begin(), sb.end());
    KahanSum wins;
    for (double x : sa) {
        const auto lo = std::lower_bound(sb.begin(), sb.end(), x);
        const auto hi = std::upper_bound(lo, sb.end(), x);
        wins.add(static_cast<double>(lo - sb.begin()));
        wins.add(0.5 * static_cast<double>(hi - lo));
    }
    HeadToHeadResult r;
    r.prob_a_beats_b = wins.value() / (static_cast<double>(sa.size()) * static_cast<double>(sb.size()));
    r.mean_margin = mean_a - mean_b;
    return r;
}

}  // namespace crickgp
