#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crickgp/career.hpp"
#include "crickgp/common.hpp"
#include "crickgp/gp.hpp"
#include "crickgp/hazard.hpp"
#include "crickgp/inference.hpp"
#include "crickgp/nested.hpp"
#include "crickgp/parallel.hpp"

namespace crickgp {

/// Runs per dismissal over the most recent ceil(window_fraction * T)
/// innings. A window with no dismissal expands backward until it contains
/// one; a career with no dismissal at all returns total runs (divisor 1).
inline double sma_predict(const CareerRecord& career, double window_fraction) {
    validate(career);
    if (!(window_fraction > 0.0 && window_fraction <= 1.0))
        throw DataError("sma_predict: window_fraction must lie in (0,1]");
    const int T = career.length();
    int window = static_cast<int>(std::ceil(window_fraction * T - 1e-9));
    window = std::min(std::max(window, 1), T);
    int start = T - window;
    long runs = 0;
    int dismissals = 0;
    for (int t = start; t < T; ++t) {
        runs += career.innings[static_cast<std::size_t>(t)].runs;
        dismissals += career.innings[static_cast<std::size_t>(t)].dismissed ? 1 : 0;
    }
    while (dismissals == 0 && start > 0) {
        --start;
        runs += career.innings[static_cast<std::size_t>(start)].runs;
        dismissals += career.innings[static_cast<std::size_t>(start)].dismissed ? 1 : 0;
    }
    if (dismissals == 0) return static_cast<double>(runs);
    return static_cast<double>(runs) / static_cast<double>(dismissals);
}

/// Median over posterior draws of the expected next score at the held-out
/// innings' known venue/team-innings context, extending each draw's ability
/// trajectory by a one-step GP forecast.
inline double gp_next_score_prediction(const InningsRecord& held, const NSResult& fit,
                                       std::uint64_t seed) {
    Rng rng(derive_seed(seed, "holdout-prediction"));
    const std::vector<std::size_t> picks = posterior_resample(fit, summary_draw_count, rng);
    GPLatentTransform cache;
    std::vector<double> nu;
    nu.reserve(picks.size());
    for (std::size_t i : picks) {
        const ModelParams p = params_from_vector(fit.samples[i].params);
        const GPHyper h{p.lambda, p.sigma, p.ell, p.alpha};
        const Eigen::ArrayXd log_mu2 = cache.log_mu2(p.z, h);
        const Eigen::VectorXd fc = conditional_forecast_log(log_mu2.matrix(), h, 1, rng);
        const double mu2_next = detail::safe_exp(fc(0));
        nu.push_back(expected_score(ability_for_innings(held, mu2_next, p.C, p.D, p.psi, p.phi)));
    }
    std::sort(nu.begin(), nu.end());
    return sample_quantile(nu, 0.5);
}

struct LoocvPrediction {
    std::string player_id;
    int career_innings = 0;  // innings count before truncation
    int held_index = 0;      // 1-based index of the held-out innings
    int actual = 0;
    std::map<std::string, double> predictions;  // model name -> predicted score
};

struct LoocvRow {
    std::string model;
    int min_innings = 0;
    double mse = std::numeric_limits<double>::quiet_NaN();
    int n_players = 0;
};

struct LoocvResult {
    std::vector<LoocvPrediction> predictions;
    std::vector<LoocvRow> rows;
    int excluded = 0;
};

struct LoocvOptions {
    FitConfig fit;
    bool include_gp = true;
    std::vector<double> sma_windows = {1.0, 0.5, 0.25, 0.10};
    std::vector<int> min_innings_filters = {0, 10, 20, 50};
    int workers = 1;
    std::uint64_t seed = 0;
};

inline std::string sma_model_name(double window_fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "sma_%g", window_fraction * 100.0);
    return buf;
}

/// Holds out each player's chronologically last dismissed innings (dropping
/// everything after it, so no future data leaks through the GP smoother),
/// predicts its score with each model, and reports mean squared errors over
/// the cohort at each minimum-innings filter. Ineligible players (fewer than
/// 2 innings, no dismissal, or nothing before the held-out innings) are
/// excluded and counted.
inline LoocvResult loocv_mse(const std::vector<CareerRecord>& cohort, const LoocvOptions& opt) {
    struct Slot {
        bool eligible = false;
        LoocvPrediction pred;
    };
    std::vector<Slot> slots(cohort.size());

    parallel_for(cohort.size(), opt.workers, [&](std::size_t j) {
        const CareerRecord& career = cohort[j];
        validate(career);
        const int T = career.length();
        int held = -1;
        for (int t = T - 1; t >= 0; --t)
            if (career.innings[static_cast<std::size_t>(t)].dismissed) {
                held = t;
                break;
            }
        if (T < 2 || held < 1) return;  // needs >= 1 innings before the held-out one

        CareerRecord truncated;
        truncated.player_id = career.player_id;
        truncated.innings.assign(career.innings.begin(), career.innings.begin() + held);
        const InningsRecord& held_rec = career.innings[static_cast<std::size_t>(held)];

        Slot& slot = slots[j];
        slot.eligible = true;
        slot.pred.player_id = career.player_id;
        slot.pred.career_innings = T;
        slot.pred.held_index = held + 1;
        slot.pred.actual = held_rec.runs;
        for (double w : opt.sma_windows)
            slot.pred.predictions[sma_model_name(w)] = sma_predict(truncated, w);
        if (opt.include_gp) {
            FitConfig fit_cfg = opt.fit;
            fit_cfg.seed = derive_seed(opt.seed, "loocv:" + career.player_id);
            const NSResult fit = fit_player(truncated, fit_cfg);
            slot.pred.predictions["gp"] =
                gp_next_score_prediction(held_rec, fit, fit_cfg.seed);
        }
    });

    LoocvResult out;
    for (const Slot& s : slots) {
        if (s.eligible)
            out.predictions.push_back(s.pred);
        else
            ++out.excluded;
    }
    if (out.predictions.empty()) throw DataError("loocv_mse: no eligible players in cohort");
    std::sort(out.predictions.begin(), out.predictions.end(),
              [](const LoocvPrediction& a, const LoocvPrediction& b) {
                  return a.player_id < b.player_id;
              });

    std::vector<std::string> models;
    for (const auto& [name, value] : out.predictions.front().predictions) models.push_back(name);
    for (int filter : opt.min_innings_filters) {
        for (const std::string& model : models) {
            LoocvRow row;
            row.model = model;
            row.min_innings = filter;
            KahanSum sq;
            int n = 0;
            for (const LoocvPrediction& p : out.predictions) {
                if (p.career_innings < filter) continue;
                const double err = p.predictions.at(model) - static_cast<double>(p.actual);
                sq.add(err * err);
                ++n;
            }
            row.n_players = n;
            if (n > 0) row.mse = sq.value() / static_cast<double>(n);
            out.rows.push_back(row);
        }
    }
    return out;
}

struct HierHyper {
    double mu_eff = 1.0;    // population-median multiplier, Uniform(0.9, 1.1)
    double sigma_eff = 0.2; // population log-spread, Uniform(0.1, 0.3)
};

struct HierConfig {
    int chains = 4;
    long steps = 50'000;  // per chain, including burn-in
    long burn_in = 25'000;
    int thin = 10;
    double step_scale = 0.5;
    int workers = 1;
    std::uint64_t seed = 0;
};

struct HierDraw {
    int chain = 0;
    long step = 0;
    double mu_eff = 1.0;
    double sigma_eff = 0.2;
};

struct HierResult {
    std::vector<HierDraw> draws;
    double rhat_mu = 1.0;
    double rhat_sigma = 1.0;
    int excluded_players = 0;
    std::vector<std::string> warnings;
};

namespace detail {

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Split-Rhat over chains x steps matrices (one column per chain half).
inline double split_rhat(const std::vector<std::vector<double>>& chains) {
    std::vector<const double*> seqs;
    std::size_t half = chains.front().size() / 2;
    if (half < 2) throw DataError("split_rhat: chains too short");
    for (const auto& c : chains) {
        seqs.push_back(c.data());
        seqs.push_back(c.data() + half);
    }
    const double n = static_cast<double>(half);
    const double m = static_cast<double>(seqs.size());
    std::vector<double> means;
    double w = 0.0;
    for (const double* s : seqs) {
        double mean = 0.0;
        for (std::size_t i = 0; i < half; ++i) mean += s[i];
        mean /= n;
        double var = 0.0;
        for (std::size_t i = 0; i < half; ++i) var += (s[i] - mean) * (s[i] - mean);
        var /= (n - 1.0);
        means.push_back(mean);
        w += var;
    }
    w /= m;
    double grand = 0.0;
    for (double mu : means) grand += mu;
    grand /= m;
    double b = 0.0;
    for (double mu : means) b += (mu - grand) * (mu - grand);
    b *= n / (m - 1.0);
    const double var_plus = (n - 1.0) / n * w + b / n;
    return std::sqrt(var_plus / w);
}

}  // namespace detail

/// Recycles per-player posterior effect samples (drawn under the original
/// prior log-effect ~ N(0, 0.25^2)) into a hyperposterior over the
/// population median and log-spread, using the importance-ratio marginal
/// likelihood L(eta) = prod_j mean_s N(log e_js | log mu, sigma^2) /
/// N(log e_js | 0, 0.25^2) with uniform hyperpriors on
/// [0.9,1.1] x [0.1,0.3]. Random-walk Metropolis runs on logit-scaled box
/// coordinates (with the Jacobian correction); split-Rhat must pass 1.01.
inline HierResult hierarchical_postprocess(const std::vector<std::vector<double>>& effect_samples,
                                           const HierConfig& cfg,
                                           const std::vector<std::string>& player_ids = {}) {
    if (effect_samples.empty()) throw DataError("hierarchical_postprocess: no players");
    if (cfg.chains < 2) throw DataError("hierarchical_postprocess: needs >= 2 chains");
    if (cfg.burn_in >= cfg.steps)
        throw DataError("hierarchical_postprocess: burn_in must be < steps");

    constexpr double prior_sd = 0.25;
    constexpr double mu_lo = 0.9, mu_hi = 1.1, sg_lo = 0.1, sg_hi = 0.3;
    const double half_log_2pi = 0.5 * std::log(2.0 * M_PI);

    HierResult out;
    std::vector<double> xs;          // flattened log-effects
    std::vector<double> pre0;        // prior log-density at each sample
    std::vector<std::size_t> offset; // per-player segment starts
    std::vector<double> log_count;   // log S_j
    offset.push_back(0);
    for (std::size_t j = 0; j < effect_samples.size(); ++j) {
        const auto& es = effect_samples[j];
        if (es.size() < 100)
            throw DataError("hierarchical_postprocess: every player needs >= 100 effect samples");
        double best = neg_inf;
        std::vector<double> x_j, p_j;
        for (double e : es) {
            if (!(e > 0.0)) throw DataError("hierarchical_postprocess: effects must be positive");
            const double x = std::log(e);
            const double p0 = normal_log_pdf(x, 0.0, prior_sd);
            const double m_hat = std::min(std::max(x, std::log(mu_lo)), std::log(mu_hi));
            best = std::max(best, normal_log_pdf(x, m_hat, sg_hi) - p0);
            x_j.push_back(x);
            p_j.push_back(p0);
        }
        if (best < -700.0) {
            ++out.excluded_players;
            const std::string id =
                j < player_ids.size() ? player_ids[j] : "#" + std::to_string(j + 1);
            out.warnings.push_back("player " + id +
                                   " excluded: importance ratios underflow everywhere");
            continue;
        }
        xs.insert(xs.end(), x_j.begin(), x_j.end());
        pre0.insert(pre0.end(), p_j.begin(), p_j.end());
        offset.push_back(xs.size());
        log_count.push_back(std::log(static_cast<double>(x_j.size())));
    }
    if (offset.size() < 2)
        throw DataError("hierarchical_postprocess: all players excluded by ratio underflow");

    const Eigen::Map<const Eigen::ArrayXd> X(xs.data(), static_cast<Eigen::Index>(xs.size()));
    const Eigen::Map<const Eigen::ArrayXd> P0(pre0.data(), static_cast<Eigen::Index>(pre0.size()));

    const auto log_likelihood = [&](double mu, double sg, Eigen::ArrayXd& work) {
        work = -0.5 * ((X - std::log(mu)) / sg).square() - std::log(sg) - half_log_2pi - P0;
        double total = 0.0;
        for (std::size_t j = 0; j + 1 < offset.size(); ++j) {
            const auto len = static_cast<Eigen::Index>(offset[j + 1] - offset[j]);
            const auto seg = work.segment(static_cast<Eigen::Index>(offset[j]), len);
            const double m = seg.maxCoeff();
            total += m + std::log((seg - m).exp().sum()) - log_count[j];
        }
        return total;
    };
    const auto log_target = [&](double t1, double t2, Eigen::ArrayXd& work) {
        const double g1 = detail::logistic(t1);
        const double g2 = detail::logistic(t2);
        const double mu = mu_lo + (mu_hi - mu_lo) * g1;
        const double sg = sg_lo + (sg_hi - sg_lo) * g2;
        const double log_jac =
            -detail::softplus(t1) - detail::softplus(-t1) - detail::softplus(t2) -
            detail::softplus(-t2);
        return log_likelihood(mu, sg, work) + log_jac;
    };

    const long kept = (cfg.steps - cfg.burn_in);
    std::vector<std::vector<double>> mu_chains(static_cast<std::size_t>(cfg.chains)),
        sg_chains(static_cast<std::size_t>(cfg.chains));
    std::vector<std::vector<HierDraw>> thinned(static_cast<std::size_t>(cfg.chains));

    parallel_for(static_cast<std::size_t>(cfg.chains), cfg.workers, [&](std::size_t k) {
        Rng rng(derive_seed(cfg.seed, "hier-chain-" + std::to_string(k)));
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        Eigen::ArrayXd work;
        double t1 = gauss(rng), t2 = gauss(rng);
        double lp = log_target(t1, t2, work);
        auto& mu_c = mu_chains[k];
        auto& sg_c = sg_chains[k];
        mu_c.reserve(static_cast<std::size_t>(kept));
        sg_c.reserve(static_cast<std::size_t>(kept));
        for (long step = 0; step < cfg.steps; ++step) {
            const double p1 = t1 + cfg.step_scale * gauss(rng);
            const double p2 = t2 + cfg.step_scale * gauss(rng);
            const double lp_new = log_target(p1, p2, work);
            if (std::log(unif(rng)) < lp_new - lp) {
                t1 = p1;
                t2 = p2;
                lp = lp_new;
            }
            if (step >= cfg.burn_in) {
                const double mu = mu_lo + (mu_hi - mu_lo) * detail::logistic(t1);
                const double sg = sg_lo + (sg_hi - sg_lo) * detail::logistic(t2);
                mu_c.push_back(mu);
                sg_c.push_back(sg);
                if ((step - cfg.burn_in) % cfg.thin == 0)
                    thinned[k].push_back(
                        {static_cast<int>(k), step, mu, sg});
            }
        }
    });

    out.rhat_mu = detail::split_rhat(mu_chains);
    out.rhat_sigma = detail::split_rhat(sg_chains);
    if (!(out.rhat_mu < 1.01) || !(out.rhat_sigma < 1.01)) {
        char buf[128];
        std::snprintf(buf, sizeof buf,
                      "hierarchical MCMC failed convergence: split-Rhat mu=%.4f sigma=%.4f",
                      out.rhat_mu, out.rhat_sigma);
        throw NumericalError(buf);
    }
    for (auto& t : thinned)
        out.draws.insert(out.draws.end(), t.begin(), t.end());
    return out;
}

/// Forward model: draws log mu2 from the GP (or uses truth.z when it has
/// length T), then simulates each innings score by sequential Bernoulli
/// dismissal. A censor_fraction of innings (independent coin per innings)
/// are recorded as not-out at a uniformly chosen point of the realised
/// score path.
template <class RngT>
CareerRecord simulate_career(const ModelParams& truth, int T,
                             const std::vector<std::pair<Venue, TeamInnings>>& schedule,
                             RngT& rng, double censor_fraction = 0.1,
                             const std::string& player_id = "sim") {
    if (T < 1) throw DataError("simulate_career requires T >= 1");
    if (schedule.size() != static_cast<std::size_t>(T))
        throw DataError("simulate_career: schedule length must equal T");
    if (!(censor_fraction >= 0.0 && censor_fraction < 1.0))
        throw DataError("simulate_career: censor_fraction must lie in [0,1)");

    Eigen::VectorXd z = truth.z;
    if (z.size() == 0) {
        z.resize(T);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int t = 0; t < T; ++t) z(t) = gauss(rng);
    } else if (z.size() != T) {
        throw DataError("simulate_career: truth.z must be empty or length T");
    }

    Eigen::ArrayXd log_mu2;
    if (truth.sigma > 0.0) {
        GPLatentTransform cache;
        log_mu2 = cache.log_mu2(z, GPHyper{truth.lambda, truth.sigma, truth.ell, truth.alpha});
    } else {
        log_mu2 = Eigen::ArrayXd::Constant(T, std::log(truth.lambda));
    }

    std::bernoulli_distribution censor(censor_fraction);
    CareerRecord career;
    career.player_id = player_id;
    career.innings.reserve(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        InningsAbility ab;
        ab.mu2 = detail::safe_exp(log_mu2(t));
        ab.C = truth.C;
        ab.D = truth.D;
        ab.psi = truth.psi;
        ab.phi = truth.phi;
        ab.venue = static_cast<int>(schedule[static_cast<std::size_t>(t)].first);
        ab.team_innings = static_cast<int>(schedule[static_cast<std::size_t>(t)].second);
        const int score = sample_score(ab, rng);
        InningsRecord rec;
        rec.index = t + 1;
        rec.venue = schedule[static_cast<std::size_t>(t)].first;
        rec.team_innings = schedule[static_cast<std::size_t>(t)].second;
        if (censor_fraction > 0.0 && censor(rng)) {
            std::uniform_int_distribution<int> cut(0, score);
            rec.runs = cut(rng);
            rec.dismissed = false;
        } else {
            rec.runs = score;
            rec.dismissed = true;
        }
        career.innings.push_back(rec);
    }
    return career;
}

/// Random half home/half away schedule with a fair team-innings coin; the
/// usual test fixture.
template <class RngT>
std::vector<std::pair<Venue, TeamInnings>> random_schedule(int T, RngT& rng) {
    std::bernoulli_distribution coin(0.5);
    std::vector<std::pair<Venue, TeamInnings>> schedule;
    schedule.reserve(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t)
        schedule.emplace_back(coin(rng) ? Venue::Home : Venue::Away,
                              coin(rng) ? TeamInnings::First : TeamInnings::Second);
    return schedule;
}

}  // namespace crickgp
