#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "crickgp/common.hpp"

namespace crickgp {

struct NSProgress {
    long iteration = 0;
    double log_x = 0.0;
    double log_z = neg_inf;
    double log_l_worst = neg_inf;
    long likelihood_calls = 0;
};

struct NSConfig {
    int n_live = 200;
    int mh_steps = 100;
    /// Stop once max(logL)*X_i falls this far (in nats) below the evidence.
    double termination_log_ratio = -5.0;
    long max_iterations = 1'000'000;
    std::uint64_t seed = 0;
    std::function<void(const NSProgress&)> progress;
};

struct NSProblem {
    int dimension = 0;
    /// Map a point of the unit hypercube to model parameters.
    std::function<std::vector<double>(const std::vector<double>&)> prior_transform;
    /// Log-likelihood on transformed parameters.
    std::function<double(const std::vector<double>&)> log_likelihood;
};

struct NSSample {
    std::vector<double> params;
    double log_likelihood = neg_inf;
    /// Normalised posterior log-weight: log_sum_exp over samples is 0.
    double log_weight = neg_inf;
};

struct NSResult {
    double log_z = neg_inf;
    double log_z_err = 0.0;
    double information = 0.0;
    long iterations = 0;
    long likelihood_calls = 0;
    double acceptance_rate = 0.0;
    bool truncated = false;
    std::vector<NSSample> samples;
};

namespace detail {

struct LivePoint {
    std::vector<double> u;
    std::vector<double> params;
    double logl = neg_inf;
};

inline double checked_log_likelihood(const NSProblem& prob, const std::vector<double>& params) {
    const double v = prob.log_likelihood(params);
    if (std::isnan(v)) throw NumericalError("log-likelihood returned NaN");
    return v;
}

}  // namespace detail

/// Nested sampling with constrained random-walk Metropolis replacement.
///
/// Each replacement copies a random survivor and walks it for mh_steps
/// block proposals: a block of 2^k coordinates (k uniform, block capped at
/// min(64, dim)) is perturbed by Gaussian steps of heavy-tailed scale
/// 10^(-4u), reflected back into [0,1]. Moves are accepted when the
/// likelihood strictly exceeds the deleted point's, which keeps the
/// shrinkage estimate valid on likelihood plateaus.
inline NSResult run_nested_sampling(const NSProblem& prob, const NSConfig& cfg) {
    if (prob.dimension < 1) throw DataError("nested sampling requires dimension >= 1");
    if (!prob.prior_transform || !prob.log_likelihood)
        throw DataError("nested sampling requires prior_transform and log_likelihood");
    if (cfg.n_live < 2) throw DataError("nested sampling requires n_live >= 2");
    if (cfg.mh_steps < 1) throw DataError("nested sampling requires mh_steps >= 1");
    if (!(cfg.termination_log_ratio < 0.0))
        throw DataError("termination_log_ratio must be negative");

    const int d = prob.dimension;
    const int n = cfg.n_live;
    Rng rng(cfg.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    long likelihood_calls = 0;
    std::vector<detail::LivePoint> live(static_cast<std::size_t>(n));
    for (auto& pt : live) {
        pt.u.resize(static_cast<std::size_t>(d));
        for (double& x : pt.u) x = unif(rng);
        pt.params = prob.prior_transform(pt.u);
        pt.logl = detail::checked_log_likelihood(prob, pt.params);
        ++likelihood_calls;
    }

    int max_block_pow = 0;
    while ((2 << max_block_pow) <= std::min(d, 64)) ++max_block_pow;
    std::uniform_int_distribution<int> block_pow(0, max_block_pow);

    struct Dead {
        std::vector<double> params;
        double logl;
        double log_w;
    };
    std::vector<Dead> dead;
    dead.reserve(static_cast<std::size_t>(4 * n));

    const double log_shrink = std::log1p(-std::exp(-1.0 / n));
    double log_z = neg_inf;
    long iter = 0;
    long proposed_total = 0, accepted_total = 0;
    bool terminated = false;

    std::vector<int> coord_pool(static_cast<std::size_t>(d));
    std::vector<double> u_prop(static_cast<std::size_t>(d));

    while (iter < cfg.max_iterations) {
        ++iter;
        std::size_t worst = 0;
        for (std::size_t i = 1; i < live.size(); ++i)
            if (live[i].logl < live[worst].logl) worst = i;
        const double logl_threshold = live[worst].logl;
        const double log_w = -static_cast<double>(iter - 1) / n + log_shrink;
        log_z = log_sum_exp(log_z, log_w + logl_threshold);
        dead.push_back({live[worst].params, logl_threshold, log_w});

        std::size_t src = worst;
        if (n > 1) {
            std::uniform_int_distribution<std::size_t> pick(0, live.size() - 2);
            src = pick(rng);
            if (src >= worst) ++src;
        }
        detail::LivePoint walker = live[src];

        int accepted = 0;
        for (int step = 0; step < cfg.mh_steps; ++step) {
            const int bsize = std::min(1 << block_pow(rng), d);
            std::iota(coord_pool.begin(), coord_pool.end(), 0);
            for (int i = 0; i < bsize; ++i) {
                std::uniform_int_distribution<int> pick(i, d - 1);
                std::swap(coord_pool[static_cast<std::size_t>(i)],
                          coord_pool[static_cast<std::size_t>(pick(rng))]);
            }
            const double scale = std::pow(10.0, -4.0 * unif(rng));
            u_prop = walker.u;
            for (int i = 0; i < bsize; ++i) {
                const auto j = static_cast<std::size_t>(coord_pool[static_cast<std::size_t>(i)]);
                u_prop[j] = reflect_unit(u_prop[j] + scale * gauss(rng));
            }
            std::vector<double> params = prob.prior_transform(u_prop);
            const double logl = detail::checked_log_likelihood(prob, params);
            ++likelihood_calls;
            ++proposed_total;
            if (logl > logl_threshold) {
                walker.u = u_prop;
                walker.params = std::move(params);
                walker.logl = logl;
                ++accepted;
            }
        }
        accepted_total += accepted;

        if (accepted == 0) {
            bool all_same = true;
            for (std::size_t i = 1; i < live.size() && all_same; ++i)
                all_same = live[i].u == live[0].u;
            if (all_same)
                throw NumericalError(
                    "nested sampler stalled: live set is degenerate and no constrained move was "
                    "accepted");
        }
        live[worst] = std::move(walker);

        const double log_x = -static_cast<double>(iter) / n;
        double logl_max = neg_inf;
        for (const auto& pt : live) logl_max = std::max(logl_max, pt.logl);
        if (cfg.progress)
            cfg.progress(NSProgress{iter, log_x, log_z, logl_threshold, likelihood_calls});
        if (logl_max + log_x < log_z + cfg.termination_log_ratio) {
            terminated = true;
            break;
        }
    }

    const double log_x_final = -static_cast<double>(iter) / n;
    std::vector<std::size_t> order(live.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&live](std::size_t a, std::size_t b) {
        return live[a].logl < live[b].logl;
    });
    const double log_w_live = log_x_final - std::log(static_cast<double>(n));
    for (std::size_t idx : order) {
        log_z = log_sum_exp(log_z, log_w_live + live[idx].logl);
        dead.push_back({live[idx].params, live[idx].logl, log_w_live});
    }

    NSResult result;
    result.log_z = log_z;
    result.iterations = iter;
    result.likelihood_calls = likelihood_calls;
    result.acceptance_rate =
        proposed_total > 0 ? static_cast<double>(accepted_total) / proposed_total : 0.0;
    result.truncated = !terminated;

    result.samples.reserve(dead.size());
    double information = 0.0;
    for (auto& dp : dead) {
        const double log_p = dp.log_w + dp.logl - log_z;
        const double p = std::exp(log_p);
        if (p > 0.0) information += p * (dp.logl - log_z);
        result.samples.push_back({std::move(dp.params), dp.logl, log_p});
    }
    result.information = information;
    result.log_z_err = std::sqrt(std::max(information, 0.0) / n);
    return result;
}

/// Kish effective sample size of the weighted posterior samples.
inline double effective_sample_size(const NSResult& result) {
    double sum_sq = 0.0;
    for (const auto& s : result.samples) {
        const double p = std::exp(s.log_weight);
        sum_sq += p * p;
    }
    return sum_sq > 0.0 ? 1.0 / sum_sq : 0.0;
}

/// Draw `count` sample indices with replacement, proportional to the
/// normalised posterior weights.
template <class RngT>
std::vector<std::size_t> posterior_resample(const NSResult& result, std::size_t count, RngT& rng) {
    if (result.samples.empty()) throw DataError("posterior_resample: no samples");
    std::vector<double> cumulative(result.samples.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < result.samples.size(); ++i) {
        acc += std::exp(result.samples[i].log_weight);
        cumulative[i] = acc;
    }
    const double total = cumulative.back();
    if (!(total > 0.0)) throw NumericalError("posterior_resample: weights sum to zero");
    std::uniform_real_distribution<double> unif(0.0, total);
    std::vector<std::size_t> indices;
    indices.reserve(count);
    for (std::size_t c = 0; c < count; ++c) {
        const double r = unif(rng);
        const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), r);
        indices.push_back(static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                     static_cast<std::ptrdiff_t>(cumulative.size()) - 1)));
    }
    return indices;
}

}  // namespace crickgp
