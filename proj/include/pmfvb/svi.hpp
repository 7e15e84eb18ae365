#pragma once

// Stochastic variational inference for the same model. Each step draws a
// minibatch with replacement, computes rho for those samples only, forms the
// noisy natural gradient (every sample weighted as if replicated T times) and
// moves the global concentrations toward it:
//
//   alpha~ <- alpha~ + xi * mean_m(g_m) = (1 - xi) alpha~ + xi * target
//
// One learning rate is kept for the lambda block and one per factor column
// (n, r). The adaptive rate is |E g|^2 / E|g|^2 with both moments tracked by
// exponential moving averages.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "pmfvb/error.hpp"
#include "pmfvb/eval.hpp"
#include "pmfvb/model.hpp"
#include "pmfvb/random.hpp"
#include "pmfvb/vb.hpp"

namespace pmfvb {

enum class LearningRateSchedule { adaptive, robbins_monro, constant };

struct SviConfig : FitConfig {
    /// 0 selects ceil(sqrt(T)).
    std::size_t batch_size = 0;
    /// Wall-clock cap in seconds; 0 disables it.
    double max_runtime_seconds = 0.0;
    double lr_ema_decay = 0.9;
    std::size_t nll_check_interval = 50;
    LearningRateSchedule schedule = LearningRateSchedule::adaptive;
    /// xi_k = (k + tau)^(-kappa) for the Robbins-Monro schedule.
    double rm_tau = 1.0;
    double rm_kappa = 0.7;
    /// Rate used by the constant schedule.
    double constant_rate = 1.0;

    SviConfig() {
        holdout_fraction = 0.1;
        convergence = Convergence::heldout_nll;
        tol_mode = ToleranceMode::relative;
        max_iters = 20000;
    }

    explicit SviConfig(const FitConfig& base) : FitConfig(base) {}

    void validate() const {
        FitConfig::validate();
        if (!(lr_ema_decay > 0.0 && lr_ema_decay < 1.0)) throw DomainError("SviConfig: lr_ema_decay must lie in (0, 1)");
        if (nll_check_interval < 1) throw DomainError("SviConfig: nll_check_interval must be at least 1");
        if (schedule == LearningRateSchedule::robbins_monro && !(rm_kappa > 0.5 && rm_kappa <= 1.0 && rm_tau >= 0.0)) {
            throw DomainError("SviConfig: Robbins-Monro needs kappa in (0.5, 1] and tau >= 0");
        }
        if (schedule == LearningRateSchedule::constant && !(constant_rate > 0.0 && constant_rate <= 1.0)) {
            throw DomainError("SviConfig: constant_rate must lie in (0, 1]");
        }
    }
};

/// Moving averages of one parameter block's noisy gradient.
struct BlockRate {
    std::vector<double> grad_avg;
    double sq_norm_avg = 0.0;
    bool initialized = false;
    double rate = 1.0;

    /// The first gradient seeds both averages.
    void observe(std::span<const double> g, double decay) {
        double sq = 0.0;
        for (double v : g) sq += v * v;
        if (!initialized) {
            grad_avg.assign(g.begin(), g.end());
            sq_norm_avg = sq;
            initialized = true;
            return;
        }
        for (std::size_t k = 0; k < g.size(); ++k) grad_avg[k] = decay * grad_avg[k] + (1.0 - decay) * g[k];
        sq_norm_avg = decay * sq_norm_avg + (1.0 - decay) * sq;
    }
};

inline constexpr double kMinLearningRate = 1e-12;

/// xi = (g_avg . g_avg) / h_avg clamped to (0, 1]; h_avg = 0 means no noise, xi = 1.
inline double adaptive_learning_rate(std::span<const double> grad_avg, double sq_norm_avg) {
    if (!(sq_norm_avg > 0.0)) return 1.0;
    double num = 0.0;
    for (double v : grad_avg) num += v * v;
    return std::clamp(num / sq_norm_avg, kMinLearningRate, 1.0);
}

struct SviState {
    VariationalState variational;
    std::size_t iteration = 0;
    BlockRate lambda;
    /// Indexed n * R + r.
    std::vector<BlockRate> factor;

    SviState() = default;
    explicit SviState(VariationalState v)
        : variational(std::move(v)), factor(variational.num_vars() * variational.rank) {}
};

/// M sample indices drawn uniformly with replacement from [0, T).
inline std::vector<std::size_t> sample_minibatch(std::size_t num_samples, std::size_t batch_size, Rng& rng) {
    if (num_samples == 0) throw DomainError("sample_minibatch: dataset is empty");
    std::vector<std::size_t> out(batch_size);
    for (auto& t : out) t = static_cast<std::size_t>(rng.below(num_samples));
    return out;
}

/// Per-sample noisy natural gradients for lambda, M x R row-major:
/// g_{m,r} = alpha_lambda + T rho_{r,m} - alpha~_lambda,r.
inline std::vector<double> noisy_natural_gradient_lambda(const FitConfig& config, const VariationalState& state,
                                                         const LocalResponsibilities& rho_batch,
                                                         std::size_t num_samples) {
    const auto T = static_cast<double>(num_samples);
    std::vector<double> out(rho_batch.columns * state.rank);
    for (std::size_t m = 0; m < rho_batch.columns; ++m) {
        for (std::size_t r = 0; r < state.rank; ++r) {
            out[m * state.rank + r] = config.alpha_lambda + T * rho_batch.at(r, m) - state.alpha_lambda[r];
        }
    }
    return out;
}

/// Per-sample noisy natural gradients for the factors. Element [m][n] has the
/// layout of state.alpha_factor[n]:
/// g = alpha_factor + 1{y_{n,t_m} = i} T rho_{r,m} - alpha~_{n,r,i}.
inline std::vector<std::vector<std::vector<double>>> noisy_natural_gradient_factors(
    const FitConfig& config, const VariationalState& state, const LocalResponsibilities& rho_batch,
    const Dataset& data, std::span<const std::size_t> batch, std::size_t num_samples) {
    const auto T = static_cast<double>(num_samples);
    const std::size_t R = state.rank;
    std::vector<std::vector<std::vector<double>>> out(rho_batch.columns);
    for (std::size_t m = 0; m < rho_batch.columns; ++m) {
        const auto y = data.sample(batch[m]);
        out[m].resize(state.num_vars());
        for (std::size_t n = 0; n < state.num_vars(); ++n) {
            auto& g = out[m][n];
            g.resize(state.alpha_factor[n].size());
            for (std::size_t k = 0; k < g.size(); ++k) g[k] = config.alpha_factor - state.alpha_factor[n][k];
            if (y[n] == kMissing) continue;
            const std::size_t row = static_cast<std::size_t>(y[n] - 1) * R;
            for (std::size_t r = 0; r < R; ++r) g[row + r] += T * rho_batch.at(r, m);
        }
    }
    return out;
}

namespace detail {

inline double block_rate(const SviConfig& config, BlockRate& block, std::span<const double> g, std::size_t k) {
    switch (config.schedule) {
        case LearningRateSchedule::adaptive:
            block.observe(g, config.lr_ema_decay);
            return adaptive_learning_rate(block.grad_avg, block.sq_norm_avg);
        case LearningRateSchedule::robbins_monro:
            return std::pow(static_cast<double>(k) + config.rm_tau, -config.rm_kappa);
        case LearningRateSchedule::constant:
            return config.constant_rate;
    }
    return 1.0;
}

}  // namespace detail

/// One stochastic step on an explicit minibatch (duplicates allowed).
inline void svi_step(SviState& state, const Dataset& data, const SviConfig& config,
                     std::span<const std::size_t> batch) {
    VariationalState& vs = state.variational;
    if (!vs.fresh) vs.refresh();
    const std::size_t R = vs.rank;
    const std::size_t M = batch.size();
    if (M == 0) throw DomainError("svi_step: empty minibatch");
    const double scale = static_cast<double>(data.num_samples()) / static_cast<double>(M);
    const std::size_t k = ++state.iteration;

    // Minibatch statistics: sum_m rho_{r,m} and sum_m 1{y_{n,t_m} = i} rho_{r,m}.
    SufficientStats stats(vs.cards, R);
    std::vector<double> rho(R);
    for (std::size_t t : batch) {
        const auto y = data.sample(t);
        detail::check_sample(vs, y);
        detail::local_column(vs, y, rho);
        detail::scatter(y, rho, 1.0, stats);
    }

    std::vector<double> target(R);
    std::vector<double> grad(R);
    for (std::size_t r = 0; r < R; ++r) {
        target[r] = config.alpha_lambda + scale * stats.lambda[r];
        grad[r] = target[r] - vs.alpha_lambda[r];
    }
    const double xi_lambda = detail::block_rate(config, state.lambda, grad, k);
    state.lambda.rate = xi_lambda;
    for (std::size_t r = 0; r < R; ++r) vs.alpha_lambda[r] = (1.0 - xi_lambda) * vs.alpha_lambda[r] + xi_lambda * target[r];

    for (std::size_t n = 0; n < vs.num_vars(); ++n) {
        const auto I = static_cast<std::size_t>(vs.cards[n]);
        target.resize(I);
        grad.resize(I);
        auto& alpha = vs.alpha_factor[n];
        for (std::size_t r = 0; r < R; ++r) {
            for (std::size_t i = 0; i < I; ++i) {
                target[i] = config.alpha_factor + scale * stats.factor[n][i * R + r];
                grad[i] = target[i] - alpha[i * R + r];
            }
            BlockRate& block = state.factor[n * R + r];
            const double xi = detail::block_rate(config, block, grad, k);
            block.rate = xi;
            for (std::size_t i = 0; i < I; ++i) alpha[i * R + r] = (1.0 - xi) * alpha[i * R + r] + xi * target[i];
        }
    }
    vs.refresh();
}

/// One stochastic step with a minibatch drawn from `rng`.
inline void svi_step(SviState& state, const Dataset& data, const SviConfig& config, std::size_t batch_size,
                     Rng& rng) {
    const auto batch = sample_minibatch(data.num_samples(), batch_size, rng);
    svi_step(state, data, config, batch);
}

inline std::size_t default_batch_size(std::size_t num_samples) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(num_samples)))));
}

/// Stochastic fit. A held-out fraction of samples is split off; every
/// nll_check_interval steps the mean held-out NLL of the current point
/// estimates is recorded and the run stops once its change drops below the
/// tolerance. Pruning happens once at the end.
inline FitResult svb_fit(const Dataset& data, const SviConfig& config) {
    config.validate();
    if (config.init_rank < 1) throw DomainError("svb_fit: initial rank must be at least 1");
    const bool use_nll = config.convergence == Convergence::heldout_nll;
    if (use_nll && !(config.holdout_fraction > 0.0)) {
        throw ConfigError("svb_fit: held-out NLL convergence needs holdout_fraction > 0");
    }

    Dataset train;
    Dataset heldout;
    if (config.holdout_fraction > 0.0) {
        auto [in, out] = detail::holdout_split(data.num_samples(), config.holdout_fraction, config.seed);
        train = data.select(in);
        heldout = data.select(out);
    } else {
        train = data;
    }
    detail::require_all_observed(train);

    const std::size_t T = train.num_samples();
    const std::size_t M = config.batch_size > 0 ? config.batch_size : default_batch_size(T);
    if (M > T) throw DomainError("svb_fit: batch size exceeds the number of training samples");

    FitResult result;
    result.initial_rank = config.init_rank;
    result.batch_size = M;
    SviState state(initialize_state(config, train, config.init_rank));
    Rng rng(config.seed, Stream::minibatch);
    const auto start = std::chrono::steady_clock::now();
    double previous_nll = std::numeric_limits<double>::quiet_NaN();
    std::size_t checks = 0;
    for (std::size_t k = 1; k <= config.max_iters; ++k) {
        svi_step(state, train, config, M, rng);
        result.iterations = k;
        if (k % config.nll_check_interval == 0) {
            result.learning_rate_trace.emplace_back(k, state.lambda.rate);
            if (heldout.num_samples() > 0) {
                const double nll = mean_nll(point_estimates(state.variational), heldout, config.threads).value;
                result.heldout_nll_trace.emplace_back(k, nll);
                if (use_nll && checks > 0 && detail::change_below(previous_nll, nll, config.tol, config.tol_mode)) {
                    result.stop = StopReason::converged;
                    break;
                }
                previous_nll = nll;
                ++checks;
            }
        }
        if (config.max_runtime_seconds > 0.0 &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >
                config.max_runtime_seconds) {
            result.stop = StopReason::max_runtime;
            break;
        }
    }
    auto pruned = prune(point_estimates(state.variational), config.prune_eps);
    result.model = std::move(pruned.model);
    result.detected_rank = pruned.detected_rank;
    result.state = std::move(state.variational);
    return result;
}

}  // namespace pmfvb
