#pragma once

// Coordinate-ascent variational Bayes for the CPD/naive Bayes PMF model with
// Dirichlet priors on the loading vector and every factor column.
//
// A sweep computes the local responsibilities rho from the current expected
// logs, then sets the global Dirichlet concentrations from rho, refreshes the
// expected logs and evaluates the ELBO. Components whose point-estimate weight
// ends below prune_eps are removed once, after convergence.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pmfvb/error.hpp"
#include "pmfvb/eval.hpp"
#include "pmfvb/model.hpp"
#include "pmfvb/parallel.hpp"
#include "pmfvb/random.hpp"
#include "pmfvb/special.hpp"

namespace pmfvb {

enum class Convergence { elbo, heldout_nll };

/// How successive objective values are compared against the tolerance.
enum class ToleranceMode { absolute, relative };

struct FitConfig {
    double alpha_lambda = 1e-6;
    double alpha_factor = 1.0;
    std::size_t init_rank = 0;
    double prune_eps = 1e-3;
    /// Stop once |f_k - f_{k-1}| (absolute) or |f_k - f_{k-1}| / |f_k|
    /// (relative) drops below this, f being the ELBO or the held-out NLL.
    double tol = 1e-7;
    ToleranceMode tol_mode = ToleranceMode::absolute;
    std::size_t max_iters = 5000;
    std::uint64_t seed = 0;
    /// Fraction of samples withheld for the held-out NLL criterion. Only used
    /// by vb_fit when convergence == heldout_nll.
    double holdout_fraction = 0.0;
    Convergence convergence = Convergence::elbo;
    unsigned threads = 1;

    void validate() const {
        if (!(alpha_lambda > 0.0) || !(alpha_factor > 0.0)) {
            throw DomainError("FitConfig: prior concentrations must be positive");
        }
        if (!(prune_eps > 0.0 && prune_eps < 1.0)) throw DomainError("FitConfig: prune_eps must lie in (0, 1)");
        if (!(tol > 0.0)) throw DomainError("FitConfig: tolerance must be positive");
        if (max_iters < 1) throw DomainError("FitConfig: max_iters must be at least 1");
        if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
            throw DomainError("FitConfig: holdout_fraction must lie in [0, 1)");
        }
    }
};

/// Global variational parameters plus cached expected logs. Factor blocks are
/// row-major I_n x R (row = category - 1), so one category's R entries are
/// contiguous.
struct VariationalState {
    std::vector<int> cards;
    std::size_t rank = 0;
    std::vector<double> alpha_lambda;
    std::vector<std::vector<double>> alpha_factor;
    std::vector<double> log_lambda;
    std::vector<std::vector<double>> log_factor;
    bool fresh = false;

    VariationalState() = default;

    VariationalState(std::span<const int> cardinalities, std::size_t R)
        : cards(cardinalities.begin(), cardinalities.end()), rank(R), alpha_lambda(R, 1.0),
          alpha_factor(cards.size()), log_lambda(R, 0.0), log_factor(cards.size()) {
        for (std::size_t n = 0; n < cards.size(); ++n) {
            alpha_factor[n].assign(static_cast<std::size_t>(cards[n]) * R, 1.0);
            log_factor[n].assign(static_cast<std::size_t>(cards[n]) * R, 0.0);
        }
    }

    /// Variational distributions equal to the priors.
    static VariationalState from_prior(const FitConfig& config, std::span<const int> cardinalities,
                                       std::size_t R) {
        VariationalState s(cardinalities, R);
        s.alpha_lambda.assign(R, config.alpha_lambda);
        for (auto& block : s.alpha_factor) block.assign(block.size(), config.alpha_factor);
        return s;
    }

    std::size_t num_vars() const noexcept { return cards.size(); }

    /// Column (n, r) of the factor concentrations, gathered.
    std::vector<double> factor_column(std::size_t n, std::size_t r) const {
        std::vector<double> col(static_cast<std::size_t>(cards[n]));
        for (std::size_t i = 0; i < col.size(); ++i) col[i] = alpha_factor[n][i * rank + r];
        return col;
    }

    /// Recomputes the expected-log caches in place.
    void refresh() {
        dirichlet_expect_log(alpha_lambda, log_lambda);
        std::vector<double> col;
        for (std::size_t n = 0; n < cards.size(); ++n) {
            const auto I = static_cast<std::size_t>(cards[n]);
            for (std::size_t r = 0; r < rank; ++r) {
                double total = 0.0;
                for (std::size_t i = 0; i < I; ++i) total += alpha_factor[n][i * rank + r];
                const double psi_total = digamma(total);
                for (std::size_t i = 0; i < I; ++i) {
                    log_factor[n][i * rank + r] = digamma(alpha_factor[n][i * rank + r]) - psi_total;
                }
            }
        }
        fresh = true;
    }
};

inline VariationalState refresh_expected_logs(VariationalState state) {
    state.refresh();
    return state;
}

/// rho as an R x columns matrix stored column by column.
struct LocalResponsibilities {
    std::size_t rank = 0;
    std::size_t columns = 0;
    std::vector<double> rho;

    LocalResponsibilities() = default;
    LocalResponsibilities(std::size_t R, std::size_t cols) : rank(R), columns(cols), rho(R * cols, 0.0) {}

    double at(std::size_t r, std::size_t t) const { return rho[t * rank + r]; }
    std::span<const double> column(std::size_t t) const {
        return std::span<const double>(rho).subspan(t * rank, rank);
    }
    std::span<double> column(std::size_t t) { return std::span<double>(rho).subspan(t * rank, rank); }
};

/// Statistics of rho: sum_t rho_{r,t} and, per variable, sum over samples with
/// y_{n,t} = i of rho_{r,t}; plus the responsibility entropy -sum rho ln rho.
struct SufficientStats {
    std::vector<double> lambda;
    std::vector<std::vector<double>> factor;
    double entropy = 0.0;

    SufficientStats() = default;
    SufficientStats(std::span<const int> cards, std::size_t R) : lambda(R, 0.0), factor(cards.size()) {
        for (std::size_t n = 0; n < cards.size(); ++n) factor[n].assign(static_cast<std::size_t>(cards[n]) * R, 0.0);
    }

    void add(const SufficientStats& other) {
        for (std::size_t r = 0; r < lambda.size(); ++r) lambda[r] += other.lambda[r];
        for (std::size_t n = 0; n < factor.size(); ++n) {
            for (std::size_t k = 0; k < factor[n].size(); ++k) factor[n][k] += other.factor[n][k];
        }
        entropy += other.entropy;
    }

    void clear() {
        std::fill(lambda.begin(), lambda.end(), 0.0);
        for (auto& f : factor) std::fill(f.begin(), f.end(), 0.0);
        entropy = 0.0;
    }
};

namespace detail {

inline void check_sample(const VariationalState& state, std::span<const Category> y) {
    for (std::size_t n = 0; n < y.size(); ++n) {
        if (y[n] > state.cards[n]) {
            throw DomainError("update_local: category " + std::to_string(y[n]) + " out of range for variable " +
                              std::to_string(n + 1));
        }
    }
}

/// rho for one sample. Returns -sum_r rho_r ln rho_r.
inline double local_column(const VariationalState& state, std::span<const Category> y, std::span<double> rho) {
    const std::size_t R = state.rank;
    double* __restrict lg = rho.data();
    const double* __restrict base = state.log_lambda.data();
    for (std::size_t r = 0; r < R; ++r) lg[r] = base[r];
    for (std::size_t n = 0; n < y.size(); ++n) {
        if (y[n] == kMissing) continue;
        const double* __restrict row = state.log_factor[n].data() + static_cast<std::size_t>(y[n] - 1) * R;
        for (std::size_t r = 0; r < R; ++r) lg[r] += row[r];
    }
    double m = lg[0];
    for (std::size_t r = 1; r < R; ++r) m = std::max(m, lg[r]);
    for (std::size_t r = 0; r < R; ++r) lg[r] -= m;
    double weighted = 0.0;  // sum_r e_r * shifted_r, unnormalised
    double s = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
        const double shifted = lg[r];
        const double e = std::exp(shifted);
        s += e;
        weighted += e * shifted;
        lg[r] = e;
    }
    const double inv = 1.0 / s;
    for (std::size_t r = 0; r < R; ++r) lg[r] *= inv;
    // ln rho_r = shifted_r - ln s; components with rho_r = 0 contribute 0.
    return std::log(s) - weighted * inv;
}

inline void scatter(std::span<const Category> y, std::span<const double> rho, double weight, SufficientStats& stats) {
    const std::size_t R = rho.size();
    const double* __restrict src = rho.data();
    double* __restrict lam = stats.lambda.data();
    for (std::size_t r = 0; r < R; ++r) lam[r] += weight * src[r];
    for (std::size_t n = 0; n < y.size(); ++n) {
        if (y[n] == kMissing) continue;
        double* __restrict row = stats.factor[n].data() + static_cast<std::size_t>(y[n] - 1) * R;
        for (std::size_t r = 0; r < R; ++r) row[r] += weight * src[r];
    }
}

}  // namespace detail

/// Optimal q(z_t) for every sample given the current expected logs:
/// ln gamma_{r,t} = ln lambda~_r + sum over observed n of ln a~_{n,r,y_{n,t}},
/// normalised with log-sum-exp.
inline LocalResponsibilities update_local(const VariationalState& state, const Dataset& data,
                                          unsigned threads = 1) {
    if (!state.fresh) throw DomainError("update_local: expected-log caches are stale");
    if (data.num_vars() != state.num_vars()) throw DomainError("update_local: dataset/state mismatch");
    LocalResponsibilities out(state.rank, data.num_samples());
    for_each_block(data.num_samples(), threads, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t t = begin; t < end; ++t) {
            const auto y = data.sample(t);
            detail::check_sample(state, y);
            detail::local_column(state, y, out.column(t));
        }
    });
    return out;
}

/// Same as update_local restricted to the listed sample indices (duplicates allowed).
inline LocalResponsibilities update_local(const VariationalState& state, const Dataset& data,
                                          std::span<const std::size_t> columns) {
    if (!state.fresh) throw DomainError("update_local: expected-log caches are stale");
    LocalResponsibilities out(state.rank, columns.size());
    for (std::size_t m = 0; m < columns.size(); ++m) {
        const auto y = data.sample(columns[m]);
        detail::check_sample(state, y);
        detail::local_column(state, y, out.column(m));
    }
    return out;
}

/// Sums rho into statistics. `columns` maps rho columns to dataset samples;
/// empty means the identity.
inline SufficientStats accumulate_statistics(const LocalResponsibilities& rho, const Dataset& data,
                                             std::span<const std::size_t> columns = {}) {
    SufficientStats stats(data.cardinalities(), rho.rank);
    for (std::size_t t = 0; t < rho.columns; ++t) {
        const std::size_t col = columns.empty() ? t : columns[t];
        const auto c = rho.column(t);
        detail::scatter(data.sample(col), c, 1.0, stats);
        for (double v : c) {
            if (v > 0.0) stats.entropy -= v * std::log(v);
        }
    }
    return stats;
}

/// alpha~_lambda,r = alpha_lambda + sum_t rho_{r,t}.
inline std::vector<double> update_global_lambda(const FitConfig& config, const LocalResponsibilities& rho) {
    std::vector<double> out(rho.rank, config.alpha_lambda);
    std::vector<double> sums(rho.rank, 0.0);
    for (std::size_t t = 0; t < rho.columns; ++t) {
        for (std::size_t r = 0; r < rho.rank; ++r) sums[r] += rho.at(r, t);
    }
    for (std::size_t r = 0; r < rho.rank; ++r) out[r] += sums[r];
    return out;
}

/// alpha~_{n,r,i} = alpha_factor + sum over observed samples with y_{n,t} = i of rho_{r,t}.
inline std::vector<std::vector<double>> update_global_factors(const FitConfig& config,
                                                              const LocalResponsibilities& rho,
                                                              const Dataset& data) {
    if (rho.columns != data.num_samples()) throw DomainError("update_global_factors: rho/data column mismatch");
    SufficientStats stats = accumulate_statistics(rho, data);
    for (auto& block : stats.factor) {
        for (double& v : block) v += config.alpha_factor;
    }
    return std::move(stats.factor);
}

/// Closed-form ELBO given statistics of rho and a state with fresh caches.
inline double elbo_from_statistics(const FitConfig& config, const VariationalState& state,
                                   const SufficientStats& stats) {
    if (!state.fresh) throw DomainError("compute_elbo: expected-log caches are stale");
    const std::size_t R = state.rank;
    double value = 0.0;

    // E[ln p(Y | Z, A)] + E[ln p(Z | lambda)]
    for (std::size_t r = 0; r < R; ++r) value += stats.lambda[r] * state.log_lambda[r];
    for (std::size_t n = 0; n < state.num_vars(); ++n) {
        const auto& s = stats.factor[n];
        const auto& l = state.log_factor[n];
        for (std::size_t k = 0; k < s.size(); ++k) value += s[k] * l[k];
    }

    // E[ln p(A)] - E[ln q(A)]
    std::vector<double> col;
    for (std::size_t n = 0; n < state.num_vars(); ++n) {
        const auto I = static_cast<std::size_t>(state.cards[n]);
        const double prior_norm = log_dirichlet_norm_symmetric(I, config.alpha_factor);
        col.resize(I);
        for (std::size_t r = 0; r < R; ++r) {
            double prior_part = prior_norm;
            double q_part = 0.0;
            for (std::size_t i = 0; i < I; ++i) {
                const double a = state.alpha_factor[n][i * R + r];
                const double lg = state.log_factor[n][i * R + r];
                col[i] = a;
                prior_part += (config.alpha_factor - 1.0) * lg;
                q_part += (a - 1.0) * lg;
            }
            q_part += log_dirichlet_norm(col);
            value += prior_part - q_part;
        }
    }

    // E[ln p(lambda)] - E[ln q(lambda)]
    double prior_lambda = log_dirichlet_norm_symmetric(R, config.alpha_lambda);
    double q_lambda = log_dirichlet_norm(state.alpha_lambda);
    for (std::size_t r = 0; r < R; ++r) {
        prior_lambda += (config.alpha_lambda - 1.0) * state.log_lambda[r];
        q_lambda += (state.alpha_lambda[r] - 1.0) * state.log_lambda[r];
    }
    value += prior_lambda - q_lambda;

    // -E[ln q(Z)]
    value += stats.entropy;
    return value;
}

/// ELBO of (state, rho) on data. The data term only involves observed entries
/// and 0 ln 0 is taken as 0.
inline double compute_elbo(const FitConfig& config, const VariationalState& state,
                           const LocalResponsibilities& rho, const Dataset& data) {
    if (rho.columns != data.num_samples() || rho.rank != state.rank) {
        throw DomainError("compute_elbo: rho does not match state/data");
    }
    return elbo_from_statistics(config, state, accumulate_statistics(rho, data));
}

/// Posterior means of lambda and of every factor column.
inline CpdModel point_estimates(const VariationalState& state) {
    const std::size_t R = state.rank;
    std::vector<double> lambda = dirichlet_mean(DirichletParams(state.alpha_lambda));
    std::vector<std::vector<double>> factors(state.num_vars());
    for (std::size_t n = 0; n < state.num_vars(); ++n) {
        const auto I = static_cast<std::size_t>(state.cards[n]);
        factors[n].resize(I * R);
        for (std::size_t r = 0; r < R; ++r) {
            const auto mean = dirichlet_mean(DirichletParams(state.factor_column(n, r)));
            for (std::size_t i = 0; i < I; ++i) factors[n][i * R + r] = mean[i];
        }
    }
    return CpdModel(state.cards, std::move(lambda), std::move(factors));
}

struct PruneResult {
    CpdModel model;
    std::size_t detected_rank = 0;
};

/// Removes every component with lambda_r < eps and renormalises lambda. If all
/// components fall below eps the single largest is kept.
inline PruneResult prune(const CpdModel& model, double eps) {
    const std::size_t R = model.rank();
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < R; ++r) {
        if (!(model.lambda()[r] < eps)) keep.push_back(r);
    }
    if (keep.empty()) {
        const auto it = std::max_element(model.lambda().begin(), model.lambda().end());
        keep.push_back(static_cast<std::size_t>(it - model.lambda().begin()));
    }
    if (keep.size() == R) return {model, R};

    const std::size_t K = keep.size();
    std::vector<double> lambda(K);
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) total += model.lambda()[keep[k]];
    for (std::size_t k = 0; k < K; ++k) lambda[k] = model.lambda()[keep[k]] / total;
    std::vector<std::vector<double>> factors(model.num_vars());
    for (std::size_t n = 0; n < model.num_vars(); ++n) {
        const auto I = static_cast<std::size_t>(model.cardinality(n));
        factors[n].resize(I * K);
        for (std::size_t i = 0; i < I; ++i) {
            for (std::size_t k = 0; k < K; ++k) factors[n][i * K + k] = model.factor(n)[i * R + keep[k]];
        }
    }
    std::vector<int> cards(model.cardinalities().begin(), model.cardinalities().end());
    return {CpdModel(std::move(cards), std::move(lambda), std::move(factors)), K};
}

/// Random start scaled to the posterior magnitude:
/// alpha~_lambda,r = alpha_lambda + (T / R) u and
/// alpha~_{n,r,i} = alpha_factor + (T_obs,n / (R I_n)) u, with u ~ U(0.5, 1.5).
inline VariationalState initialize_state(const FitConfig& config, const Dataset& data, std::size_t R) {
    if (R < 1) throw DomainError("initialize_state: initial rank must be at least 1");
    Rng rng(config.seed, Stream::init);
    VariationalState s(data.cardinalities(), R);
    const auto T = static_cast<double>(data.num_samples());
    for (double& a : s.alpha_lambda) a = config.alpha_lambda + (T / static_cast<double>(R)) * rng.uniform(0.5, 1.5);
    for (std::size_t n = 0; n < data.num_vars(); ++n) {
        const auto observed = static_cast<double>(data.observed_count(n));
        const double scale = observed / (static_cast<double>(R) * data.cardinality(n));
        for (double& a : s.alpha_factor[n]) a = config.alpha_factor + scale * rng.uniform(0.5, 1.5);
    }
    s.refresh();
    return s;
}

/// Distinct samples with multiplicities. Identical samples share the same
/// responsibilities, so a sweep over patterns weighted by their counts gives
/// the same statistics as a sweep over every sample.
struct WeightedPatterns {
    std::size_t num_vars = 0;
    std::vector<Category> patterns;  // pattern-major, num_vars entries each
    std::vector<double> counts;

    std::size_t size() const noexcept { return counts.size(); }
    std::span<const Category> pattern(std::size_t k) const {
        return std::span<const Category>(patterns).subspan(k * num_vars, num_vars);
    }

    static WeightedPatterns from(const Dataset& data) {
        const std::size_t N = data.num_vars();
        std::vector<std::size_t> order(data.num_samples());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const auto x = data.sample(a);
            const auto y = data.sample(b);
            return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end());
        });
        WeightedPatterns out;
        out.num_vars = N;
        for (std::size_t k = 0; k < order.size(); ++k) {
            const auto s = data.sample(order[k]);
            if (k > 0 && std::equal(s.begin(), s.end(), data.sample(order[k - 1]).begin())) {
                out.counts.back() += 1.0;
            } else {
                out.patterns.insert(out.patterns.end(), s.begin(), s.end());
                out.counts.push_back(1.0);
            }
        }
        return out;
    }
};

namespace detail {

// exp(x) is exactly 0.0 in double precision below about -745.2.
inline constexpr double kUnderflowGap = -800.0;

/// Components whose rho is exactly 0 for every possible sample. ln gamma_r is
/// at most ln lambda~_r (all expected logs are <= 0) and the per-sample max is
/// at least max_r' of ln lambda~_r' + sum_n min_i ln a~_{n,r',i}.
inline std::vector<std::size_t> live_components(const VariationalState& state) {
    const std::size_t R = state.rank;
    double floor_max = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < R; ++r) {
        double lo = state.log_lambda[r];
        for (std::size_t n = 0; n < state.num_vars(); ++n) {
            double m = 0.0;
            for (int i = 0; i < state.cards[n]; ++i) m = std::min(m, state.log_factor[n][static_cast<std::size_t>(i) * R + r]);
            lo += m;
        }
        floor_max = std::max(floor_max, lo);
    }
    std::vector<std::size_t> live;
    for (std::size_t r = 0; r < R; ++r) {
        if (state.log_lambda[r] - floor_max > kUnderflowGap) live.push_back(r);
    }
    return live;
}

}  // namespace detail

/// Reusable buffers for the fused local/global pass. Components that cannot
/// receive any responsibility are left out of the inner loops; their
/// statistics are exactly zero either way.
class SweepWorkspace {
public:
    SufficientStats& run(const VariationalState& state, const WeightedPatterns& data, unsigned threads) {
        const std::vector<std::size_t> live = detail::live_components(state);
        const std::size_t K = live.size();
        const bool compact = K < state.rank;
        if (compact) {
            compact_ = VariationalState(state.cards, K);
            for (std::size_t k = 0; k < K; ++k) compact_.log_lambda[k] = state.log_lambda[live[k]];
            for (std::size_t n = 0; n < state.num_vars(); ++n) {
                for (int i = 0; i < state.cards[n]; ++i) {
                    const auto row = static_cast<std::size_t>(i);
                    for (std::size_t k = 0; k < K; ++k) {
                        compact_.log_factor[n][row * K + k] = state.log_factor[n][row * state.rank + live[k]];
                    }
                }
            }
        }
        const VariationalState& kernel_state = compact ? compact_ : state;

        const std::size_t blocks = num_blocks(data.size());
        if (partial_.size() != blocks || (blocks > 0 && partial_.front().lambda.size() != K)) {
            partial_.assign(blocks, SufficientStats(state.cards, K));
        }
        if (total_.lambda.size() != state.rank) total_ = SufficientStats(state.cards, state.rank);
        for_each_block(data.size(), threads, [&](std::size_t b, std::size_t begin, std::size_t end) {
            SufficientStats& st = partial_[b];
            st.clear();
            std::vector<double> rho(K);
            for (std::size_t k = begin; k < end; ++k) {
                const auto y = data.pattern(k);
                const double w = data.counts[k];
                st.entropy += w * detail::local_column(kernel_state, y, rho);
                detail::scatter(y, rho, w, st);
            }
        });
        total_.clear();
        if (!compact) {
            for (const auto& p : partial_) total_.add(p);
            return total_;
        }
        SufficientStats merged(state.cards, K);
        for (const auto& p : partial_) merged.add(p);
        for (std::size_t k = 0; k < K; ++k) total_.lambda[live[k]] = merged.lambda[k];
        for (std::size_t n = 0; n < state.num_vars(); ++n) {
            for (int i = 0; i < state.cards[n]; ++i) {
                const auto row = static_cast<std::size_t>(i);
                for (std::size_t k = 0; k < K; ++k) {
                    total_.factor[n][row * state.rank + live[k]] = merged.factor[n][row * K + k];
                }
            }
        }
        total_.entropy = merged.entropy;
        return total_;
    }

private:
    std::vector<SufficientStats> partial_;
    SufficientStats total_;
    VariationalState compact_;
};

/// One full coordinate-ascent sweep in place: rho, then alpha~_lambda, then
/// alpha~_factor, then the caches. Returns the ELBO at the new state.
inline double vb_sweep(const FitConfig& config, VariationalState& state, const WeightedPatterns& data,
                       SweepWorkspace& workspace) {
    if (!state.fresh) state.refresh();
    const SufficientStats& stats = workspace.run(state, data, config.threads);
    for (std::size_t r = 0; r < state.rank; ++r) state.alpha_lambda[r] = config.alpha_lambda + stats.lambda[r];
    for (std::size_t n = 0; n < state.num_vars(); ++n) {
        for (std::size_t k = 0; k < state.alpha_factor[n].size(); ++k) {
            state.alpha_factor[n][k] = config.alpha_factor + stats.factor[n][k];
        }
    }
    state.refresh();
    return elbo_from_statistics(config, state, stats);
}

enum class StopReason { converged, max_iters, max_runtime };

inline const char* to_string(StopReason s) {
    switch (s) {
        case StopReason::converged: return "converged";
        case StopReason::max_iters: return "max_iters";
        case StopReason::max_runtime: return "max_runtime";
    }
    return "unknown";
}

struct FitResult {
    CpdModel model;
    std::size_t detected_rank = 0;
    std::size_t initial_rank = 0;
    std::size_t iterations = 0;
    StopReason stop = StopReason::max_iters;
    std::vector<double> elbo_trace;
    /// (iteration, mean held-out NLL) pairs.
    std::vector<std::pair<std::size_t, double>> heldout_nll_trace;
    /// (iteration, lambda-block learning rate) pairs; SVI only.
    std::vector<std::pair<std::size_t, double>> learning_rate_trace;
    std::size_t batch_size = 0;
    VariationalState state;

    bool converged() const noexcept { return stop == StopReason::converged; }
};

namespace detail {

inline void require_all_observed(const Dataset& data) {
    for (std::size_t n = 0; n < data.num_vars(); ++n) {
        if (data.observed_count(n) == 0) {
            throw ConfigError("variable " + std::to_string(n + 1) + " is never observed in the training data");
        }
    }
}

/// Random split of sample indices into (kept, held out); held-out count is
/// round(fraction * T), at least 1 when fraction > 0 and T > 1.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(std::size_t T, double fraction,
                                                                                   std::uint64_t seed) {
    std::vector<std::size_t> perm(T);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed, Stream::holdout);
    for (std::size_t i = T; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    auto held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(T)));
    if (fraction > 0.0 && held == 0 && T > 1) held = 1;
    if (held >= T) held = T - 1;
    std::vector<std::size_t> out(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(held));
    std::vector<std::size_t> in(perm.begin() + static_cast<std::ptrdiff_t>(held), perm.end());
    std::sort(out.begin(), out.end());
    std::sort(in.begin(), in.end());
    return {std::move(in), std::move(out)};
}

inline bool change_below(double previous, double current, double tol, ToleranceMode mode) {
    const double diff = std::abs(current - previous);
    if (mode == ToleranceMode::absolute) return diff < tol;
    const double scale = std::abs(current);
    if (scale == 0.0) return previous == current;
    return diff / scale < tol;
}

}  // namespace detail

/// Full VB fit: iterate sweeps until the ELBO change (or held-out NLL change)
/// falls below the tolerance or max_iters is reached, then take
/// posterior means and prune.
inline FitResult vb_fit(const Dataset& data, const FitConfig& config) {
    config.validate();
    if (config.init_rank < 1) throw DomainError("vb_fit: initial rank must be at least 1");

    Dataset train;
    Dataset heldout;
    const bool use_nll = config.convergence == Convergence::heldout_nll;
    if (use_nll) {
        if (!(config.holdout_fraction > 0.0)) {
            throw ConfigError("vb_fit: held-out NLL convergence needs holdout_fraction > 0");
        }
        auto [in, out] = detail::holdout_split(data.num_samples(), config.holdout_fraction, config.seed);
        train = data.select(in);
        heldout = data.select(out);
    } else {
        train = data;
    }
    detail::require_all_observed(train);

    FitResult result;
    result.initial_rank = config.init_rank;
    VariationalState state = initialize_state(config, train, config.init_rank);
    const WeightedPatterns patterns = WeightedPatterns::from(train);
    SweepWorkspace workspace;
    double previous_nll = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 1; k <= config.max_iters; ++k) {
        const double elbo = vb_sweep(config, state, patterns, workspace);
        result.elbo_trace.push_back(elbo);
        result.iterations = k;
        bool done = false;
        if (use_nll) {
            const double nll = mean_nll(point_estimates(state), heldout, config.threads).value;
            result.heldout_nll_trace.emplace_back(k, nll);
            done = k > 1 && detail::change_below(previous_nll, nll, config.tol, config.tol_mode);
            previous_nll = nll;
        } else if (k > 1) {
            done = detail::change_below(result.elbo_trace[k - 2], elbo, config.tol, config.tol_mode);
        }
        if (done) {
            result.stop = StopReason::converged;
            break;
        }
    }
    auto pruned = prune(point_estimates(state), config.prune_eps);
    result.model = std::move(pruned.model);
    result.detected_rank = pruned.detected_rank;
    result.state = std::move(state);
    return result;
}

}  // namespace pmfvb
