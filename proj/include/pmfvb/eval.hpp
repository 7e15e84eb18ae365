#pragma once

// Accuracy metrics: exact KL divergence between two PMF tensors, held-out
// negative log-likelihood, conditional-expectation prediction, RMSE/MAE.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pmfvb/error.hpp"
#include "pmfvb/model.hpp"
#include "pmfvb/parallel.hpp"

namespace pmfvb {

inline constexpr std::uint64_t kDefaultKldCellCap = 10'000'000;

struct MetricReport {
    std::optional<double> kld;
    std::optional<double> mean_nll;
    std::optional<double> rmse;
    std::optional<double> mae;
    std::size_t n_predictions = 0;
    std::size_t n_fallbacks = 0;
    std::vector<std::string> diagnostics;
};

struct KldResult {
    double value = 0.0;
    /// Set when some cell is positive under the truth but zero under the estimate.
    std::optional<std::string> diagnostic;
};

namespace detail {

inline std::uint64_t cell_count(std::span<const int> cards) {
    std::uint64_t cells = 1;
    for (int c : cards) {
        if (cells > std::numeric_limits<std::uint64_t>::max() / static_cast<std::uint64_t>(c)) {
            return std::numeric_limits<std::uint64_t>::max();
        }
        cells *= static_cast<std::uint64_t>(c);
    }
    return cells;
}

// Calls fn(p_truth, p_est) for every cell with index = first-mode-fastest
// enumeration restricted to cells whose first-mode index lies in one block of
// the last mode. Partial products over modes 1..N-1 are cached per level.
template <class Fn>
void enumerate_cells(const CpdModel& a, const CpdModel& b, std::size_t last_index, Fn&& fn) {
    const std::size_t N = a.num_vars();
    const std::size_t Ra = a.rank();
    const std::size_t Rb = b.rank();
    // prefix[level] holds lambda_r * prod_{n >= level} A_n(i_n, r) for the current suffix.
    std::vector<std::vector<double>> pa(N + 1, std::vector<double>(Ra));
    std::vector<std::vector<double>> pb(N + 1, std::vector<double>(Rb));
    for (std::size_t r = 0; r < Ra; ++r) pa[N][r] = a.lambda()[r];
    for (std::size_t r = 0; r < Rb; ++r) pb[N][r] = b.lambda()[r];

    std::vector<std::size_t> idx(N, 0);
    idx[N - 1] = last_index;
    auto fill = [&](std::size_t level) {
        const std::size_t n = level;
        const double* ra = a.factor(n).data() + idx[n] * Ra;
        const double* rb = b.factor(n).data() + idx[n] * Rb;
        for (std::size_t r = 0; r < Ra; ++r) pa[n][r] = pa[n + 1][r] * ra[r];
        for (std::size_t r = 0; r < Rb; ++r) pb[n][r] = pb[n + 1][r] * rb[r];
    };
    for (std::size_t level = N; level-- > 0;) fill(level);
    for (;;) {
        double xa = 0.0;
        double xb = 0.0;
        for (std::size_t r = 0; r < Ra; ++r) xa += pa[0][r];
        for (std::size_t r = 0; r < Rb; ++r) xb += pb[0][r];
        fn(xa, xb);
        // odometer over modes 0..N-2
        std::size_t n = 0;
        while (n + 1 < N) {
            if (++idx[n] < static_cast<std::size_t>(a.cardinality(n))) break;
            idx[n] = 0;
            ++n;
        }
        if (n + 1 >= N) return;
        for (std::size_t level = n + 1; level-- > 0;) fill(level);
    }
}

}  // namespace detail

/// D(truth || estimate) = sum over all cells of X ln(X / X_hat), by exact
/// enumeration. Refuses (DomainError) when the tensor has more than `cell_cap`
/// cells. A positive truth cell with a zero estimate gives +inf and a diagnostic.
inline KldResult kld_full(const CpdModel& truth, const CpdModel& estimate, unsigned threads = 1,
                          std::uint64_t cell_cap = kDefaultKldCellCap) {
    if (truth.num_vars() != estimate.num_vars()) throw DomainError("kld_full: models differ in N");
    for (std::size_t n = 0; n < truth.num_vars(); ++n) {
        if (truth.cardinality(n) != estimate.cardinality(n)) {
            throw DomainError("kld_full: models differ in cardinality of variable " + std::to_string(n + 1));
        }
    }
    const std::uint64_t cells = detail::cell_count(truth.cardinalities());
    if (cells > cell_cap) {
        throw DomainError("kld_full: tensor has " + std::to_string(cells) + " cells, above the enumeration cap of " +
                          std::to_string(cell_cap) +
                          "; compare on held-out NLL instead or raise the cap explicitly");
    }
    const std::size_t N = truth.num_vars();
    const auto last = static_cast<std::size_t>(truth.cardinality(N - 1));
    std::vector<double> partial(last, 0.0);
    std::vector<char> zero_hit(last, 0);
    // One block per index of the last mode; merged in order.
    for_each_block(
        last, threads,
        [&](std::size_t, std::size_t begin, std::size_t end) {
            for (std::size_t li = begin; li < end; ++li) {
                double acc = 0.0;
                detail::enumerate_cells(truth, estimate, li, [&](double x, double xhat) {
                    if (x <= 0.0) return;
                    if (xhat <= 0.0) {
                        zero_hit[li] = 1;
                        return;
                    }
                    acc += x * std::log(x / xhat);
                });
                partial[li] = acc;
            }
        },
        1);
    KldResult out;
    for (std::size_t li = 0; li < last; ++li) {
        if (zero_hit[li]) {
            out.value = std::numeric_limits<double>::infinity();
            out.diagnostic = "estimate assigns zero probability to a cell with positive true probability";
            return out;
        }
        out.value += partial[li];
    }
    return out;
}

struct NllResult {
    double value = 0.0;
    std::optional<std::string> diagnostic;
};

/// -(1/T) sum_t ln p(y_t), missing entries marginalised.
inline NllResult mean_nll(const CpdModel& model, const Dataset& data, unsigned threads = 1) {
    const std::size_t T = data.num_samples();
    if (T == 0) throw DomainError("mean_nll: dataset is empty");
    std::vector<double> partial(num_blocks(T), 0.0);
    for_each_block(T, threads, [&](std::size_t b, std::size_t begin, std::size_t end) {
        double acc = 0.0;
        for (std::size_t t = begin; t < end; ++t) acc += observed_log_likelihood(model, data.sample(t));
        partial[b] = acc;
    });
    double total = 0.0;
    for (double p : partial) total += p;
    NllResult out{-total / static_cast<double>(T), std::nullopt};
    if (std::isinf(out.value)) out.diagnostic = "a sample has zero probability under the model";
    return out;
}

struct Prediction {
    double value = 0.0;
    /// True when the observed context had zero probability and the
    /// unconditional marginal mean was returned instead.
    bool fallback = false;
};

/// E[X_target | observed entries of y] under the model. y[target] is ignored.
inline Prediction predict_entry(const CpdModel& model, std::span<const Category> y, std::size_t target) {
    const std::size_t N = model.num_vars();
    const std::size_t R = model.rank();
    if (y.size() != N) throw DomainError("predict_entry: sample has wrong length");
    if (target >= N) throw DomainError("predict_entry: target variable out of range");

    // Posterior over components in log domain, then renormalised.
    std::vector<double> logw(R);
    for (std::size_t r = 0; r < R; ++r) logw[r] = std::log(model.lambda()[r]);
    for (std::size_t n = 0; n < N; ++n) {
        if (n == target || y[n] == kMissing) continue;
        if (y[n] > model.cardinality(n)) {
            throw DomainError("predict_entry: category out of range for variable " + std::to_string(n + 1));
        }
        const double* row = model.factor(n).data() + static_cast<std::size_t>(y[n] - 1) * R;
        for (std::size_t r = 0; r < R; ++r) logw[r] += std::log(row[r]);
    }
    const double lse = log_sum_exp(logw);
    const auto I = static_cast<std::size_t>(model.cardinality(target));
    const auto& A = model.factor(target);
    Prediction out;
    std::vector<double> w(R);
    if (!std::isfinite(lse)) {
        out.fallback = true;
        w.assign(model.lambda().begin(), model.lambda().end());
    } else {
        for (std::size_t r = 0; r < R; ++r) w[r] = std::exp(logw[r] - lse);
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < I; ++i) {
        double p = 0.0;
        for (std::size_t r = 0; r < R; ++r) p += w[r] * A[i * R + r];
        num += static_cast<double>(i + 1) * p;
        den += p;
    }
    out.value = num / den;
    return out;
}

struct ErrorPair {
    double rmse = 0.0;
    double mae = 0.0;
};

inline ErrorPair rmse_mae(std::span<const double> predictions, std::span<const double> truths) {
    if (predictions.size() != truths.size()) throw DomainError("rmse_mae: length mismatch");
    if (predictions.empty()) throw DomainError("rmse_mae: no predictions");
    double sq = 0.0;
    double ab = 0.0;
    for (std::size_t k = 0; k < predictions.size(); ++k) {
        const double e = predictions[k] - truths[k];
        sq += e * e;
        ab += std::abs(e);
    }
    const auto n = static_cast<double>(predictions.size());
    return {std::sqrt(sq / n), ab / n};
}

}  // namespace pmfvb
