#pragma once

// Joint PMF of N categorical variables in CPD (naive Bayes) form, the
// observation matrix, and the synthetic generative process.
//
// Categories are 1-based everywhere a value is exchanged with callers;
// 0 in an observation means "missing". Factor matrices are stored row-major
// (row = category - 1, column = component).

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pmfvb/error.hpp"
#include "pmfvb/random.hpp"
#include "pmfvb/special.hpp"

namespace pmfvb {

using Category = std::uint16_t;
inline constexpr Category kMissing = 0;
inline constexpr double kSimplexTolerance = 1e-12;

class CpdModel {
public:
    CpdModel() = default;

    /// `factors[n]` is row-major I_n x R. Throws DomainError on any violated
    /// simplex or shape constraint.
    CpdModel(std::vector<int> cardinalities, std::vector<double> lambda,
             std::vector<std::vector<double>> factors)
        : cards_(std::move(cardinalities)), lambda_(std::move(lambda)), factors_(std::move(factors)) {
        validate();
    }

    std::size_t num_vars() const noexcept { return cards_.size(); }
    std::size_t rank() const noexcept { return lambda_.size(); }
    std::span<const int> cardinalities() const noexcept { return cards_; }
    int cardinality(std::size_t n) const { return cards_[n]; }
    std::span<const double> lambda() const noexcept { return lambda_; }
    std::span<const double> factor(std::size_t n) const noexcept { return factors_[n]; }

    /// A_n(category, r) with 1-based category.
    double factor_entry(std::size_t n, int category, std::size_t r) const {
        return factors_[n][static_cast<std::size_t>(category - 1) * rank() + r];
    }

    /// Same tensor with components reordered: new component k is old perm[k].
    CpdModel permuted(std::span<const std::size_t> perm) const {
        std::vector<double> lam(rank());
        std::vector<std::vector<double>> fac(num_vars());
        for (std::size_t k = 0; k < rank(); ++k) lam[k] = lambda_[perm[k]];
        for (std::size_t n = 0; n < num_vars(); ++n) {
            fac[n].resize(factors_[n].size());
            for (int i = 0; i < cards_[n]; ++i) {
                for (std::size_t k = 0; k < rank(); ++k) {
                    fac[n][static_cast<std::size_t>(i) * rank() + k] =
                        factors_[n][static_cast<std::size_t>(i) * rank() + perm[k]];
                }
            }
        }
        return CpdModel(cards_, std::move(lam), std::move(fac));
    }

    /// Marginal PMF of variable n: sum_r lambda_r A_n(:, r).
    std::vector<double> marginal(std::size_t n) const {
        std::vector<double> out(static_cast<std::size_t>(cards_[n]), 0.0);
        for (std::size_t i = 0; i < out.size(); ++i) {
            for (std::size_t r = 0; r < rank(); ++r) out[i] += lambda_[r] * factors_[n][i * rank() + r];
        }
        return out;
    }

    friend bool operator==(const CpdModel&, const CpdModel&) = default;

private:
    void validate() const {
        if (cards_.empty()) throw DomainError("CpdModel: need at least one variable");
        if (lambda_.empty()) throw DomainError("CpdModel: rank must be at least 1");
        if (factors_.size() != cards_.size()) throw DomainError("CpdModel: one factor per variable required");
        check_simplex(lambda_, "loading vector");
        for (std::size_t n = 0; n < cards_.size(); ++n) {
            if (cards_[n] < 1 || cards_[n] > std::numeric_limits<Category>::max()) {
                throw DomainError("CpdModel: cardinality out of range for variable " + std::to_string(n + 1));
            }
            if (factors_[n].size() != static_cast<std::size_t>(cards_[n]) * rank()) {
                throw DomainError("CpdModel: factor " + std::to_string(n + 1) + " has wrong shape");
            }
            for (std::size_t r = 0; r < rank(); ++r) {
                double s = 0.0;
                for (int i = 0; i < cards_[n]; ++i) {
                    const double v = factors_[n][static_cast<std::size_t>(i) * rank() + r];
                    if (!(v >= 0.0) || !std::isfinite(v)) {
                        throw DomainError("CpdModel: negative or non-finite factor entry");
                    }
                    s += v;
                }
                if (std::abs(s - 1.0) > kSimplexTolerance) {
                    throw DomainError("CpdModel: factor " + std::to_string(n + 1) + " column " +
                                      std::to_string(r + 1) + " does not sum to 1");
                }
            }
        }
    }

    static void check_simplex(std::span<const double> v, const char* what) {
        double s = 0.0;
        for (double x : v) {
            if (!(x >= 0.0) || !std::isfinite(x)) {
                throw DomainError(std::string("CpdModel: negative or non-finite entry in ") + what);
            }
            s += x;
        }
        if (std::abs(s - 1.0) > kSimplexTolerance) {
            throw DomainError(std::string("CpdModel: ") + what + " does not sum to 1");
        }
    }

    std::vector<int> cards_;
    std::vector<double> lambda_;
    std::vector<std::vector<double>> factors_;
};

/// N x T categorical observations. Stored sample-major so that one sample's
/// N entries are contiguous.
class Dataset {
public:
    Dataset() = default;

    /// All entries missing.
    Dataset(std::vector<int> cardinalities, std::size_t num_samples)
        : cards_(std::move(cardinalities)), samples_(num_samples),
          obs_(cards_.size() * num_samples, kMissing) {
        check_cards();
    }

    /// `sample_major[t * N + n]` holds y_{n,t}.
    Dataset(std::vector<int> cardinalities, std::size_t num_samples, std::vector<Category> sample_major)
        : cards_(std::move(cardinalities)), samples_(num_samples), obs_(std::move(sample_major)) {
        check_cards();
        if (obs_.size() != cards_.size() * samples_) throw DomainError("Dataset: observation count mismatch");
        for (std::size_t t = 0; t < samples_; ++t) {
            for (std::size_t n = 0; n < cards_.size(); ++n) {
                if (obs_[t * cards_.size() + n] > cards_[n]) {
                    throw DomainError("Dataset: category out of range at variable " + std::to_string(n + 1) +
                                      ", sample " + std::to_string(t + 1));
                }
            }
        }
    }

    std::size_t num_vars() const noexcept { return cards_.size(); }
    std::size_t num_samples() const noexcept { return samples_; }
    std::span<const int> cardinalities() const noexcept { return cards_; }
    int cardinality(std::size_t n) const { return cards_[n]; }

    Category at(std::size_t n, std::size_t t) const { return obs_[t * cards_.size() + n]; }

    void set(std::size_t n, std::size_t t, Category value) {
        if (value > cards_[n]) throw DomainError("Dataset: category out of range");
        obs_[t * cards_.size() + n] = value;
    }

    std::span<const Category> sample(std::size_t t) const {
        return std::span<const Category>(obs_).subspan(t * cards_.size(), cards_.size());
    }

    std::span<const Category> raw() const noexcept { return obs_; }

    /// Number of observed (non-zero) entries of variable n.
    std::size_t observed_count(std::size_t n) const {
        std::size_t c = 0;
        for (std::size_t t = 0; t < samples_; ++t) c += at(n, t) != kMissing;
        return c;
    }

    std::size_t total_observed() const {
        std::size_t c = 0;
        for (Category v : obs_) c += v != kMissing;
        return c;
    }

    /// New dataset holding the given samples in order.
    Dataset select(std::span<const std::size_t> columns) const {
        std::vector<Category> out;
        out.reserve(columns.size() * cards_.size());
        for (std::size_t t : columns) {
            const auto s = sample(t);
            out.insert(out.end(), s.begin(), s.end());
        }
        Dataset d;
        d.cards_ = cards_;
        d.samples_ = columns.size();
        d.obs_ = std::move(out);
        return d;
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    void check_cards() const {
        if (cards_.empty()) throw DomainError("Dataset: need at least one variable");
        for (int c : cards_) {
            if (c < 1 || c > std::numeric_limits<Category>::max()) {
                throw DomainError("Dataset: cardinality out of range");
            }
        }
    }

    std::vector<int> cards_;
    std::size_t samples_ = 0;
    std::vector<Category> obs_;
};

/// X(i_1, ..., i_N) = sum_r lambda_r prod_n A_n(i_n, r), 1-based indices.
inline double cpd_element(const CpdModel& model, std::span<const int> index) {
    if (index.size() != model.num_vars()) throw DomainError("cpd_element: index has wrong length");
    for (std::size_t n = 0; n < index.size(); ++n) {
        if (index[n] < 1 || index[n] > model.cardinality(n)) {
            throw DomainError("cpd_element: index out of range for variable " + std::to_string(n + 1));
        }
    }
    double total = 0.0;
    for (std::size_t r = 0; r < model.rank(); ++r) {
        double p = model.lambda()[r];
        for (std::size_t n = 0; n < index.size(); ++n) p *= model.factor_entry(n, index[n], r);
        total += p;
    }
    return total;
}

/// ln sum_r lambda_r prod_{n observed} A_n(y_n, r). Missing entries are
/// marginalised out, so an all-missing sample has log-likelihood 0.
inline double observed_log_likelihood(const CpdModel& model, std::span<const Category> y) {
    if (y.size() != model.num_vars()) throw DomainError("observed_log_likelihood: sample has wrong length");
    const std::size_t R = model.rank();
    std::vector<double> logs(R);
    for (std::size_t r = 0; r < R; ++r) logs[r] = std::log(model.lambda()[r]);
    for (std::size_t n = 0; n < y.size(); ++n) {
        if (y[n] == kMissing) continue;
        if (y[n] > model.cardinality(n)) {
            throw DomainError("observed_log_likelihood: category out of range for variable " +
                              std::to_string(n + 1));
        }
        const double* row = model.factor(n).data() + static_cast<std::size_t>(y[n] - 1) * R;
        for (std::size_t r = 0; r < R; ++r) logs[r] += std::log(row[r]);
    }
    return log_sum_exp(logs);
}

/// Random model: lambda entries ~ U(0.3, 1), factor entries ~ U(0, 1), each
/// then normalised to the simplex.
inline CpdModel sample_model(std::size_t num_vars, std::span<const int> cardinalities, std::size_t rank,
                             std::uint64_t seed) {
    if (num_vars < 1 || rank < 1) throw DomainError("sample_model: N and R must be at least 1");
    if (cardinalities.size() != num_vars) throw DomainError("sample_model: need one cardinality per variable");
    for (int c : cardinalities) {
        if (c < 2) throw DomainError("sample_model: cardinalities must be at least 2");
    }
    Rng rng(seed, Stream::model);
    std::vector<double> lambda(rank);
    for (double& l : lambda) l = rng.uniform(0.3, 1.0);
    const double lsum = std::accumulate(lambda.begin(), lambda.end(), 0.0);
    for (double& l : lambda) l /= lsum;

    std::vector<std::vector<double>> factors(num_vars);
    for (std::size_t n = 0; n < num_vars; ++n) {
        const auto I = static_cast<std::size_t>(cardinalities[n]);
        auto& f = factors[n];
        f.resize(I * rank);
        for (double& v : f) v = rng.uniform();
        for (std::size_t r = 0; r < rank; ++r) {
            double s = 0.0;
            for (std::size_t i = 0; i < I; ++i) s += f[i * rank + r];
            for (std::size_t i = 0; i < I; ++i) f[i * rank + r] /= s;
        }
    }
    return CpdModel(std::vector<int>(cardinalities.begin(), cardinalities.end()), std::move(lambda),
                    std::move(factors));
}

/// Draws T samples: component r ~ lambda, each x_n ~ A_n(:, r), then each
/// entry independently replaced by 0 with probability `outage`.
inline Dataset sample_dataset(const CpdModel& model, std::size_t num_samples, double outage,
                              std::uint64_t seed) {
    if (!(outage >= 0.0 && outage <= 1.0)) throw DomainError("sample_dataset: outage must lie in [0, 1]");
    const std::size_t N = model.num_vars();
    const std::size_t R = model.rank();

    std::vector<double> lambda_cdf(R);
    std::partial_sum(model.lambda().begin(), model.lambda().end(), lambda_cdf.begin());
    // cdf[n][r * I_n + i]
    std::vector<std::vector<double>> cdf(N);
    for (std::size_t n = 0; n < N; ++n) {
        const auto I = static_cast<std::size_t>(model.cardinality(n));
        cdf[n].resize(I * R);
        for (std::size_t r = 0; r < R; ++r) {
            double acc = 0.0;
            for (std::size_t i = 0; i < I; ++i) {
                acc += model.factor(n)[i * R + r];
                cdf[n][r * I + i] = acc;
            }
        }
    }

    Rng hidden(seed, Stream::hidden);
    Rng categorical(seed, Stream::categorical);
    Rng outage_rng(seed, Stream::outage);
    std::vector<Category> obs(N * num_samples);
    for (std::size_t t = 0; t < num_samples; ++t) {
        const std::size_t r = hidden.categorical(lambda_cdf);
        for (std::size_t n = 0; n < N; ++n) {
            const auto I = static_cast<std::size_t>(model.cardinality(n));
            const std::span<const double> col(cdf[n].data() + r * I, I);
            const auto x = static_cast<Category>(categorical.categorical(col) + 1);
            obs[t * N + n] = outage_rng.uniform() < outage ? kMissing : x;
        }
    }
    return Dataset(std::vector<int>(model.cardinalities().begin(), model.cardinalities().end()), num_samples,
                   std::move(obs));
}

/// Largest R with sum_n min(I_n, R) >= 2R + (N - 1), or 0 if none.
///
/// R = 1 never satisfies the inequality, so every R up to the point where the
/// left side stops growing is scanned rather than stopping at the first failure.
inline std::size_t kruskal_max_rank(std::span<const int> cardinalities) {
    const std::size_t N = cardinalities.size();
    if (N < 2) throw DomainError("kruskal_max_rank: need at least two variables");
    long long total = 0;
    for (int c : cardinalities) total += c;
    std::size_t best = 0;
    // LHS <= sum I_n, so no R beyond (sum I_n - N + 1) / 2 can qualify.
    const auto limit = static_cast<std::size_t>(std::max<long long>(1, (total - static_cast<long long>(N) + 1) / 2));
    for (std::size_t R = 1; R <= limit; ++R) {
        long long lhs = 0;
        for (int c : cardinalities) lhs += std::min<long long>(c, static_cast<long long>(R));
        if (lhs >= 2 * static_cast<long long>(R) + static_cast<long long>(N) - 1) best = R;
    }
    return best;
}

}  // namespace pmfvb
