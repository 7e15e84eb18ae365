#pragma once

// Special functions and Dirichlet helpers used by every variational update.
// Everything here is a pure function of its arguments.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pmfvb/error.hpp"

namespace pmfvb {

namespace detail {

inline void require_positive_finite(double x, const char* fn) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw DomainError(std::string(fn) + ": argument must be positive and finite, got " +
                          std::to_string(x));
    }
}

}  // namespace detail

/// Digamma function psi(x) = d/dx ln Gamma(x) for x > 0.
///
/// The argument is shifted above 10 with psi(x) = psi(x + 1) - 1/x and the
/// asymptotic Bernoulli series is evaluated there. Absolute error is around
/// 1e-14 for moderate x; for x -> 0 the result is dominated by -1/x and the
/// error is relative to that term.
inline double digamma(double x) {
    detail::require_positive_finite(x, "digamma");
    double shift = 0.0;
    while (x < 10.0) {
        shift += 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // B_2k / (2k) for k = 1..7
    const double series =
        inv2 * (1.0 / 12.0 -
                inv2 * (1.0 / 120.0 -
                        inv2 * (1.0 / 252.0 -
                                inv2 * (1.0 / 240.0 -
                                        inv2 * (1.0 / 132.0 -
                                                inv2 * (691.0 / 32760.0 - inv2 * (1.0 / 12.0)))))));
    return std::log(x) - 0.5 * inv - series - shift;
}

namespace detail {

// (-1)^k (zeta(k) - 1) / k for k = 2..30.
inline constexpr double kLogGammaSeries[] = {
    3.22467033424113203e-01,  -6.73523010531981020e-02, 2.05808084277845464e-02,  -7.38555102867398568e-03,
    2.89051033074152336e-03,  -1.19275391170326102e-03, 5.09669524743042450e-04,  -2.23154758453579386e-04,
    9.94575127818085310e-05,  -4.49262367381331420e-05, 2.05072127756706911e-05,  -9.43948827526839672e-06,
    4.37486678990748817e-06,  -2.03921575380136619e-06, 9.55141213040741935e-07,  -4.49246919876456619e-07,
    2.12071848055546646e-07,  -1.00432248239680991e-07, 4.76981016936398040e-08,  -2.27110946089431635e-08,
    1.08386592148969546e-08,  -5.18347504197004664e-09, 2.48367454380247848e-09,  -1.19214014058609115e-09,
    5.73136724167886225e-10,  -2.75952288512423336e-10, 1.33047643742444888e-10,  -6.42296456383809960e-11,
    3.10442477473222756e-11,
};

// sum_{k>=2} (-1)^k (zeta(k) - 1) / k * z^k for |z| <= 0.5.
inline double log_gamma_tail(double z) {
    double acc = 0.0;
    for (std::size_t k = std::size(kLogGammaSeries); k-- > 0;) acc = acc * z + kLogGammaSeries[k];
    return acc * z * z;
}

}  // namespace detail

/// Natural log of the gamma function for x > 0.
///
/// On [0.5, 2.5] the Taylor expansion of ln Gamma(1 + z) is used so that the
/// roots at 1 and 2 keep full relative accuracy; elsewhere the Stirling series
/// after an upward shift to x >= 10.
inline double log_gamma(double x) {
    detail::require_positive_finite(x, "log_gamma");
    constexpr double euler_gamma = 0.57721566490153286061;
    if (x >= 0.5 && x < 1.5) {
        const double z = x - 1.0;
        return (1.0 - euler_gamma) * z - std::log1p(z) + detail::log_gamma_tail(z);
    }
    if (x >= 1.5 && x <= 2.5) {
        const double z = x - 2.0;
        return (1.0 - euler_gamma) * z + detail::log_gamma_tail(z);
    }
    double prod = 1.0;
    while (x < 10.0) {
        prod *= x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    const double series =
        inv * (1.0 / 12.0 -
               inv2 * (1.0 / 360.0 -
                       inv2 * (1.0 / 1260.0 -
                               inv2 * (1.0 / 1680.0 -
                                       inv2 * (1.0 / 1188.0 -
                                               inv2 * (691.0 / 360360.0 - inv2 * (1.0 / 156.0)))))));
    constexpr double half_log_two_pi = 0.91893853320467274178032973640562;
    return (x - 0.5) * std::log(x) - x + half_log_two_pi + series - std::log(prod);
}

/// Concentration parameters of a K-dimensional Dirichlet distribution.
class DirichletParams {
public:
    DirichletParams() = default;

    explicit DirichletParams(std::vector<double> alpha) : alpha_(std::move(alpha)) {
        if (alpha_.empty()) throw DomainError("DirichletParams: K must be at least 1");
        for (double a : alpha_) {
            if (!(a > 0.0) || !std::isfinite(a)) {
                throw DomainError("DirichletParams: concentrations must be positive and finite");
            }
        }
    }

    /// Symmetric Dirichlet with K equal concentrations.
    static DirichletParams symmetric(std::size_t k, double alpha) {
        return DirichletParams(std::vector<double>(k, alpha));
    }

    std::span<const double> values() const noexcept { return alpha_; }
    std::size_t size() const noexcept { return alpha_.size(); }
    double operator[](std::size_t k) const { return alpha_[k]; }
    double sum() const noexcept { return std::accumulate(alpha_.begin(), alpha_.end(), 0.0); }

private:
    std::vector<double> alpha_;
};

/// ln C(alpha) = ln Gamma(sum alpha) - sum ln Gamma(alpha_k).
inline double log_dirichlet_norm(std::span<const double> alpha) {
    double total = 0.0;
    double acc = 0.0;
    for (double a : alpha) {
        total += a;
        acc -= log_gamma(a);
    }
    return acc + log_gamma(total);
}

inline double log_dirichlet_norm(const DirichletParams& params) {
    return log_dirichlet_norm(params.values());
}

/// ln C for a symmetric Dirichlet of dimension k and concentration alpha.
inline double log_dirichlet_norm_symmetric(std::size_t k, double alpha) {
    return log_gamma(static_cast<double>(k) * alpha) - static_cast<double>(k) * log_gamma(alpha);
}

/// E[ln mu_k] under Dir(alpha), written into `out` (same length as alpha).
inline void dirichlet_expect_log(std::span<const double> alpha, std::span<double> out) {
    double total = 0.0;
    for (double a : alpha) total += a;
    const double psi_total = digamma(total);
    for (std::size_t k = 0; k < alpha.size(); ++k) out[k] = digamma(alpha[k]) - psi_total;
}

inline std::vector<double> dirichlet_expect_log(const DirichletParams& params) {
    std::vector<double> out(params.size());
    dirichlet_expect_log(params.values(), out);
    return out;
}

inline std::vector<double> dirichlet_mean(const DirichletParams& params) {
    const double total = params.sum();
    std::vector<double> out(params.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = params[k] / total;
    return out;
}

/// ln sum_k exp(v_k), stabilised by subtracting the maximum.
inline double log_sum_exp(std::span<const double> v) {
    if (v.empty()) throw DomainError("log_sum_exp: empty input");
    const double m = *std::max_element(v.begin(), v.end());
    if (m == -std::numeric_limits<double>::infinity()) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace pmfvb
