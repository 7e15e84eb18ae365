#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "pmfvb/model.hpp"

using namespace pmfvb;

namespace {

// Dense tensor by accumulating rank-one outer products, first mode fastest.
std::vector<double> materialize(const CpdModel& m) {
    std::size_t cells = 1;
    for (int c : m.cardinalities()) cells *= static_cast<std::size_t>(c);
    std::vector<double> x(cells, 0.0);
    std::vector<int> idx(m.num_vars());
    for (std::size_t r = 0; r < m.rank(); ++r) {
        for (std::size_t cell = 0; cell < cells; ++cell) {
            std::size_t rem = cell;
            double p = m.lambda()[r];
            for (std::size_t n = 0; n < m.num_vars(); ++n) {
                const auto I = static_cast<std::size_t>(m.cardinality(n));
                p *= m.factor_entry(n, static_cast<int>(rem % I) + 1, r);
                rem /= I;
            }
            x[cell] += p;
        }
    }
    return x;
}

std::size_t linear_index(const CpdModel& m, const std::vector<int>& idx1) {
    std::size_t cell = 0;
    std::size_t stride = 1;
    for (std::size_t n = 0; n < m.num_vars(); ++n) {
        cell += static_cast<std::size_t>(idx1[n] - 1) * stride;
        stride *= static_cast<std::size_t>(m.cardinality(n));
    }
    return cell;
}

CpdModel diagonal_model(double l1) {
    // I = [2, 2], identity factor columns.
    return CpdModel({2, 2}, {l1, 1.0 - l1}, {{1.0, 0.0, 0.0, 1.0}, {1.0, 0.0, 0.0, 1.0}});
}

}  // namespace

TEST(CpdModel, RejectsInvalidSimplex) {
    EXPECT_THROW(CpdModel({2}, {0.5, 0.6}, {{0.5, 0.5, 0.5, 0.5}}), DomainError);
    EXPECT_THROW(CpdModel({2}, {0.5, 0.5}, {{0.5, 0.6, 0.6, 0.4}}), DomainError);
    EXPECT_THROW(CpdModel({2}, {1.0}, {{0.5, 0.5, 0.0}}), DomainError);
    EXPECT_THROW(CpdModel({2}, {1.5, -0.5}, {{0.5, 0.5, 0.5, 0.5}}), DomainError);
    EXPECT_NO_THROW(CpdModel({2}, {1.0}, {{0.25, 0.75}}));
}

TEST(CpdElement, RankOneUniform) {
    const CpdModel m({2, 4, 5}, {1.0}, {std::vector<double>(2, 0.5), std::vector<double>(4, 0.25),
                                         std::vector<double>(5, 0.2)});
    const std::vector<int> idx{2, 3, 5};
    EXPECT_NEAR(cpd_element(m, idx), 1.0 / 40.0, 1e-16);
}

TEST(CpdElement, DiagonalTensor) {
    const auto m = diagonal_model(0.5);
    EXPECT_DOUBLE_EQ(cpd_element(m, std::vector<int>{1, 1}), 0.5);
    EXPECT_DOUBLE_EQ(cpd_element(m, std::vector<int>{1, 2}), 0.0);
}

TEST(CpdElement, MatchesMaterializedTensor) {
    const std::vector<int> cards{3, 3, 3};
    const auto m = sample_model(3, cards, 2, 7);
    const auto x = materialize(m);
    const std::vector<int> idx{2, 1, 3};
    EXPECT_NEAR(cpd_element(m, idx), x[linear_index(m, idx)], 1e-15);
}

TEST(CpdElement, OutOfRange) {
    const auto m = diagonal_model(0.3);
    EXPECT_THROW(cpd_element(m, std::vector<int>{0, 1}), DomainError);
    EXPECT_THROW(cpd_element(m, std::vector<int>{1, 3}), DomainError);
    EXPECT_THROW(cpd_element(m, std::vector<int>{1}), DomainError);
}

TEST(CpdElement, TensorSumsToOne) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const std::vector<int> cards{4, 5, 3, 6};
        const auto m = sample_model(4, cards, 3 + seed, seed);
        const auto x = materialize(m);
        EXPECT_NEAR(std::accumulate(x.begin(), x.end(), 0.0), 1.0, 1e-9);
    }
}

TEST(ObservedLogLikelihood, AllMissingIsZero) {
    const std::vector<int> cards{3, 4};
    const auto m = sample_model(2, cards, 3, 1);
    const std::vector<Category> y{0, 0};
    EXPECT_NEAR(observed_log_likelihood(m, y), 0.0, 1e-15);
}

TEST(ObservedLogLikelihood, FullyObservedMatchesElement) {
    const std::vector<int> cards{3, 4, 2};
    const auto m = sample_model(3, cards, 4, 2);
    const std::vector<Category> y{2, 4, 1};
    const std::vector<int> idx{2, 4, 1};
    EXPECT_NEAR(observed_log_likelihood(m, y), std::log(cpd_element(m, idx)), 1e-12);
}

TEST(ObservedLogLikelihood, MarginalisesMissingEntries) {
    const std::vector<int> cards{3, 4, 2, 3};
    const auto m = sample_model(4, cards, 3, 3);
    const std::vector<Category> y{2, 0, 1, 0};
    double total = 0.0;
    for (int i1 = 1; i1 <= 4; ++i1) {
        for (int i3 = 1; i3 <= 3; ++i3) total += cpd_element(m, std::vector<int>{2, i1, 1, i3});
    }
    EXPECT_NEAR(observed_log_likelihood(m, y), std::log(total), 1e-12);
}

TEST(ObservedLogLikelihood, OutOfRange) {
    const std::vector<int> cards{3, 4};
    const auto m = sample_model(2, cards, 2, 4);
    EXPECT_THROW(observed_log_likelihood(m, std::vector<Category>{4, 1}), DomainError);
}

TEST(ObservedLogLikelihood, PermutationInvariant) {
    const std::vector<int> cards{5, 3, 4};
    const auto m = sample_model(3, cards, 4, 5);
    std::vector<std::size_t> perm{2, 0, 3, 1};
    const auto p = m.permuted(perm);
    const std::vector<Category> ys[] = {{1, 2, 3}, {0, 3, 4}, {5, 0, 0}, {0, 0, 0}};
    for (const auto& y : ys) EXPECT_NEAR(observed_log_likelihood(m, y), observed_log_likelihood(p, y), 1e-12);
}

TEST(ObservedLogLikelihood, OneHotLatentSumMatches) {
    // sum over one-hot z of p(y | z) p(z | lambda), evaluated with explicit
    // exponents z_r in {0, 1}.
    const std::vector<int> cards{3, 2, 4};
    const auto m = sample_model(3, cards, 3, 6);
    const std::vector<Category> y{3, 1, 2};
    double total = 0.0;
    for (std::size_t hot = 0; hot < m.rank(); ++hot) {
        double py = 1.0;
        double pz = 1.0;
        for (std::size_t r = 0; r < m.rank(); ++r) {
            const double z = r == hot ? 1.0 : 0.0;
            pz *= std::pow(m.lambda()[r], z);
            for (std::size_t n = 0; n < m.num_vars(); ++n) py *= std::pow(m.factor_entry(n, y[n], r), z);
        }
        total += py * pz;
    }
    const std::vector<int> idx{3, 1, 2};
    EXPECT_NEAR(cpd_element(m, idx), total, 1e-12);
}

TEST(SampleModel, InvariantsAndDeterminism) {
    const std::vector<int> cards{10, 4, 7};
    for (std::size_t R : {1u, 2u, 5u, 23u}) {
        const auto a = sample_model(3, cards, R, 99);
        const auto b = sample_model(3, cards, R, 99);
        EXPECT_EQ(a, b);
        const double floor = 0.3 / (0.3 + static_cast<double>(R - 1));
        for (double l : a.lambda()) EXPECT_GE(l, floor);
    }
    EXPECT_NE(sample_model(3, cards, 4, 1), sample_model(3, cards, 4, 2));
}

TEST(SampleDataset, OutageExtremes) {
    const std::vector<int> cards{3, 3, 3};
    const auto m = sample_model(3, cards, 2, 1);
    const auto all_missing = sample_dataset(m, 500, 1.0, 1);
    EXPECT_EQ(all_missing.total_observed(), 0u);
    const auto none_missing = sample_dataset(m, 500, 0.0, 1);
    EXPECT_EQ(none_missing.total_observed(), 1500u);
    EXPECT_EQ(sample_dataset(m, 500, 0.3, 8), sample_dataset(m, 500, 0.3, 8));
}

TEST(SampleDataset, MarginalFrequenciesWithinFourSigma) {
    const std::vector<int> cards{10, 10, 10, 10, 10};
    const auto m = sample_model(5, cards, 5, 21);
    const std::size_t T = 100000;
    const auto d = sample_dataset(m, T, 0.0, 22);
    std::vector<double> counts(10, 0.0);
    for (std::size_t t = 0; t < T; ++t) counts[d.at(0, t) - 1] += 1.0;
    for (int i = 1; i <= 10; ++i) {
        double p = 0.0;
        for (std::size_t r = 0; r < m.rank(); ++r) p += m.lambda()[r] * m.factor_entry(0, i, r);
        const double sd = std::sqrt(static_cast<double>(T) * p * (1.0 - p));
        EXPECT_LE(std::abs(counts[static_cast<std::size_t>(i - 1)] - static_cast<double>(T) * p), 4.0 * sd)
            << "category " << i;
    }
}

TEST(SampleDataset, OutageRateMatches) {
    const std::vector<int> cards{4, 4, 4, 4};
    const auto m = sample_model(4, cards, 3, 2);
    const std::size_t T = 50000;
    const auto d = sample_dataset(m, T, 0.3, 3);
    const double cells = 4.0 * static_cast<double>(T);
    const double missing = cells - static_cast<double>(d.total_observed());
    EXPECT_LE(std::abs(missing - 0.3 * cells), 4.0 * std::sqrt(cells * 0.3 * 0.7));
}

namespace {

std::size_t kruskal_oracle(const std::vector<int>& cards) {
    std::size_t best = 0;
    const long long N = static_cast<long long>(cards.size());
    for (long long R = 1; R <= 5000; ++R) {
        long long lhs = 0;
        for (int c : cards) lhs += std::min<long long>(c, R);
        if (lhs >= 2 * R + N - 1) best = static_cast<std::size_t>(R);
    }
    return best;
}

}  // namespace

TEST(Kruskal, KnownValues) {
    EXPECT_EQ(kruskal_max_rank(std::vector<int>(5, 10)), 23u);
    EXPECT_EQ(kruskal_max_rank(std::vector<int>(50, 10)), 225u);
    EXPECT_EQ(kruskal_max_rank(std::vector<int>(50, 10)), kruskal_oracle(std::vector<int>(50, 10)));
    EXPECT_THROW(kruskal_max_rank(std::vector<int>{10}), DomainError);
}

TEST(Kruskal, MatchesScanAndGrowsWithN) {
    std::mt19937_64 gen(5);
    std::uniform_int_distribution<int> card(2, 12);
    std::uniform_int_distribution<int> nvars(2, 12);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> cards(static_cast<std::size_t>(nvars(gen)));
        for (int& c : cards) c = card(gen);
        const auto k = kruskal_max_rank(cards);
        EXPECT_EQ(k, kruskal_oracle(cards));
        auto more = cards;
        more.push_back(card(gen));
        EXPECT_GE(kruskal_max_rank(more), k);
    }
}

TEST(Dataset, ValidatesAndCounts) {
    EXPECT_THROW(Dataset({2, 2}, 1, std::vector<Category>{3, 1}), DomainError);
    EXPECT_THROW(Dataset({2, 2}, 2, std::vector<Category>{1, 1}), DomainError);
    const Dataset d({3, 2}, 3, std::vector<Category>{1, 0, 3, 2, 0, 0});
    EXPECT_EQ(d.at(0, 1), 3);
    EXPECT_EQ(d.at(1, 0), 0);
    EXPECT_EQ(d.observed_count(0), 2u);
    EXPECT_EQ(d.observed_count(1), 1u);
    EXPECT_EQ(d.total_observed(), 3u);
    const std::vector<std::size_t> cols{2, 0};
    const auto s = d.select(cols);
    EXPECT_EQ(s.num_samples(), 2u);
    EXPECT_EQ(s.at(0, 1), 1);
}
