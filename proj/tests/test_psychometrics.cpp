#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "tscale/psychometrics.hpp"

using namespace tscale;

namespace {

TrialSeries series_of(std::vector<std::vector<int>> rows, std::size_t n_levels) {
    TrialSeries s;
    for (std::size_t i = 0; i < n_levels; ++i) s.levels.push_back(static_cast<double>(i + 1));
    s.responses = std::move(rows);
    return s;
}

bool is_monotone(const std::vector<int>& r) {
    bool up = true, down = true;
    for (std::size_t i = 1; i < r.size(); ++i) {
        if (r[i] < r[i - 1]) up = false;
        if (r[i] > r[i - 1]) down = false;
    }
    return up || down;
}

std::size_t hamming(const std::vector<int>& a, const std::vector<int>& b) {
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += static_cast<std::size_t>(a[i] != b[i]);
    return d;
}

// smallest distance from r to any monotone binary sequence, by enumeration
std::size_t min_monotone_distance(const std::vector<int>& r) {
    const std::size_t n = r.size();
    std::size_t best = n + 1;
    for (std::size_t k = 0; k <= n; ++k) {
        std::vector<int> up(n), down(n);
        for (std::size_t i = 0; i < n; ++i) {
            up[i] = i < k ? 0 : 1;
            down[i] = i < k ? 1 : 0;
        }
        best = std::min({best, hamming(r, up), hamming(r, down)});
    }
    return best;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("monotone projection fixes monotone inputs") {
    const TrialSeries s =
        series_of({{0, 0, 1, 1}, {1, 1, 0, 0}, {0, 0, 0, 0}, {1, 1, 1, 1}}, 4);
    const TrialSeries f = monotone_filter(s);
    CHECK(f.responses == s.responses);
}

TEST_CASE("alternating response projects at distance one") {
    const TrialSeries f = monotone_filter(series_of({{1, 0, 1, 0}}, 4));
    CHECK(is_monotone(f.responses[0]));
    CHECK(hamming(f.responses[0], {1, 0, 1, 0}) == 1);
}

TEST_CASE("projection is minimal for every sequence up to length 10") {
    for (std::size_t n = 2; n <= 10; ++n) {
        for (unsigned bits = 0; bits < (1u << n); ++bits) {
            std::vector<int> r(n);
            for (std::size_t i = 0; i < n; ++i) r[i] = (bits >> i) & 1u;
            TrialSeries s = series_of({r}, n);
            const TrialSeries f = monotone_filter(s);
            CHECK(is_monotone(f.responses[0]));
            CHECK(hamming(f.responses[0], r) == min_monotone_distance(r));
        }
    }
}

TEST_CASE("probit recovers planted parameters from pooled counts") {
    // ten thousand observers drawn exactly from a cumulative normal (5, 2)
    const int counts[9] = {228, 668, 1587, 3085, 5000, 6915, 8413, 9332, 9772};
    TrialSeries s;
    for (int i = 1; i <= 9; ++i) s.levels.push_back(i);
    for (int obs = 0; obs < 10000; ++obs) {
        std::vector<int> row(9);
        for (int i = 0; i < 9; ++i) row[i] = obs < counts[i] ? 1 : 0;
        s.responses.push_back(std::move(row));
    }
    const ProbitResult r = probit_fit(s);
    CHECK(r.mu == doctest::Approx(5.0).epsilon(0.002));
    CHECK(r.sigma == doctest::Approx(2.0).epsilon(0.01));
    CHECK(r.t50 == r.mu);
    CHECK(r.dof == 7);
    CHECK(r.chi2 < 0.1);
    CHECK(r.passed);
}

TEST_CASE("probit rejects non-identifiable data") {
    CHECK_THROWS_AS(probit_fit(series_of({{0, 0, 0}, {0, 0, 0}}, 3)), std::domain_error);
    CHECK_THROWS_AS(probit_fit(series_of({{1, 1, 1}, {1, 1, 1}}, 3)), std::domain_error);
}

TEST_CASE("probit flags a bad fit via the goodness-of-fit gate") {
    TrialSeries s;
    for (int i = 1; i <= 9; ++i) s.levels.push_back(i);
    const double props[9] = {0.5, 0.1, 0.9, 0.1, 0.9, 0.5, 0.9, 0.2, 0.95};
    for (int obs = 0; obs < 100; ++obs) {
        std::vector<int> row(9);
        for (int i = 0; i < 9; ++i) row[i] = obs < std::lround(props[i] * 100) ? 1 : 0;
        s.responses.push_back(std::move(row));
    }
    const ProbitResult r = probit_fit(s);
    CHECK(!r.passed);
    CHECK(r.chi2 > 100.0);
}

TEST_CASE("disagreement index hand case and invariances") {
    CHECK(stress({1.0, 2.0}, {2.0, 1.0}) == doctest::Approx(60.0).epsilon(1e-12));
    CHECK(stress({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == doctest::Approx(0.0));
    CHECK(stress({2.0, 4.0, 6.0}, {1.0, 2.0, 3.0}) == doctest::Approx(0.0));
    // exact invariance to power-of-two rescaling of either list
    CHECK(stress({4.0, 8.0}, {2.0, 1.0}) == stress({1.0, 2.0}, {2.0, 1.0}));
    CHECK(stress({1.0, 2.0}, {8.0, 4.0}) == stress({1.0, 2.0}, {2.0, 1.0}));

    CHECK_THROWS_AS(stress({1.0}, {0.0}), std::domain_error);
    CHECK_THROWS_AS(stress({0.0, 0.0}, {1.0, 1.0}), std::domain_error);
    CHECK_THROWS(stress({1.0, 2.0}, {1.0}));
}

TEST_CASE("two-tailed comparison of disagreement values") {
    CHECK(f_test_stress(30.0, 30.0, 25) == FVerdict::insignificant);
    CHECK(f_test_stress(10.0, 100.0, 25) == FVerdict::better);
    CHECK(f_test_stress(100.0, 10.0, 25) == FVerdict::poorer);
    CHECK_THROWS_AS(f_test_stress(0.0, 10.0, 25), std::domain_error);
    CHECK_THROWS(f_test_stress(10.0, 10.0, 1));
}

namespace {

// Pairs whose opacity differences all equal the anchor difference under the
// planted parameters.
VisualPairSet planted_pairs(const AlphaParams& truth) {
    VisualPairSet v;
    v.pairs.push_back({{0.0, 0.0}, {0.0, 1.5}});  // anchor
    v.anchor_index = 0;
    const double delta = alpha_from_coefficients({0.0, 1.5}, truth).a;
    for (double sa : {0.0, 2.0, 6.0}) {
        for (double s1 : {3.0, 12.0, 40.0}) {
            const double a1 = alpha_from_coefficients({sa, s1}, truth).a;
            if (a1 + delta >= 1.0) continue;
            const double st2 = attenuation_from_alpha({a1 + delta}, truth);
            const double s2 = st2 - truth.p * sa;
            if (s2 <= 0.0) continue;
            v.pairs.push_back({{sa, s1}, {sa, s2}});
        }
    }
    return v;
}

}  // namespace

TEST_CASE("model fit recovers planted parameters") {
    const AlphaParams truth{0.7, 0.5, 0.0153};
    const VisualPairSet v = planted_pairs(truth);
    REQUIRE(v.pairs.size() >= 8);
    const PsychoFit fit = fit_psychometric_params(v);
    CHECK(fit.p == doctest::Approx(0.7).epsilon(0.03));
    CHECK(std::abs(fit.p - 0.7) < 0.02);
    CHECK(std::abs(fit.q - 0.5) < 0.02);
    CHECK(fit.objective < 1e-8);
    CHECK(!fit.degenerate);
    CHECK(fit.stress < 1.0);

    // the fitted point beats the identity parameters
    VisualPairSet copy = v;
    AlphaParams identity{1.0, 1.0, 0.0153};
    double identity_obj = 0.0;
    {
        const double anchor =
            std::abs(alpha_from_coefficients(copy.pairs[0].first, identity).a -
                     alpha_from_coefficients(copy.pairs[0].second, identity).a);
        for (const auto& pr : copy.pairs) {
            const double d = std::abs(alpha_from_coefficients(pr.first, identity).a -
                                      alpha_from_coefficients(pr.second, identity).a) -
                             anchor;
            identity_obj += d * d;
        }
    }
    CHECK(fit.objective <= identity_obj);
}

TEST_CASE("anchor-only set is degenerate") {
    VisualPairSet v;
    v.pairs.push_back({{0.0, 0.0}, {0.0, 1.5}});
    v.anchor_index = 0;
    const PsychoFit fit = fit_psychometric_params(v);
    CHECK(fit.degenerate);
    CHECK(fit.objective == 0.0);
}

TEST_CASE("leave-one-out on a noiseless fixture") {
    const AlphaParams truth{0.7, 0.5, 0.0153};
    const VisualPairSet v = planted_pairs(truth);
    const LooStats loo = loo_cross_validation(v);
    CHECK(loo.folds == v.pairs.size() - 1);
    CHECK(loo.mean_disagreement < 1e-4);
    CHECK(loo.max_disagreement < 1e-3);
    CHECK(loo.p_max - loo.p_min < 0.02);
    CHECK(loo.q_max - loo.q_min < 0.02);

    VisualPairSet two;
    two.pairs = {v.pairs[0], v.pairs[1]};
    two.anchor_index = 0;
    CHECK_THROWS(loo_cross_validation(two));
}

TEST_CASE("trial csv ingestion") {
    std::istringstream in(
        "observer,direction,level,response\n"
        "s1,increasing,1,0\n"
        "s1,increasing,2,1\n"
        "s2,increasing,1,0\n"
        "s2,increasing,2,0\n"
        "s1,decreasing,1,1\n"
        "s1,decreasing,2,1\n");
    const auto series = read_trials_csv(in);
    REQUIRE(series.size() == 2);
    CHECK(series[0].direction == TrialSeries::Direction::decreasing);
    CHECK(series[1].responses.size() == 2);
    CHECK(series[1].responses[0] == std::vector<int>{0, 1});

    std::istringstream bad("observer,direction,level,response\ns1,sideways,1,0\n");
    CHECK_THROWS(read_trials_csv(bad));
    std::istringstream dup(
        "observer,direction,level,response\ns1,increasing,1,0\ns1,increasing,1,1\n");
    CHECK_THROWS_WITH_AS(read_trials_csv(dup), doctest::Contains("duplicate"),
                         std::runtime_error);
}

TEST_CASE("pair csv ingestion") {
    std::istringstream in(
        "sa1,ss1,sa2,ss2,is_anchor\n"
        "0,0,0,1.5,1\n"
        "0,3,0,7.2,0\n");
    const VisualPairSet v = read_pairs_csv(in);
    CHECK(v.pairs.size() == 2);
    CHECK(v.anchor_index == 0);
    CHECK(v.pairs[1].second.sigma_s == doctest::Approx(7.2));

    std::istringstream no_anchor("sa1,ss1,sa2,ss2,is_anchor\n0,0,0,1.5,0\n");
    CHECK_THROWS(read_pairs_csv(no_anchor));
    std::istringstream two_anchors(
        "sa1,ss1,sa2,ss2,is_anchor\n0,0,0,1.5,1\n0,1,0,2,1\n");
    CHECK_THROWS(read_pairs_csv(two_anchors));
}
