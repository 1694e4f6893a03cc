#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "tscale/psf_analysis.hpp"
#include "tscale/rng.hpp"

using namespace tscale;

TEST_CASE("frequency cutoff to decay parameter") {
    CHECK(cpd_to_psf_param(0.0, 80.0).c == 0.0);
    CHECK(cpd_to_psf_param(25.0, 80.0).c == doctest::Approx(45.6385).epsilon(1e-4));
    // quadratic law
    const double c25 = cpd_to_psf_param(25.0, 80.0).c;
    const double c50 = cpd_to_psf_param(50.0, 80.0).c;
    CHECK(c50 == doctest::Approx(4.0 * c25).epsilon(1e-12));
    CHECK_THROWS(cpd_to_psf_param(-1.0, 80.0));
    CHECK_THROWS(cpd_to_psf_param(25.0, 0.0));
}

TEST_CASE("aperture reading closed-form limits") {
    constexpr double pi = std::numbers::pi;
    CHECK(psf_measurement({2.0, 2.0}, {0.0}) == doctest::Approx(pi).epsilon(1e-12));
    // full-plane illumination integrates the Gaussian exactly
    CHECK(psf_measurement({2.0, 1000.0}, {1.0}) == doctest::Approx(pi).epsilon(1e-4));
    CHECK(psf_measurement({2.0, 500.0}, {2.5}) == doctest::Approx(pi / 2.5).epsilon(1e-4));
}

TEST_CASE("aperture reading against an independent quadrature oracle") {
    CHECK(psf_measurement({2.0, 2.0}, {1.0}) == doctest::Approx(1.4960968).epsilon(1e-4));
    CHECK(psf_measurement({2.0, 8.0}, {1.0}) == doctest::Approx(3.1415725).epsilon(1e-4));
    CHECK(psf_measurement({2.0, 2.0}, {45.6}) == doctest::Approx(0.063146390).epsilon(1e-4));
    CHECK(psf_measurement({2.0, 8.0}, {45.6}) == doctest::Approx(0.068894576).epsilon(1e-4));
    CHECK(psf_measurement({2.0, 2.0}, {0.5}) == doctest::Approx(2.0503917).epsilon(1e-4));
    CHECK(psf_measurement({2.0, 4.0}, {2.0}) == doctest::Approx(1.5526546).epsilon(1e-4));
}

TEST_CASE("aperture reading against a Monte-Carlo oracle") {
    Rng rng(2024);
    constexpr double pi = std::numbers::pi;
    for (int trial = 0; trial < 10; ++trial) {
        const double ai = 1.0 + 5.0 * rng.next_double();
        const double c = 0.2 + 4.8 * rng.next_double();
        const double ri = 0.5 * ai, rd = 1.0;
        const std::size_t n = 2000000;
        double sum = 0.0, sumsq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r1 = rd * std::sqrt(rng.next_double());
            const double t1 = 2.0 * pi * rng.next_double();
            const double r2 = ri * std::sqrt(rng.next_double());
            const double t2 = 2.0 * pi * rng.next_double();
            const double dx = r1 * std::cos(t1) - r2 * std::cos(t2);
            const double dy = r1 * std::sin(t1) - r2 * std::sin(t2);
            const double v = std::exp(-c * (dx * dx + dy * dy));
            sum += v;
            sumsq += v * v;
        }
        const double mean = sum / n;
        const double se = std::sqrt((sumsq / n - mean * mean) / n);
        const double scale = pi * rd * rd * ri * ri;  // (1/pi) * area_D * area_I
        const double mc = scale * mean;
        const double mc_se = scale * se;
        const double got = psf_measurement({2.0, ai}, {c});
        CHECK(std::abs(got - mc) < std::max(1e-3 * mc, 4.0 * mc_se));
    }
}

TEST_CASE("aperture reading monotonicity") {
    double prev = 0.0;
    for (double ai : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
        const double m = psf_measurement({2.0, ai}, {3.0});
        CHECK(m >= prev - 1e-7);  // quadrature jitter at saturation
        prev = m;
    }
    double prev_c = 1e9;
    for (double c : {0.5, 1.0, 2.0, 4.0, 8.0}) {
        const double m = psf_measurement({2.0, 2.0}, {c});
        CHECK(m < prev_c);
        prev_c = m;
    }
}

TEST_CASE("device discrimination matrix") {
    const std::vector<GaussianPsf> same{{2.0}, {2.0}, {2.0}};
    const DiscriminationMatrix m0 =
        device_discrimination(same, {2.0, 2.0}, {2.0, 8.0}, 0.5);
    for (std::size_t i = 0; i < m0.n; ++i)
        for (std::size_t j = 0; j < m0.n; ++j) CHECK(!m0.at(i, j));

    std::vector<GaussianPsf> family;
    for (int f = 2; f <= 30; f += 4) family.push_back(cpd_to_psf_param(f, 80.0));
    const DiscriminationMatrix m =
        device_discrimination(family, {2.0, 2.0}, {2.0, 8.0}, 0.5);
    for (std::size_t i = 0; i < m.n; ++i)
        for (std::size_t j = 0; j < m.n; ++j) CHECK(m.at(i, j) == m.at(j, i));

    // threshold zero separates all distinct blurs
    const DiscriminationMatrix z =
        device_discrimination(family, {2.0, 2.0}, {2.0, 8.0}, 0.0);
    for (std::size_t i = 0; i < z.n; ++i)
        for (std::size_t j = 0; j < z.n; ++j) CHECK(z.at(i, j) == (i != j));
}

namespace {

CsfTable identity_csf() {
    CsfTable t;
    t.cycles_per_degree = {0.0, 100.0};
    t.response = {1.0, 1.0};
    return t;
}

CsfTable lowpass_csf(double cutoff) {
    CsfTable t;
    t.cycles_per_degree = {0.0, cutoff, cutoff + 0.5, 100.0};
    t.response = {1.0, 1.0, 0.0, 0.0};
    return t;
}

BlurCompareConfig small_canvas() {
    BlurCompareConfig cfg;
    cfg.canvas = 256;
    return cfg;
}

}  // namespace

TEST_CASE("visual blur comparison") {
    const GaussianPsf sharp{0.0};
    const GaussianPsf blurry = cpd_to_psf_param(2.0, 80.0);

    CHECK(hvs_blur_difference(blurry, blurry, identity_csf(), small_canvas()) ==
          doctest::Approx(0.0).epsilon(1e-9));

    const double big = hvs_blur_difference(sharp, blurry, identity_csf(), small_canvas());
    CHECK(big > 1.0);

    const double d_wide = hvs_blur_difference(sharp, blurry, lowpass_csf(20.0), small_canvas());
    const double d_narrow = hvs_blur_difference(sharp, blurry, lowpass_csf(1.0), small_canvas());
    CHECK(d_narrow < d_wide);

    CsfTable empty;
    CHECK_THROWS(hvs_blur_difference(sharp, blurry, empty, small_canvas()));
}

TEST_CASE("csf csv ingestion") {
    std::istringstream in("cycles_per_degree,response\n0,1\n10,0.8\n30,0.1\n");
    const CsfTable t = read_csf_csv(in);
    CHECK(t.sample(0.0) == doctest::Approx(1.0));
    CHECK(t.sample(5.0) == doctest::Approx(0.9));
    CHECK(t.sample(50.0) == doctest::Approx(0.1));

    std::istringstream bad("cycles_per_degree,response\n10,1\n5,0.5\n");
    CHECK_THROWS(read_csf_csv(bad));
    std::istringstream header("frequency,response\n0,1\n");
    CHECK_THROWS(read_csf_csv(header));
}
