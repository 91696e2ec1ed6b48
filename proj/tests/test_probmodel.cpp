#include <doctest.h>

#include <cmath>

#include "crackdet/probmodel.hpp"
#include "crackdet/rng.hpp"

using namespace crackdet;

TEST_CASE("linear exponent coefficients") {
    const LinearExponent sym = linear_exponent({0.0, 1.0, 1.0, 0.5});
    CHECK(sym.w == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(sym.w0 == doctest::Approx(-0.5).epsilon(1e-15));

    // equal means: intensity carries no information
    const LinearExponent flat = linear_exponent({0.4, 0.4, 0.2, 0.3});
    CHECK(flat.w == 0.0);
    CHECK(flat.w0 == doctest::Approx(std::log(0.3 / 0.7)).epsilon(1e-14));

    const LinearExponent sharp = linear_exponent({0.2, 0.8, 0.1, 0.02});
    CHECK(sharp.w == doctest::Approx(60.0).epsilon(1e-13));
    CHECK(sharp.w0 == doctest::Approx(-30.0 + std::log(0.02 / 0.98)).epsilon(1e-13));

    CHECK_THROWS_AS(linear_exponent({0.0, 1.0, 0.0, 0.5}), ConfigInvalid);
    CHECK_THROWS_AS(linear_exponent({0.0, 1.0, 1.0, 0.0}), ConfigInvalid);
}

TEST_CASE("posterior at the symmetric midpoint is one half") {
    const GaussianClassModel m{0.0, 1.0, 1.0, 0.5};
    CHECK(posterior_direct(m, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(posterior_via_sigmoid(m, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("posterior saturates far above the abnormal mean") {
    const GaussianClassModel m{0.2, 0.8, 0.1, 0.3};
    CHECK(std::abs(posterior_direct(m, 0.8 + 10 * 0.1) - 1.0) <= 1e-9);
    CHECK(std::abs(posterior_via_sigmoid(m, 0.8 + 10 * 0.1) - 1.0) <= 1e-9);

    // extreme exponents must not produce NaN or overflow
    const GaussianClassModel tight{0.1, 0.9, 1e-3, 0.5};
    const double lo = posterior_direct(tight, -0.5);
    const double hi = posterior_direct(tight, 1.5);
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);
    CHECK(std::isfinite(posterior_via_sigmoid(tight, -0.5)));
    CHECK(std::isfinite(posterior_via_sigmoid(tight, 1.5)));
}

TEST_CASE("sigmoid of zero exponent is one half and saturation is stable") {
    // w = 0 model: posterior equals the prior independent of x
    const GaussianClassModel flat{0.5, 0.5, 0.2, 0.25};
    CHECK(posterior_via_sigmoid(flat, 0.9) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(posterior_direct(flat, 0.9) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("both posterior routes agree within 1e-12 across the domain") {
    Rng rng(404);
    double worst = 0.0;
    for (int trial = 0; trial < 10000; ++trial) {
        GaussianClassModel m;
        m.mu0 = rng.uniform();
        m.mu1 = rng.uniform();
        m.sigma = std::pow(10.0, rng.uniform(-3.0, 3.0));
        m.prior1 = rng.uniform(1e-6, 1.0 - 1e-6);
        const double x = rng.uniform(-0.5, 1.5);
        const double diff = std::abs(posterior_direct(m, x) - posterior_via_sigmoid(m, x));
        worst = std::max(worst, diff);
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("posterior is monotone in x when mu1 > mu0") {
    const GaussianClassModel m{0.3, 0.7, 0.15, 0.1};
    double prev = -1.0;
    for (int i = 0; i <= 100; ++i) {
        const double x = -0.5 + 2.0 * i / 100.0;
        const double p = posterior_direct(m, x);
        CHECK(p > prev);
        prev = p;
    }
}

TEST_CASE("prior is recovered where the likelihood ratio is one") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        GaussianClassModel m;
        m.mu0 = rng.uniform();
        m.mu1 = rng.uniform(0.0, 1.0);
        m.sigma = rng.uniform(0.05, 2.0);
        m.prior1 = rng.uniform(0.01, 0.99);
        const double mid = 0.5 * (m.mu0 + m.mu1);
        CHECK(std::abs(posterior_direct(m, mid) - m.prior1) <= 1e-12);
    }
}
