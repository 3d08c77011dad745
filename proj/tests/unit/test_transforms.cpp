#include <catch_amalgamated.hpp>

#include <cmath>

#include "sercomp/transforms.hpp"
#include "support/oracles.hpp"

using namespace sercomp;
using Catch::Approx;

namespace {
constexpr double kTol = 1e-12;
const double s3h = std::sqrt(3.0) / 2.0;
}  // namespace

TEST_CASE("clarke maps reference triples", "[transforms]") {
    const auto zero_seq = clarke({1.0, 1.0, 1.0});
    CHECK(zero_seq.alpha == Approx(0.0).margin(kTol));
    CHECK(zero_seq.beta == Approx(0.0).margin(kTol));

    const auto at_zero = clarke({0.0, -s3h, s3h});
    CHECK(at_zero.alpha == Approx(0.0).margin(kTol));
    CHECK(at_zero.beta == Approx(-1.0).margin(kTol));

    const auto at_quarter = clarke({1.0, -0.5, -0.5});
    CHECK(at_quarter.alpha == Approx(1.0).margin(kTol));
    CHECK(at_quarter.beta == Approx(0.0).margin(kTol));
}

TEST_CASE("inverse_clarke maps reference pairs", "[transforms]") {
    const auto z = inverse_clarke({0.0, 0.0});
    CHECK(z.a == 0.0);
    CHECK(z.b == 0.0);
    CHECK(z.c == 0.0);

    const auto x = inverse_clarke({1.0, 0.0});
    CHECK(x.a == Approx(1.0).margin(kTol));
    CHECK(x.b == Approx(-0.5).margin(kTol));
    CHECK(x.c == Approx(-0.5).margin(kTol));

    const auto y = inverse_clarke({0.0, -1.0});
    CHECK(y.a == Approx(0.0).margin(kTol));
    CHECK(y.b == Approx(-s3h).margin(kTol));
    CHECK(y.c == Approx(s3h).margin(kTol));
}

TEST_CASE("balanced_phasor reference values", "[transforms]") {
    const auto a = balanced_phasor(1.0, 0.0);
    CHECK(a.alpha == Approx(0.0).margin(kTol));
    CHECK(a.beta == Approx(-1.0).margin(kTol));

    const auto b = balanced_phasor(0.0, 1.234);
    CHECK(b.alpha == 0.0);
    CHECK(b.beta == Approx(0.0).margin(kTol));

    const auto c = balanced_phasor(2.0, std::numbers::pi / 2);
    CHECK(c.alpha == Approx(2.0).margin(kTol));
    CHECK(c.beta == Approx(0.0).margin(kTol));

    CHECK_THROWS_AS(balanced_phasor(-1.0, 0.0), InvalidArgument);
}

TEST_CASE("balanced abc set lands on the phasor", "[transforms][property]") {
    oracle::Gen g(11);
    for (int k = 0; k < 500; ++k) {
        const double amp = g.log_uniform(1e-3, 1e6);
        const double ph = g.uniform(-10.0, 10.0);
        const auto ab = clarke(balanced_abc(amp, ph));
        const auto ref = balanced_phasor(amp, ph);
        REQUIRE(ab.alpha == Approx(ref.alpha).margin(kTol * amp));
        REQUIRE(ab.beta == Approx(ref.beta).margin(kTol * amp));
        REQUIRE(ab.magnitude() == Approx(amp).epsilon(kTol));
    }
}

TEST_CASE("round trip on zero-sum triples", "[transforms][property]") {
    oracle::Gen g(12);
    for (int k = 0; k < 1000; ++k) {
        const double scale = g.log_uniform(1e-6, 1e6);
        const double a = g.uniform(-1, 1) * scale;
        const double b = g.uniform(-1, 1) * scale;
        const ThreePhaseSample x{a, b, -a - b};
        const auto y = inverse_clarke(clarke(x));
        const double m = std::max({std::abs(x.a), std::abs(x.b), std::abs(x.c)});
        REQUIRE(std::abs(y.a - x.a) <= kTol * m);
        REQUIRE(std::abs(y.b - x.b) <= kTol * m);
        REQUIRE(std::abs(y.c - x.c) <= kTol * m);
        REQUIRE(std::abs(y.sum()) <= kTol * m);
    }
}

TEST_CASE("zero-sequence offsets are rejected", "[transforms][property]") {
    oracle::Gen g(13);
    for (int k = 0; k < 1000; ++k) {
        const ThreePhaseSample x{g.uniform(-5, 5), g.uniform(-5, 5), g.uniform(-5, 5)};
        const double off = g.uniform(-100, 100);
        const auto p = clarke(x);
        const auto q = clarke({x.a + off, x.b + off, x.c + off});
        REQUIRE(q.alpha == Approx(p.alpha).margin(1e-12 * 100));
        REQUIRE(q.beta == Approx(p.beta).margin(1e-12 * 100));
    }
}

TEST_CASE("quadrature derivative property", "[transforms][property]") {
    oracle::Gen g(14);
    const double w = oracle::kW60;
    for (int k = 0; k < 200; ++k) {
        const double amp = g.uniform(0.1, 10.0);
        const double t = g.uniform(0.0, 0.1);
        // Centred difference error is O(h^2): check it shrinks by ~4 per halving.
        auto err = [&](double h) {
            const auto p = balanced_phasor(amp, w * (t + h));
            const auto m = balanced_phasor(amp, w * (t - h));
            const auto x = balanced_phasor(amp, w * t);
            const double da = (p.alpha - m.alpha) / (2 * h);
            const double db = (p.beta - m.beta) / (2 * h);
            return std::hypot(da + w * x.beta, db - w * x.alpha);
        };
        const double e1 = err(1e-4);
        const double e2 = err(5e-5);
        // Leading truncation term of the centred difference is w^3 h^2 amp / 6.
        REQUIRE(e1 <= 1.01 * w * w * w * 1e-8 * amp / 6.0);
        REQUIRE(e1 / e2 == Approx(4.0).epsilon(0.01));
    }
}
