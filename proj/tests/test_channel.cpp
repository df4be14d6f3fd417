#include <doctest.h>

#include "support.hpp"

using namespace aris;
using testing::upa;

TEST_CASE("make_channel") {
    const auto g = upa(8, 8);
    SUBCASE("unit gain at boresight is all ones") {
        const auto ch = make_channel(g, {1.0, 0.0, {0.0, 0.0, std::nullopt}});
        CHECK((ch.g - CVector::Ones(64)).norm() < 1e-15);
    }
    SUBCASE("scaling law") {
        const DirectionParams d{0.4, -0.2, 1.3};
        const auto ch = make_channel(g, {4.0, kPi, d});
        const CVector expect = -2.0 * steering_near(g, d);
        CHECK((ch.g - expect).norm() < 1e-12);
    }
    SUBCASE("reference element carries beta and omega") {
        Rng rng(11);
        for (auto regime : {Regime::near, Regime::far}) {
            for (int t = 0; t < 50; ++t) {
                const auto p = sample_user(g, regime, rng);
                const auto ch = make_channel(g, p);
                CHECK(std::norm(ch.g[0]) == doctest::Approx(p.beta).epsilon(1e-14));
                CHECK(wrap_phase(std::arg(ch.g[0])) == doctest::Approx(p.omega).epsilon(1e-12));
                CHECK((ch.g.cwiseAbs().array() - std::sqrt(p.beta)).abs().maxCoeff() < 1e-12 * std::sqrt(p.beta));
            }
        }
    }
    CHECK_THROWS_AS(make_channel(g, {-1.0, 0.0, {}}), std::invalid_argument);
}

TEST_CASE("friis gain and thermal noise") {
    const double lambda = kSpeedOfLight / 28e9;
    CHECK(friis_gain(15.0, lambda) == doctest::Approx(3.23e-9).epsilon(5e-3));
    CHECK(friis_gain(30.0, lambda) == doctest::Approx(friis_gain(15.0, lambda) / 4.0));
    CHECK_THROWS_AS(friis_gain(0.0, lambda), std::invalid_argument);
    // -174 dBm/Hz + 60 dB + 10 dB
    const double dbm = 10.0 * std::log10(thermal_noise_power(1e6, 10.0) / 1e-3);
    CHECK(dbm == doctest::Approx(-104.0).epsilon(1e-3));
}

TEST_CASE("BS-RIS channel") {
    const auto g = upa(16, 16);
    const double lambda = g.wavelength;
    const auto bs = make_bs_ris_channel(g, 15.0, {0.0, 0.0, std::nullopt});
    for (Eigen::Index n = 0; n < bs.h.size(); ++n) {
        CHECK(std::norm(bs.h[n]) == doctest::Approx(friis_gain(15.0, lambda)).epsilon(1e-12));
    }
    SUBCASE("far boresight link has one phase") {
        // 16x16 has d_f ~ 2.4 m, so 15 m is planar
        for (Eigen::Index n = 1; n < bs.h.size(); ++n) CHECK(testing::phase_gap(bs.h[n], bs.h[0]) < 1e-12);
    }
    SUBCASE("magnitude does not depend on direction") {
        const auto other = make_bs_ris_channel(g, 15.0, {0.5, -0.3, std::nullopt});
        CHECK((other.h.cwiseAbs() - bs.h.cwiseAbs()).cwiseAbs().maxCoeff() < 1e-20);
    }
    SUBCASE("inside d_f the spherical model is used") {
        const auto close = make_bs_ris_channel(g, 1.0, {0.2, 0.1, std::nullopt});
        const CVector expect = std::sqrt(friis_gain(1.0, lambda)) * steering_near(g, {0.2, 0.1, 1.0});
        CHECK((close.h - expect).norm() < 1e-15);
        CHECK(close.h.cwiseAbs().minCoeff() > 0.0);
    }
    CHECK_THROWS_AS(make_bs_ris_channel(g, 0.0, {}), std::invalid_argument);
}

TEST_CASE("sample_user draws inside the regime ranges") {
    const auto g = upa(16, 16);
    const auto b = field_boundaries(g);
    Rng rng(5);
    double az_sum = 0.0, el_sum = 0.0;
    const int n = 10000;
    double near_beta = 0.0, far_beta = 0.0;
    for (int t = 0; t < n; ++t) {
        const auto p = sample_user(g, Regime::near, rng);
        REQUIRE(p.dir.distance);
        CHECK(*p.dir.distance >= b.bjornson);
        CHECK(*p.dir.distance <= b.fraunhofer / 10.0);
        CHECK(std::abs(p.dir.azimuth) <= kPi / 3.0);
        CHECK(std::abs(p.dir.elevation) <= kPi / 3.0);
        CHECK(p.omega >= 0.0);
        CHECK(p.omega < kTwoPi);
        az_sum += p.dir.azimuth;
        el_sum += p.dir.elevation;
        near_beta += p.beta;

        const auto q = sample_user(g, Regime::far, rng);
        CHECK(*q.dir.distance >= b.fraunhofer);
        CHECK(*q.dir.distance <= 5.0 * b.fraunhofer);
        CHECK(q.beta == doctest::Approx(friis_gain(*q.dir.distance, g.wavelength)));
        far_beta += q.beta;
    }
    // U[-pi/3, pi/3] has sd (pi/3)/sqrt(3)
    const double se = (kPi / 3.0) / std::sqrt(3.0) / std::sqrt(double(n));
    CHECK(std::abs(az_sum / n) < 3.0 * se);
    CHECK(std::abs(el_sum / n) < 3.0 * se);
    CHECK(far_beta < near_beta);
}

TEST_CASE("observe_pilots") {
    Rng rng(21);
    const CVector h = testing::random_cvector(rng, 16);
    const CVector g = testing::random_cvector(rng, 16);
    const CMatrix b = testing::random_cmatrix(rng, 3, 16);

    SUBCASE("noiseless is exact and linear") {
        const NoiseModel quiet{};
        const CVector y = observe_pilots(b, h, g, 2.0, quiet, rng);
        const CVector expect = std::sqrt(2.0) * b * h.asDiagonal() * g;
        CHECK((y - expect).norm() < 1e-12);
        const CVector y2 = observe_pilots(b, h, 3.0 * g, 8.0, quiet, rng);
        CHECK((y2 - 6.0 * y).norm() < 1e-10);
    }
    SUBCASE("zero B leaves receiver noise") {
        const NoiseModel noise{0.7, 5.0, 0};
        const CMatrix zero = CMatrix::Zero(1, 16);
        double acc = 0.0;
        const int n = 10000;
        for (int t = 0; t < n; ++t) acc += std::norm(observe_pilots(zero, h, g, 1.0, noise, rng)[0]);
        CHECK(acc / n == doctest::Approx(0.7).epsilon(0.05));
    }
    SUBCASE("scalar variance") {
        const NoiseModel noise{0.5, 2.0, 0};
        const CMatrix phi = CMatrix::Constant(1, 1, complex_t(0.6, 0.8) * 1.5);
        const CVector h1 = CVector::Constant(1, complex_t(0.3, -0.4));
        const CVector g1 = CVector::Constant(1, complex_t(1.0, 1.0));
        const complex_t mean = std::sqrt(3.0) * phi(0, 0) * h1[0] * g1[0];
        double acc = 0.0;
        const int n = 10000;
        for (int t = 0; t < n; ++t) acc += std::norm(observe_pilots(phi, h1, g1, 3.0, noise, rng)[0] - mean);
        const double expect = 0.5 + 2.0 * std::norm(phi(0, 0) * h1[0]);
        CHECK(acc / n == doctest::Approx(expect).epsilon(0.05));
    }
    SUBCASE("dimension and power checks") {
        CHECK_THROWS_AS(observe_pilots(CMatrix::Zero(2, 15), h, g, 1.0, {}, rng), std::invalid_argument);
        CHECK_THROWS_AS(observe_pilots(b, h, g, 0.0, {}, rng), std::invalid_argument);
    }
}

TEST_CASE("noise model validation") {
    CHECK_NOTHROW(NoiseModel{1e-12, 0.0, 0}.validate());
    CHECK_THROWS_AS((NoiseModel{-1.0, 0.0, 0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((NoiseModel{1.0, std::nan(""), 0}.validate()), std::invalid_argument);
}

TEST_CASE("complex normal moments") {
    Rng rng(2);
    complex_t mean = 0.0;
    double power = 0.0, re2 = 0.0;
    const int n = 20000;
    for (int t = 0; t < n; ++t) {
        const auto z = complex_normal(rng, 3.0);
        mean += z;
        power += std::norm(z);
        re2 += z.real() * z.real();
    }
    CHECK(std::abs(mean / double(n)) < 0.05);
    CHECK(power / n == doctest::Approx(3.0).epsilon(0.03));
    CHECK(re2 / n == doctest::Approx(1.5).epsilon(0.04));
}
