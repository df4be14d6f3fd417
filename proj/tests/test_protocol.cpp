#include <doctest.h>

#include <set>

#include "aris/metrics.hpp"
#include "support.hpp"

using namespace aris;
using testing::upa;

namespace {

struct Bench {
    ArrayGeometry geometry;
    Codebook codebook;
    SearchGrid grid;
    CVector h;
};

Bench bench(int n, SteeringModel model) {
    Bench b;
    b.geometry = upa(n, n);
    b.codebook = make_codebook_for(b.geometry, model, {});
    b.grid = make_search_grid(b.geometry, model, b.codebook, {});
    b.h = make_bs_ris_channel(b.geometry, 15.0, {0.0, 0.0, std::nullopt}).h;
    return b;
}

Scenario scenario(const Bench& b, const CVector& g, RisMode mode, NoiseModel noise) {
    Scenario s;
    s.geometry = b.geometry;
    s.h = b.h;
    s.g = g;
    if (mode == RisMode::passive) noise.sigma_v2 = 0.0;
    s.noise = noise;
    s.powers = power_budget(mode, 0.2, 0.25, 10.0);
    s.mode = mode;
    return s;
}

NoiseModel thermal() {
    const double s2 = thermal_noise_power(1e6, 10.0);
    return {s2, s2, 0};
}

}  // namespace

TEST_CASE("power budget") {
    const auto a = power_budget(RisMode::active, 0.2, 0.25, 10.0);
    CHECK(a.p_ris == doctest::Approx(0.05));
    CHECK(a.p_p == doctest::Approx(0.15));
    CHECK(a.p_d == doctest::Approx(0.015));
    const auto p = power_budget(RisMode::passive, 0.2, 0.25, 10.0);
    CHECK(p.p_ris == 0.0);
    CHECK(p.p_p == doctest::Approx(0.2));
    CHECK(p.p_d == doctest::Approx(0.02));
    CHECK_THROWS_AS(power_budget(RisMode::active, 0.2, 1.0, 10.0), std::invalid_argument);
    CHECK_THROWS_AS(power_budget(RisMode::active, 0.0, 0.25, 10.0), std::invalid_argument);
}

TEST_CASE("two pilots give one estimate and no codeword") {
    const auto b = bench(8, SteeringModel::far_field);
    Rng rng(1);
    const auto g = make_channel(b.geometry, sample_user(b.geometry, Regime::far, rng)).g;
    for (auto mode : {RisMode::active, RisMode::passive}) {
        const auto res = run_protocol(scenario(b, g, mode, thermal()), b.grid, b.codebook, 2, rng);
        CHECK(res.history.size() == 1);
        CHECK(res.b_matrix.rows() == 2);
        CHECK(res.y.size() == 2);
        CHECK_FALSE(res.history[0].next_codeword);
        CHECK(res.history[0].pilots == 2);
    }
    CHECK_THROWS_AS(run_protocol(scenario(b, g, RisMode::active, thermal()), b.grid, b.codebook, 1, rng),
                    std::invalid_argument);
}

TEST_CASE("noiseless on-grid users are recovered with three pilots") {
    Rng rng(2);
    for (auto model : {SteeringModel::far_field, SteeringModel::near_field}) {
        const auto b = bench(8, model);
        for (auto mode : {RisMode::active, RisMode::passive}) {
            for (int t = 0; t < 5; ++t) {
                std::uniform_int_distribution<std::size_t> pick(0, b.codebook.size() - 1);
                const auto user = testing::on_grid_user(b.codebook, pick(rng), b.geometry.wavelength, rng);
                const auto g = make_channel(b.geometry, user).g;
                const auto res = run_protocol(scenario(b, g, mode, NoiseModel{}), b.grid, b.codebook, 3, rng);
                CHECK(res.history.size() == 2);
                CHECK(nmse(res.final_estimate.g_hat, g) < 1e-8);
            }
        }
    }
}

TEST_CASE("passive pilots are unit modulus") {
    const auto b = bench(8, SteeringModel::near_field);
    Rng rng(3);
    for (int t = 0; t < 4; ++t) {
        const auto g = make_channel(b.geometry, sample_user(b.geometry, Regime::near, rng)).g;
        const auto sc = scenario(b, g, RisMode::passive, thermal());
        CHECK(sc.noise.sigma_v2 == 0.0);
        const auto res = run_passive_baseline(sc, b.grid, b.codebook, 7, rng);
        CHECK((res.b_matrix.cwiseAbs().array() - 1.0).abs().maxCoeff() < 1e-12);
        CHECK(res.profile_constants.empty());
        // the covariance the loop factorizes is sigma^2 I whatever the rows are
        const auto cov = noise_covariance(res.b_matrix, sc.h, sc.noise);
        const auto l = res.b_matrix.rows();
        CHECK((cov.matrix() - sc.noise.sigma2 * CMatrix::Identity(l, l)).norm() == 0.0);
    }
}

TEST_CASE("codebook exhaustion stops the loop") {
    auto b = bench(8, SteeringModel::far_field);
    // keep two entries
    std::vector<DirectionParams> params{b.codebook.params(0), b.codebook.params(1)};
    CMatrix beams = b.codebook.beams().leftCols(2);
    Codebook tiny(params, beams);
    Rng rng(4);
    const auto g = make_channel(b.geometry, sample_user(b.geometry, Regime::far, rng)).g;
    for (auto mode : {RisMode::active, RisMode::passive}) {
        const auto res = run_protocol(scenario(b, g, mode, thermal()), b.grid, tiny, 6, rng);
        CHECK(res.codebook_exhausted);
        CHECK(res.b_matrix.rows() == 4);
        CHECK(res.history.size() == 3);
        CHECK(tiny.remaining() == 2);  // the caller's copy is untouched
    }
}

TEST_CASE("adaptive loop invariants") {
    const auto b = bench(8, SteeringModel::near_field);
    Rng rng(5);
    const NoiseModel noise = thermal();
    for (int t = 0; t < 6; ++t) {
        const auto g = make_channel(b.geometry, sample_user(b.geometry, Regime::near, rng)).g;
        const auto sc = scenario(b, g, RisMode::active, noise);
        const int budget = 8;
        const auto res = run_adaptive_estimation(sc, b.grid, b.codebook, budget, rng);
        REQUIRE(res.history.size() == static_cast<std::size_t>(budget - 1));
        CHECK(res.b_matrix.rows() == budget);

        std::set<std::size_t> picked;
        std::size_t profiles = 0;
        for (std::size_t r = 0; r < res.history.size(); ++r) {
            const auto& rec = res.history[r];
            CHECK(rec.pilots == static_cast<int>(r) + 2);
            if (!rec.next_codeword) continue;
            CHECK(picked.insert(*rec.next_codeword).second);

            // row appended after this round is p(g_hat) (.) theta_next
            REQUIRE(profiles < res.profile_gains.size());
            const RVector& p = res.profile_gains[profiles];
            const CVector row = res.b_matrix.row(static_cast<Eigen::Index>(r) + 2).transpose();
            const CVector expect = p.cast<complex_t>().cwiseProduct(b.codebook.beam(*rec.next_codeword));
            CHECK((row - expect).norm() <= 1e-12 * expect.norm());

            // sum p_n^2 gamma_n = 1 is the normalization that defines C
            const CVector& gh = rec.estimate.g_hat;
            double s = 0.0, inv_c2 = 0.0;
            for (Eigen::Index n = 0; n < gh.size(); ++n) {
                const double gamma = (std::norm(gh[n]) * sc.powers.p_d / noise.sigma_v2 + 1.0) /
                                     (sc.powers.p_ris / noise.sigma2);
                const double alpha = std::abs(gh[n]) * std::abs(sc.h[n]);
                const double beta = std::norm(sc.h[n]);
                s += p[n] * p[n] * gamma;
                inv_c2 += alpha * alpha * gamma / ((beta + gamma) * (beta + gamma));
            }
            CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
            CHECK(res.profile_constants[profiles] == doctest::Approx(std::pow(inv_c2, -0.5)).epsilon(1e-9));
            ++profiles;
        }
        CHECK(profiles == res.profile_constants.size());

        // first two rows are the scaled wide beams
        const auto wb = wide_beams(b.geometry);
        const auto init = initial_configs(wb.first, wb.second, sc.powers.p_ris);
        CHECK((res.b_matrix.row(0).transpose() - init.first).norm() == 0.0);
        CHECK((res.b_matrix.row(1).transpose() - init.second).norm() == 0.0);
    }
}

TEST_CASE("amplifier pilot scaling meets the budget at pilot power") {
    const auto b = bench(8, SteeringModel::near_field);
    Rng rng(6);
    const auto g = make_channel(b.geometry, sample_user(b.geometry, Regime::near, rng)).g;
    auto sc = scenario(b, g, RisMode::active, thermal());
    sc.pilot_scaling = PilotScaling::amplifier;
    const auto res = run_adaptive_estimation(sc, b.grid, b.codebook, 6, rng);
    for (Eigen::Index r = 0; r < res.b_matrix.rows(); ++r) {
        double drawn = 0.0;
        for (Eigen::Index n = 0; n < g.size(); ++n) {
            drawn += std::norm(res.b_matrix(r, n)) * (sc.powers.p_p * std::norm(g[n]) + sc.noise.sigma_v2);
        }
        CHECK(drawn == doctest::Approx(sc.powers.p_ris).epsilon(1e-9));
    }
}

TEST_CASE("replay is deterministic") {
    const auto b = bench(8, SteeringModel::near_field);
    Rng user_rng(7);
    const auto g = make_channel(b.geometry, sample_user(b.geometry, Regime::near, user_rng)).g;
    for (auto mode : {RisMode::active, RisMode::passive}) {
        Rng r1(99), r2(99);
        const auto a = run_protocol(scenario(b, g, mode, thermal()), b.grid, b.codebook, 6, r1);
        const auto c = run_protocol(scenario(b, g, mode, thermal()), b.grid, b.codebook, 6, r2);
        REQUIRE(a.history.size() == c.history.size());
        CHECK(a.b_matrix == c.b_matrix);
        CHECK(a.y == c.y);
        for (std::size_t i = 0; i < a.history.size(); ++i) {
            CHECK(a.history[i].nmse == c.history[i].nmse);
            CHECK(a.history[i].rate == c.history[i].rate);
            CHECK(a.history[i].next_codeword == c.history[i].next_codeword);
            CHECK(a.history[i].estimate.g_hat == c.history[i].estimate.g_hat);
        }
    }
}

TEST_CASE("estimation failures keep the loop running") {
    auto b = bench(8, SteeringModel::far_field);
    b.h = CVector::Zero(64);
    Rng rng(8);
    const auto g = make_channel(b.geometry, sample_user(b.geometry, Regime::far, rng)).g;
    for (auto mode : {RisMode::active, RisMode::passive}) {
        const auto res = run_protocol(scenario(b, g, mode, thermal()), b.grid, b.codebook, 5, rng);
        CHECK(res.failures == 4);
        CHECK(res.b_matrix.rows() == 5);
        for (const auto& r : res.history) {
            CHECK(r.failed);
            CHECK(r.estimate.degenerate);
            CHECK(r.nmse == doctest::Approx(1.0));
        }
        // re-probes repeat the last configuration
        for (Eigen::Index r = 2; r < 5; ++r) CHECK(res.b_matrix.row(r) == res.b_matrix.row(1));
    }
}

TEST_CASE("data configuration") {
    const auto b = bench(8, SteeringModel::near_field);
    Rng rng(9);
    const auto g = make_channel(b.geometry, sample_user(b.geometry, Regime::near, rng)).g;
    const auto noise = thermal();

    EstimateResult perfect;
    perfect.g_hat = g;
    SUBCASE("perfect estimate reaches the bound") {
        for (auto mode : {RisMode::active, RisMode::passive}) {
            const auto sc = scenario(b, g, mode, noise);
            const auto cfg = configure_for_data(perfect, mode, sc.h, g, sc.powers, sc.noise);
            CHECK_FALSE(cfg.fallback);
            const double se = spectral_efficiency(cfg.phi, sc.h, g, sc.powers.p_d, sc.noise);
            CHECK(se == doctest::Approx(capacity_bound(mode, sc.h, g, sc.powers, sc.noise)).epsilon(1e-12));
        }
    }
    SUBCASE("passive magnitudes are one") {
        const auto sc = scenario(b, g, RisMode::passive, noise);
        EstimateResult e;
        e.g_hat = testing::random_cvector(rng, 64);
        const auto cfg = configure_for_data(e, RisMode::passive, sc.h, g, sc.powers, sc.noise);
        CHECK((cfg.phi.cwiseAbs().array() - 1.0).abs().maxCoeff() < 1e-12);
    }
    SUBCASE("active configuration draws the amplifier budget") {
        const auto sc = scenario(b, g, RisMode::active, noise);
        EstimateResult e;
        e.g_hat = g + testing::random_cvector(rng, 64, 1e-3 * g.squaredNorm() / 64);
        const auto cfg = configure_for_data(e, RisMode::active, sc.h, g, sc.powers, sc.noise);
        double drawn = 0.0;
        for (Eigen::Index n = 0; n < 64; ++n) {
            drawn += std::norm(cfg.phi[n]) * (sc.powers.p_d * std::norm(g[n]) + sc.noise.sigma_v2);
        }
        CHECK(drawn == doctest::Approx(sc.powers.p_ris).epsilon(1e-12));
    }
    SUBCASE("global phase of the estimate does not matter") {
        for (auto mode : {RisMode::active, RisMode::passive}) {
            const auto sc = scenario(b, g, mode, noise);
            EstimateResult e;
            e.g_hat = g + testing::random_cvector(rng, 64, 0.1 * g.squaredNorm() / 64);
            EstimateResult rotated = e;
            rotated.g_hat *= std::polar(1.0, 1.234);
            const auto c1 = configure_for_data(e, mode, sc.h, g, sc.powers, sc.noise);
            const auto c2 = configure_for_data(rotated, mode, sc.h, g, sc.powers, sc.noise);
            CHECK(spectral_efficiency(c1.phi, sc.h, g, sc.powers.p_d, sc.noise) ==
                  doctest::Approx(spectral_efficiency(c2.phi, sc.h, g, sc.powers.p_d, sc.noise)).epsilon(1e-10));
        }
    }
    SUBCASE("degenerate estimate falls back to boresight") {
        EstimateResult e;
        e.g_hat = CVector::Zero(64);
        e.degenerate = true;
        const auto sc = scenario(b, g, RisMode::passive, noise);
        const auto cfg = configure_for_data(e, RisMode::passive, sc.h, g, sc.powers, sc.noise);
        CHECK(cfg.fallback);
        CHECK((cfg.phi - CVector::Ones(64)).norm() == 0.0);
    }
}

TEST_CASE("achieved rate never exceeds the bound") {
    Rng rng(10);
    for (auto regime : {Regime::near, Regime::far}) {
        const auto b = bench(8, regime == Regime::near ? SteeringModel::near_field : SteeringModel::far_field);
        for (int t = 0; t < 5; ++t) {
            const auto g = make_channel(b.geometry, sample_user(b.geometry, regime, rng)).g;
            for (auto mode : {RisMode::active, RisMode::passive}) {
                const auto sc = scenario(b, g, mode, thermal());
                const double cap = capacity_bound(mode, sc.h, g, sc.powers, sc.noise);
                const auto res = run_protocol(sc, b.grid, b.codebook, 6, rng);
                for (const auto& r : res.history) {
                    CHECK(r.rate >= 0.0);
                    CHECK(r.rate <= cap + 1e-9);
                    CHECK(r.nmse >= 0.0);
                }
            }
        }
    }
}
