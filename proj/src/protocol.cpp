#include "aris/protocol.hpp"

#include <cmath>
#include <stdexcept>

#include "aris/metrics.hpp"

namespace aris {

PowerBudget power_budget(RisMode mode, double total_power, double ris_fraction, double pilot_over_data_db) {
    if (!(total_power > 0.0)) throw std::invalid_argument("total power must be positive");
    if (!(ris_fraction > 0.0 && ris_fraction < 1.0)) throw std::invalid_argument("power split must lie in (0, 1)");
    PowerBudget b;
    if (mode == RisMode::active) {
        b.p_ris = ris_fraction * total_power;
        b.p_p = total_power - b.p_ris;
    } else {
        b.p_p = total_power;
    }
    b.p_d = b.p_p / std::pow(10.0, pilot_over_data_db / 10.0);
    return b;
}

CVector enforce_ris_budget(const CVector& phi, const CVector& g_true, const PowerBudget& powers,
                           const NoiseModel& noise) {
    double drawn = 0.0;
    for (Eigen::Index n = 0; n < phi.size(); ++n) {
        drawn += std::norm(phi[n]) * (powers.p_d * std::norm(g_true[n]) + noise.sigma_v2);
    }
    if (!(drawn > 0.0) || !std::isfinite(drawn)) return phi;
    return std::sqrt(powers.p_ris / drawn) * phi;
}

namespace {

bool usable(const EstimateResult& e) { return !e.degenerate && e.g_hat.size() > 0 && e.g_hat.squaredNorm() > 0.0; }

// amplifier draw at pilot power rather than data power
CVector pilot_budget_scale(const CVector& phi, const Scenario& scenario) {
    PowerBudget at_pilot = scenario.powers;
    at_pilot.p_d = at_pilot.p_p;
    return enforce_ris_budget(phi, scenario.g, at_pilot, scenario.noise);
}

NoiseModel passive_noise(NoiseModel noise) {
    noise.sigma_v2 = 0.0;
    return noise;
}

}  // namespace

RisConfiguration configure_for_data(const EstimateResult& estimate, RisMode mode, const CVector& h,
                                    const CVector& g_true, const PowerBudget& powers, const NoiseModel& noise) {
    const auto n = h.size();
    RisConfiguration out;
    if (!usable(estimate) || estimate.g_hat.size() != n) {
        out.fallback = true;
        out.phi = CVector::Ones(n);
        if (mode == RisMode::active) out.phi = enforce_ris_budget(out.phi, g_true, powers, noise);
        return out;
    }
    const auto aligned = phase_align(h, estimate.g_hat);
    if (mode == RisMode::passive) {
        out.phi = aligned.phases;
        return out;
    }
    const auto profile = amplification_profile(estimate.g_hat, h, powers.p_d, powers.p_ris, noise);
    out.phi = enforce_ris_budget(compose_config(profile, aligned.phases), g_true, powers, noise);
    return out;
}

namespace {

ProtocolResult run_loop(const Scenario& scenario, const SearchGrid& grid, Codebook codebook, int pilot_budget,
                        Rng& rng, RisMode mode) {
    if (pilot_budget < 2) throw std::invalid_argument("pilot budget must be at least 2");
    const auto& geometry = scenario.geometry;
    const auto n = static_cast<Eigen::Index>(geometry.size());
    if (scenario.h.size() != n || scenario.g.size() != n) throw std::invalid_argument("scenario: dimension mismatch");

    const bool active = mode == RisMode::active;
    const NoiseModel noise = active ? scenario.noise : passive_noise(scenario.noise);
    const PowerBudget& powers = scenario.powers;

    const auto wide = wide_beams(geometry);
    ProtocolResult result;
    result.b_matrix.resize(2, n);
    if (active) {
        const auto init = initial_configs(wide.first, wide.second, powers.p_ris);
        const bool rescale = scenario.pilot_scaling == PilotScaling::amplifier;
        result.b_matrix.row(0) = (rescale ? pilot_budget_scale(init.first, scenario) : init.first).transpose();
        result.b_matrix.row(1) = (rescale ? pilot_budget_scale(init.second, scenario) : init.second).transpose();
    } else {
        result.b_matrix.row(0) = wide.first.transpose();
        result.b_matrix.row(1) = wide.second.transpose();
    }
    result.y = observe_pilots(result.b_matrix, scenario.h, scenario.g, powers.p_p, noise, rng);

    std::optional<EstimateResult> last;
    for (int ell = 2; ell <= pilot_budget; ++ell) {
        RoundRecord rec;
        rec.pilots = ell;
        const auto cov = noise_covariance(result.b_matrix, scenario.h, noise);
        std::vector<DirectionParams> hints;
        if (last && usable(*last)) hints.push_back(last->psi_hat);
        auto est = estimate_channel(result.y, cov, result.b_matrix, scenario.h, grid, powers.p_p, hints);
        if (est) {
            rec.estimate = std::move(*est);
        } else {
            rec.failed = true;
            ++result.failures;
            if (last) {
                rec.estimate = *last;
            } else {
                rec.estimate.g_hat = CVector::Zero(n);
                rec.estimate.degenerate = true;
            }
        }
        last = rec.estimate;
        rec.nmse = nmse(rec.estimate.g_hat, scenario.g);
        const auto data = configure_for_data(rec.estimate, mode, scenario.h, scenario.g, powers, noise);
        rec.rate = spectral_efficiency(data.phi, scenario.h, scenario.g, powers.p_d, noise);

        bool stop = false;
        if (ell < pilot_budget) {
            CVector phi_new;
            if (!rec.failed && usable(rec.estimate)) {
                const auto aligned = phase_align(scenario.h, rec.estimate.g_hat);
                if (active) {
                    const auto profile =
                        amplification_profile(rec.estimate.g_hat, scenario.h, powers.p_d, powers.p_ris, noise);
                    const CVector phi_star = compose_config(profile, aligned.phases);
                    if (auto sel = closest_beam(phi_star, codebook)) {
                        rec.next_codeword = sel->index;
                        phi_new = compose_config(profile, sel->beam);
                        if (scenario.pilot_scaling == PilotScaling::amplifier) {
                            phi_new = pilot_budget_scale(phi_new, scenario);
                        }
                        result.profile_constants.push_back(profile.c);
                        result.profile_gains.push_back(profile.p);
                    }
                } else if (auto sel = closest_beam(aligned.phases, codebook)) {
                    rec.next_codeword = sel->index;
                    phi_new = sel->beam;
                }
                if (!rec.next_codeword) {
                    result.codebook_exhausted = true;
                    stop = true;
                }
            } else {
                // no usable estimate: probe again with the last configuration
                phi_new = result.b_matrix.row(result.b_matrix.rows() - 1).transpose();
            }
            if (!stop) {
                CMatrix row = phi_new.transpose();
                const CVector y_new = observe_pilots(row, scenario.h, scenario.g, powers.p_p, noise, rng);
                const auto rows = result.b_matrix.rows();
                result.b_matrix.conservativeResize(rows + 1, Eigen::NoChange);
                result.b_matrix.row(rows) = row;
                result.y.conservativeResize(rows + 1);
                result.y[rows] = y_new[0];
            }
        }
        result.history.push_back(std::move(rec));
        if (stop) break;
    }
    result.final_estimate = result.history.back().estimate;
    return result;
}

}  // namespace

ProtocolResult run_adaptive_estimation(const Scenario& scenario, const SearchGrid& grid, Codebook codebook,
                                       int pilot_budget, Rng& rng) {
    return run_loop(scenario, grid, std::move(codebook), pilot_budget, rng, RisMode::active);
}

ProtocolResult run_passive_baseline(const Scenario& scenario, const SearchGrid& grid, Codebook codebook,
                                    int pilot_budget, Rng& rng) {
    return run_loop(scenario, grid, std::move(codebook), pilot_budget, rng, RisMode::passive);
}

ProtocolResult run_protocol(const Scenario& scenario, const SearchGrid& grid, Codebook codebook, int pilot_budget,
                            Rng& rng) {
    return scenario.mode == RisMode::active ? run_adaptive_estimation(scenario, grid, std::move(codebook), pilot_budget, rng)
                                            : run_passive_baseline(scenario, grid, std::move(codebook), pilot_budget, rng);
}

}  // namespace aris
