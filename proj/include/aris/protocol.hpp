#pragma once

#include <optional>
#include <vector>

#include "aris/beamcontrol.hpp"
#include "aris/channel.hpp"
#include "aris/estimator.hpp"
#include "aris/geometry.hpp"
#include "aris/types.hpp"

namespace aris {

// How active pilot configurations are scaled. `nominal` uses the wide-beam
// scaling sqrt(P_RIS/N) and the profile constant C as they are; `amplifier`
// rescales every pilot so the amplifiers draw exactly P_RIS at the incident
// pilot power, the same rule the data configuration follows.
enum class PilotScaling { nominal, amplifier };

// Everything one trial needs: the links, the noise and the powers of the
// surface under test.
struct Scenario {
    ArrayGeometry geometry;
    CVector h;       // BS-RIS
    CVector g;       // UE-RIS, ground truth
    NoiseModel noise;
    PowerBudget powers;
    RisMode mode = RisMode::active;
    PilotScaling pilot_scaling = PilotScaling::nominal;
};

// Active: 25% of the total to the surface, the rest to the transmitter.
// Passive: everything to the transmitter. Pilots use the transmitter share;
// data runs `pilot_over_data_db` below it.
PowerBudget power_budget(RisMode mode, double total_power, double ris_fraction, double pilot_over_data_db);

struct RoundRecord {
    int pilots = 0;                 // rows of B behind this estimate
    EstimateResult estimate;
    bool failed = false;            // direction search failed; previous estimate kept
    std::optional<std::size_t> next_codeword;  // beam appended after this round
    double nmse = 0.0;
    double rate = 0.0;              // achieved rate with the data configuration of this estimate
};

struct ProtocolResult {
    EstimateResult final_estimate;
    std::vector<RoundRecord> history;
    CMatrix b_matrix;
    CVector y;
    std::vector<double> profile_constants;  // C of every profile used for a pilot
    std::vector<RVector> profile_gains;     // the matching p vectors
    int failures = 0;
    bool codebook_exhausted = false;
};

struct RisConfiguration {
    CVector phi;
    bool fallback = false;  // estimate was degenerate; boresight configuration used
};

// Active: phi = p(g_hat) (.) exp(-j arg(h g_hat)), then rescaled so the
// amplifiers draw exactly P_RIS given the incident power |g_n|^2 P_d + sigma_v^2.
// Passive: phi_n = exp(-j arg(h_n g_hat_n)).
RisConfiguration configure_for_data(const EstimateResult& estimate, RisMode mode, const CVector& h,
                                    const CVector& g_true, const PowerBudget& powers, const NoiseModel& noise);

// Rescales phi so that sum |phi_n|^2 (P_d |g_n|^2 + sigma_v^2) = P_RIS.
CVector enforce_ris_budget(const CVector& phi, const CVector& g_true, const PowerBudget& powers,
                           const NoiseModel& noise);

// Adaptive pilot loop for an active surface: two wide-beam pilots, then one
// estimate per pilot and a closest-beam codeword for every pilot after the
// second, until `pilot_budget` pilots are spent. `codebook` is taken by value;
// its usage flags belong to this run.
ProtocolResult run_adaptive_estimation(const Scenario& scenario, const SearchGrid& grid, Codebook codebook,
                                       int pilot_budget, Rng& rng);

// The same loop with unit-modulus configurations, no amplification noise and
// the whole budget at the transmitter.
ProtocolResult run_passive_baseline(const Scenario& scenario, const SearchGrid& grid, Codebook codebook,
                                    int pilot_budget, Rng& rng);

// Dispatches on scenario.mode.
ProtocolResult run_protocol(const Scenario& scenario, const SearchGrid& grid, Codebook codebook,
                            int pilot_budget, Rng& rng);

}  // namespace aris
