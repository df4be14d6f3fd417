#pragma once

#include <cstdint>

#include "aris/geometry.hpp"
#include "aris/types.hpp"

namespace aris {

// Parametric line-of-sight link g = sqrt(beta) e^{j omega} a(psi).
struct LosChannelParams {
    double beta = 0.0;   // power gain
    double omega = 0.0;  // phase of the reference element, [0, 2pi)
    DirectionParams dir;
};

struct LosChannel {
    CVector g;
};

// Deterministic BS-RIS link; D_h = diag(h) is applied as h.asDiagonal().
struct BsRisChannel {
    CVector h;
};

struct NoiseModel {
    double sigma2 = 0.0;    // receiver noise power [W]
    double sigma_v2 = 0.0;  // amplification noise power [W]; 0 for a passive surface
    std::uint64_t rng_seed = 0;

    bool noiseless() const { return sigma2 == 0.0 && sigma_v2 == 0.0; }
    void validate() const;
};

// Per-mode power bookkeeping [W].
struct PowerBudget {
    double p_ris = 0.0;  // RIS amplifier budget (0 for a passive surface)
    double p_p = 0.0;    // pilot power
    double p_d = 0.0;    // data power
};

// Thermal noise kTB plus noise figure, in watts.
double thermal_noise_power(double bandwidth_hz, double noise_figure_db);

// Free-space power gain (lambda / (4 pi d))^2.
double friis_gain(double distance, double wavelength);

LosChannel make_channel(const ArrayGeometry& geometry, const LosChannelParams& params);

// Near-field steering is used when the BS sits inside the Fraunhofer distance.
BsRisChannel make_bs_ris_channel(const ArrayGeometry& geometry, double bs_distance, DirectionParams bs_dir);

// Draws a user: angles U[-pi/3, pi/3]; distance U[d_B, d_f/10] (near) or
// U[d_f, 5 d_f] (far); Friis gain; uniform phase.
LosChannelParams sample_user(const ArrayGeometry& geometry, Regime regime, Rng& rng);

// One CN(0, variance) sample.
complex_t complex_normal(Rng& rng, double variance);

// y = sqrt(P_p) B D_h g + B D_h v + w, with an independent v for every row
// of B (one pilot slot each).
CVector observe_pilots(const CMatrix& b_matrix, const CVector& h, const CVector& g, double p_p,
                       const NoiseModel& noise, Rng& rng);

}  // namespace aris
