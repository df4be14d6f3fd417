#pragma once

#include "aris/channel.hpp"
#include "aris/types.hpp"

namespace aris {

// |g_hat - g|^2 / |g|^2. Throws for a zero true channel.
double nmse(const CVector& g_hat, const CVector& g);

// Same ratio on the cascaded channel D_h g.
double nmse_cascaded(const CVector& g_hat, const CVector& g, const CVector& h);

// log2(1 + P_d |phi^T D_h g|^2 / (sigma^2 + |phi^T D_h|^2 sigma_v^2)).
double spectral_efficiency(const CVector& phi, const CVector& h, const CVector& g, double p_d,
                           const NoiseModel& noise);

// Rate with perfect knowledge of g, using the same data-configuration rule
// as the protocol (see configure_for_data).
double capacity_bound(RisMode mode, const CVector& h, const CVector& g_true, const PowerBudget& powers,
                      const NoiseModel& noise);

}  // namespace aris
