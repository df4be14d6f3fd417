#include "aris/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "aris/protocol.hpp"

namespace aris {

double nmse(const CVector& g_hat, const CVector& g) {
    if (g_hat.size() != g.size()) throw std::invalid_argument("nmse: dimension mismatch");
    const double ref = g.squaredNorm();
    if (!(ref > 0.0)) throw std::invalid_argument("nmse: true channel is zero");
    return (g_hat - g).squaredNorm() / ref;
}

double nmse_cascaded(const CVector& g_hat, const CVector& g, const CVector& h) {
    return nmse(h.cwiseProduct(g_hat), h.cwiseProduct(g));
}

double spectral_efficiency(const CVector& phi, const CVector& h, const CVector& g, double p_d,
                           const NoiseModel& noise) {
    if (phi.size() != h.size() || g.size() != h.size()) {
        throw std::invalid_argument("spectral_efficiency: dimension mismatch");
    }
    if (!(p_d >= 0.0)) throw std::invalid_argument("spectral_efficiency: data power must be >= 0");
    const CVector cascade = phi.cwiseProduct(h);  // (phi^T D_h)^T
    const double signal = p_d * std::norm((cascade.transpose() * g).value());
    const double interference = noise.sigma2 + cascade.squaredNorm() * noise.sigma_v2;
    if (signal == 0.0) return 0.0;
    return std::log2(1.0 + signal / interference);
}

double capacity_bound(RisMode mode, const CVector& h, const CVector& g_true, const PowerBudget& powers,
                      const NoiseModel& noise) {
    NoiseModel effective = noise;
    if (mode == RisMode::passive) effective.sigma_v2 = 0.0;
    EstimateResult perfect;
    perfect.g_hat = g_true;
    const auto config = configure_for_data(perfect, mode, h, g_true, powers, effective);
    return spectral_efficiency(config.phi, h, g_true, powers.p_d, effective);
}

}  // namespace aris
