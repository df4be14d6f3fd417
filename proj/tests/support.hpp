#pragma once

#include <cmath>
#include <random>

#include "aris/beamcontrol.hpp"
#include "aris/channel.hpp"
#include "aris/estimator.hpp"
#include "aris/geometry.hpp"
#include "aris/harness.hpp"
#include "aris/types.hpp"

namespace testing {

using namespace aris;

inline ArrayGeometry upa(int n_h, int n_v, double carrier = 28e9) {
    return ArrayGeometry::half_wavelength(n_h, n_v, carrier);
}

inline CVector random_cvector(Rng& rng, Eigen::Index n, double variance = 1.0) {
    CVector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = complex_normal(rng, variance);
    return x;
}

inline CMatrix random_cmatrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    CMatrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) m.row(r) = random_cvector(rng, cols).transpose();
    return m;
}

inline CVector random_phases(Rng& rng, Eigen::Index n) {
    std::uniform_real_distribution<double> ph(0.0, kTwoPi);
    CVector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = std::polar(1.0, ph(rng));
    return x;
}

inline double phase_gap(complex_t a, complex_t b) { return std::abs(std::arg(a * std::conj(b))); }

// Element phase from straight Euclidean distances, independent of the library.
inline double near_phase_oracle(const ArrayGeometry& g, const DirectionParams& d, std::size_t n) {
    const double r = *d.distance;
    const double px = r * std::sin(d.azimuth) * std::cos(d.elevation);
    const double py = r * std::cos(d.azimuth) * std::cos(d.elevation);
    const double pz = r * std::sin(d.elevation);
    const double x = static_cast<double>((n - 1) % static_cast<std::size_t>(g.n_h)) * g.delta_h;
    const double z = static_cast<double>((n - 1) / static_cast<std::size_t>(g.n_h)) * g.delta_v;
    const double rn = std::sqrt((px - x) * (px - x) + py * py + (pz - z) * (pz - z));
    return kTwoPi / g.wavelength * (rn - r);
}

// Negative log-likelihood (up to constants) of g = sqrt(beta) e^{j omega} a
// under y = sqrt(P_p) B D_h g + noise. Takes an explicit F^-1 and the
// noiseless response m = B D_h a so it shares nothing with the library's
// whitening path.
inline double nll(const CVector& y, const CMatrix& f_inv, const CVector& m, double p_p, double beta, double omega) {
    const CVector e = y - std::sqrt(p_p * beta) * std::polar(1.0, omega) * m;
    return (e.adjoint() * f_inv * e).value().real();
}

inline CMatrix explicit_covariance(const CMatrix& b, const CVector& h, const NoiseModel& noise) {
    const CMatrix m = b * h.asDiagonal();
    // independent amplification noise per slot: the slot-l term is sigma_v^2 |row l of B D_h|^2
    CMatrix f = noise.sigma2 * CMatrix::Identity(b.rows(), b.rows());
    for (Eigen::Index l = 0; l < b.rows(); ++l) {
        double power = 0.0;
        for (Eigen::Index n = 0; n < b.cols(); ++n) power += std::norm(m(l, n));
        f(l, l) += noise.sigma_v2 * power;
    }
    return f;
}

// On-grid user: a codebook entry with a Friis gain and a random phase.
inline LosChannelParams on_grid_user(const Codebook& cb, std::size_t k, double wavelength, Rng& rng) {
    std::uniform_real_distribution<double> ph(0.0, kTwoPi);
    LosChannelParams p;
    p.dir = cb.params(k);
    p.beta = friis_gain(p.dir.distance.value_or(10.0), wavelength);
    p.omega = ph(rng);
    return p;
}

}  // namespace testing
