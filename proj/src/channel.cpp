#include "aris/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace aris {

namespace {
constexpr double kBoltzmann = 1.380649e-23;
constexpr double kReferenceTemperature = 290.0;
}  // namespace

void NoiseModel::validate() const {
    if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw std::invalid_argument("sigma2 must be finite and >= 0");
    if (!(sigma_v2 >= 0.0) || !std::isfinite(sigma_v2)) throw std::invalid_argument("sigma_v2 must be finite and >= 0");
}

double thermal_noise_power(double bandwidth_hz, double noise_figure_db) {
    return kBoltzmann * kReferenceTemperature * bandwidth_hz * std::pow(10.0, noise_figure_db / 10.0);
}

double friis_gain(double distance, double wavelength) {
    if (!(distance > 0.0)) throw std::invalid_argument("link distance must be positive");
    const double a = wavelength / (4.0 * kPi * distance);
    return a * a;
}

LosChannel make_channel(const ArrayGeometry& geometry, const LosChannelParams& params) {
    if (!(params.beta >= 0.0)) throw std::invalid_argument("channel gain must be >= 0");
    const complex_t scale = std::sqrt(params.beta) * std::polar(1.0, params.omega);
    return {scale * steering(geometry, params.dir)};
}

BsRisChannel make_bs_ris_channel(const ArrayGeometry& geometry, double bs_distance, DirectionParams bs_dir) {
    if (!(bs_distance > 0.0)) throw std::invalid_argument("BS distance must be positive");
    const auto bounds = field_boundaries(geometry);
    if (bs_distance < bounds.fraunhofer) {
        bs_dir.distance = bs_distance;
    } else {
        bs_dir.distance.reset();
    }
    return {std::sqrt(friis_gain(bs_distance, geometry.wavelength)) * steering(geometry, bs_dir)};
}

LosChannelParams sample_user(const ArrayGeometry& geometry, Regime regime, Rng& rng) {
    const auto bounds = field_boundaries(geometry);
    std::uniform_real_distribution<double> angle(-kPi / 3.0, kPi / 3.0);
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    const double lo = regime == Regime::near ? bounds.bjornson : bounds.fraunhofer;
    const double hi = regime == Regime::near ? bounds.fraunhofer / 10.0 : 5.0 * bounds.fraunhofer;
    std::uniform_real_distribution<double> range(std::min(lo, hi), std::max(lo, hi));

    LosChannelParams p;
    p.dir.azimuth = angle(rng);
    p.dir.elevation = angle(rng);
    p.dir.distance = range(rng);
    p.beta = friis_gain(*p.dir.distance, geometry.wavelength);
    p.omega = wrap_phase(phase(rng));
    return p;
}

complex_t complex_normal(Rng& rng, double variance) {
    std::normal_distribution<double> unit(0.0, 1.0);
    const double s = std::sqrt(variance / 2.0);
    const double re = unit(rng);
    const double im = unit(rng);
    return {s * re, s * im};
}

CVector observe_pilots(const CMatrix& b_matrix, const CVector& h, const CVector& g, double p_p,
                       const NoiseModel& noise, Rng& rng) {
    const auto n = h.size();
    if (b_matrix.cols() != n || g.size() != n) throw std::invalid_argument("observe_pilots: dimension mismatch");
    if (!(p_p > 0.0)) throw std::invalid_argument("pilot power must be positive");

    const CVector cascaded = h.cwiseProduct(g);
    CVector y = std::sqrt(p_p) * (b_matrix * cascaded);
    CVector v(n);
    for (Eigen::Index l = 0; l < b_matrix.rows(); ++l) {
        if (noise.sigma_v2 > 0.0) {
            for (Eigen::Index i = 0; i < n; ++i) v[i] = complex_normal(rng, noise.sigma_v2);
            y[l] += (b_matrix.row(l) * h.cwiseProduct(v)).value();
        }
        if (noise.sigma2 > 0.0) y[l] += complex_normal(rng, noise.sigma2);
    }
    return y;
}

}  // namespace aris
