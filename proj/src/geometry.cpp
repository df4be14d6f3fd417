#include "aris/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace aris {

std::string_view to_string(Regime r) { return r == Regime::near ? "near" : "far"; }
std::string_view to_string(RisMode m) { return m == RisMode::active ? "active" : "passive"; }
std::string_view to_string(SteeringModel m) {
    return m == SteeringModel::near_field ? "near_field" : "far_field";
}

Regime parse_regime(std::string_view s) {
    if (s == "near") return Regime::near;
    if (s == "far") return Regime::far;
    throw std::invalid_argument("unknown regime '" + std::string(s) + "'");
}

RisMode parse_mode(std::string_view s) {
    if (s == "active") return RisMode::active;
    if (s == "passive") return RisMode::passive;
    throw std::invalid_argument("unknown mode '" + std::string(s) + "'");
}

SteeringModel parse_model(std::string_view s) {
    if (s == "near_field") return SteeringModel::near_field;
    if (s == "far_field") return SteeringModel::far_field;
    throw std::invalid_argument("unknown model '" + std::string(s) + "'");
}

double wrap_phase(double radians) {
    double w = std::fmod(radians, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    // fmod of a tiny negative value can round up to exactly 2*pi
    if (w >= kTwoPi) w = 0.0;
    return w;
}

void ArrayGeometry::validate() const {
    if (n_h < 1 || n_v < 1) throw std::invalid_argument("array must have at least one element per axis");
    if (!(delta_h > 0.0) || !(delta_v > 0.0)) throw std::invalid_argument("element spacing must be positive");
    if (!(wavelength > 0.0)) throw std::invalid_argument("wavelength must be positive");
}

ArrayGeometry ArrayGeometry::half_wavelength(int n_h, int n_v, double carrier_hz) {
    const double lambda = kSpeedOfLight / carrier_hz;
    ArrayGeometry g{n_h, n_v, lambda / 2.0, lambda / 2.0, lambda};
    g.validate();
    return g;
}

double DirectionParams::u() const { return std::sin(azimuth) * std::cos(elevation); }
double DirectionParams::v() const { return std::sin(elevation); }

ElementPosition element_position(const ArrayGeometry& geometry, std::size_t n) {
    if (n < 1 || n > geometry.size()) {
        throw std::out_of_range("element index " + std::to_string(n) + " outside 1.." +
                                std::to_string(geometry.size()));
    }
    const auto nh = static_cast<std::size_t>(geometry.n_h);
    const std::size_t col = (n - 1) % nh;        // n_H - 1
    const std::size_t row = (n + nh - 1) / nh - 1; // ceil(n / N_H) - 1
    return {static_cast<double>(col) * geometry.delta_h, static_cast<double>(row) * geometry.delta_v};
}

CVector steering_far(const ArrayGeometry& geometry, const DirectionParams& dir) {
    const double k0 = kTwoPi / geometry.wavelength;
    const double du = k0 * geometry.delta_h * dir.u();
    const double dv = k0 * geometry.delta_v * dir.v();
    CVector a(static_cast<Eigen::Index>(geometry.size()));
    Eigen::Index n = 0;
    for (int row = 0; row < geometry.n_v; ++row) {
        for (int col = 0; col < geometry.n_h; ++col) {
            const double phase = -(du * col + dv * row);
            a[n++] = complex_t(std::cos(phase), std::sin(phase));
        }
    }
    return a;
}

CVector steering_near(const ArrayGeometry& geometry, const DirectionParams& dir) {
    if (!dir.distance || !(*dir.distance > 0.0)) {
        throw std::invalid_argument("near-field steering needs a positive distance");
    }
    const double r = *dir.distance;
    const double k0 = kTwoPi / geometry.wavelength;
    const double px = r * std::sin(dir.azimuth) * std::cos(dir.elevation);
    const double py = r * std::cos(dir.azimuth) * std::cos(dir.elevation);
    const double pz = r * std::sin(dir.elevation);
    CVector a(static_cast<Eigen::Index>(geometry.size()));
    Eigen::Index n = 0;
    for (int row = 0; row < geometry.n_v; ++row) {
        const double z = row * geometry.delta_v;
        for (int col = 0; col < geometry.n_h; ++col) {
            const double x = col * geometry.delta_h;
            // r_n - r_1 = (|e_n|^2 - 2 p.e_n) / (r_n + r_1), stable for large r
            const double dx = px - x;
            const double dz = pz - z;
            const double rn = std::sqrt(dx * dx + py * py + dz * dz);
            const double s = (x * x + z * z - 2.0 * (px * x + pz * z)) / (rn + r);
            const double phase = k0 * s;
            a[n++] = complex_t(std::cos(phase), std::sin(phase));
        }
    }
    return a;
}

CVector steering(const ArrayGeometry& geometry, const DirectionParams& dir) {
    return dir.distance ? steering_near(geometry, dir) : steering_far(geometry, dir);
}

FieldBoundaries field_boundaries(const ArrayGeometry& geometry) {
    const double width = (geometry.n_h - 1) * geometry.delta_h;
    const double height = (geometry.n_v - 1) * geometry.delta_v;
    const double d = std::hypot(width, height);
    return {d, 2.0 * d * d / geometry.wavelength, 2.0 * d};
}

std::optional<DirectionParams> direction_from_spatial(double u, double v, std::optional<double> distance) {
    if (!(std::abs(v) <= 1.0)) return std::nullopt;
    const double cos_el = std::sqrt(std::max(0.0, 1.0 - v * v));
    if (std::abs(u) > cos_el) return std::nullopt;
    DirectionParams d;
    d.elevation = std::asin(v);
    d.azimuth = cos_el > 0.0 ? std::asin(std::clamp(u / cos_el, -1.0, 1.0)) : 0.0;
    d.distance = distance;
    return d;
}

}  // namespace aris
