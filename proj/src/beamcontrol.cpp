#include "aris/beamcontrol.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace aris {

Codebook::Codebook(std::vector<DirectionParams> params, CMatrix beams)
    : params_(std::move(params)),
      beams_(std::make_shared<const CMatrix>(std::move(beams))),
      used_(params_.size(), false),
      remaining_(params_.size()) {
    if (static_cast<Eigen::Index>(params_.size()) != beams_->cols()) {
        throw std::invalid_argument("codebook: params/beams size mismatch");
    }
}

CVector Codebook::beam(std::size_t k) const {
    if (k >= size()) throw std::out_of_range("codebook index out of range");
    return beams_->col(static_cast<Eigen::Index>(k));
}

void Codebook::mark_used(std::size_t k) {
    if (!used_.at(k)) {
        used_[k] = true;
        --remaining_;
    }
}

void Codebook::reset_usage() {
    used_.assign(params_.size(), false);
    remaining_ = params_.size();
}

namespace {

std::vector<double> spatial_axis(int count, double spacing, double wavelength) {
    std::vector<double> axis(static_cast<std::size_t>(count));
    for (int m = 0; m < count; ++m) {
        axis[static_cast<std::size_t>(m)] = (2.0 * m / count - 1.0) * wavelength / (2.0 * spacing);
    }
    return axis;
}

Codebook make_codebook(const ArrayGeometry& geometry, const std::vector<std::optional<double>>& rings,
                       const CodebookOptions& options) {
    geometry.validate();
    const auto us = spatial_axis(geometry.n_h, geometry.delta_h, geometry.wavelength);
    const auto vs = spatial_axis(geometry.n_v, geometry.delta_v, geometry.wavelength);
    const double tol = 1e-12;

    std::vector<DirectionParams> params;
    std::vector<CVector> beams;
    for (const auto& ring : rings) {
        for (double v : vs) {
            if (std::abs(v) > options.max_sin + tol) continue;
            for (double u : us) {
                if (std::abs(u) > options.max_sin + tol) continue;
                const auto dir = direction_from_spatial(u, v, ring);
                if (!dir) continue;
                params.push_back(*dir);
                beams.push_back(steering(geometry, *dir).conjugate());
            }
        }
    }
    if (beams.empty()) throw std::invalid_argument("codebook: no spatial-frequency pair in the visible region");

    CMatrix matrix(static_cast<Eigen::Index>(geometry.size()), static_cast<Eigen::Index>(beams.size()));
    for (std::size_t k = 0; k < beams.size(); ++k) matrix.col(static_cast<Eigen::Index>(k)) = beams[k];
    Codebook cb(std::move(params), std::move(matrix));
    cb.u_step = geometry.wavelength / (geometry.n_h * geometry.delta_h);
    cb.v_step = geometry.wavelength / (geometry.n_v * geometry.delta_v);
    return cb;
}

}  // namespace

Codebook build_codebook(const ArrayGeometry& geometry, Regime regime, const CodebookOptions& options) {
    if (regime == Regime::far) return make_codebook(geometry, {std::nullopt}, options);

    const int rings = options.near_distance_rings;
    if (rings < 1) throw std::invalid_argument("codebook: need at least one distance ring");
    const auto bounds = field_boundaries(geometry);
    if (!(bounds.bjornson > 0.0)) throw std::invalid_argument("codebook: point aperture has no near field");
    std::vector<double> distances;
    const double inv_near = 1.0 / bounds.bjornson;
    const double inv_far = 1.0 / bounds.fraunhofer;
    for (int k = 0; k < rings; ++k) {
        const double t = rings == 1 ? 0.0 : static_cast<double>(k) / (rings - 1);
        distances.push_back(1.0 / (inv_near + t * (inv_far - inv_near)));
    }
    return build_codebook(geometry, distances, options);
}

Codebook build_codebook(const ArrayGeometry& geometry, const std::vector<double>& ring_distances,
                        const CodebookOptions& options) {
    if (ring_distances.empty()) throw std::invalid_argument("codebook: need at least one distance ring");
    std::vector<std::optional<double>> rings;
    for (double d : ring_distances) {
        if (!(d > 0.0)) throw std::invalid_argument("codebook: ring distance must be positive");
        rings.emplace_back(d);
    }
    auto cb = make_codebook(geometry, rings, options);
    if (ring_distances.size() > 1) {
        const double span = std::abs(1.0 / ring_distances.front() - 1.0 / ring_distances.back());
        cb.inv_distance_step = span / static_cast<double>(ring_distances.size() - 1);
    } else {
        cb.inv_distance_step = 1.0 / ring_distances.front();
    }
    return cb;
}

namespace {

// Cumulative phase so that element m sees local spatial frequency sweep[m].
std::vector<double> chirp_phases(int count, double lo, double hi, double spacing, double wavelength) {
    std::vector<double> phases(static_cast<std::size_t>(count), 0.0);
    const double k0 = kTwoPi / wavelength * spacing;
    for (int m = 1; m < count; ++m) {
        const double t = count == 1 ? 0.5 : static_cast<double>(m - 1) / (count - 1);
        const double freq = lo + t * (hi - lo);
        phases[static_cast<std::size_t>(m)] = phases[static_cast<std::size_t>(m - 1)] + k0 * freq;
    }
    return phases;
}

// Elevation sweep in two halves, upper half first. Paired with the plain
// sweep it makes the ratio of the two wide-beam responses depend on v; two
// identical vertical sweeps cancel in that ratio and leave v unobservable.
std::vector<double> split_chirp_phases(int count, double s, double spacing, double wavelength) {
    const int upper = count / 2;
    if (upper < 2) return chirp_phases(count, s, -s, spacing, wavelength);
    auto phases = chirp_phases(upper, 0.0, s, spacing, wavelength);
    const auto lower = chirp_phases(count - upper, -s, 0.0, spacing, wavelength);
    const double join = phases.back() - kTwoPi / wavelength * spacing * s;
    for (double p : lower) phases.push_back(join + p);
    return phases;
}

CVector sector_beam(const ArrayGeometry& geometry, double u_lo, double u_hi, bool split_elevation) {
    const double s = std::sin(kPi / 3.0);
    const auto ph_h = chirp_phases(geometry.n_h, u_lo, u_hi, geometry.delta_h, geometry.wavelength);
    const auto ph_v = split_elevation ? split_chirp_phases(geometry.n_v, s, geometry.delta_v, geometry.wavelength)
                                      : chirp_phases(geometry.n_v, -s, s, geometry.delta_v, geometry.wavelength);
    CVector beam(static_cast<Eigen::Index>(geometry.size()));
    Eigen::Index n = 0;
    for (int row = 0; row < geometry.n_v; ++row) {
        for (int col = 0; col < geometry.n_h; ++col) {
            // the far-field response carries exp(-j ...), so focusing adds +j
            beam[n++] = std::polar(1.0, ph_h[static_cast<std::size_t>(col)] + ph_v[static_cast<std::size_t>(row)]);
        }
    }
    return beam;
}

}  // namespace

WideBeams wide_beams(const ArrayGeometry& geometry) {
    geometry.validate();
    const double s = std::sin(kPi / 3.0);
    return {sector_beam(geometry, -s, 0.0, false), sector_beam(geometry, 0.0, s, true)};
}

double beam_gain(const CVector& theta, const ArrayGeometry& geometry, const DirectionParams& dir) {
    const double n = static_cast<double>(geometry.size());
    return std::norm((theta.transpose() * steering(geometry, dir)).value()) / (n * n);
}

InitialConfigs initial_configs(const CVector& wide1, const CVector& wide2, double p_ris) {
    if (!(p_ris > 0.0)) throw std::invalid_argument("RIS power must be positive");
    if (wide1.size() != wide2.size() || wide1.size() == 0) throw std::invalid_argument("wide beams: size mismatch");
    const double scale = std::sqrt(p_ris / static_cast<double>(wide1.size()));
    return {scale * wide1, scale * wide2};
}

PhaseAlignment phase_align(const CVector& h, const CVector& g_hat) {
    if (h.size() != g_hat.size()) throw std::invalid_argument("phase_align: dimension mismatch");
    PhaseAlignment out;
    out.phases.resize(h.size());
    for (Eigen::Index n = 0; n < h.size(); ++n) {
        const complex_t c = h[n] * g_hat[n];
        if (c == complex_t(0.0, 0.0)) {
            out.phases[n] = 1.0;
            ++out.degenerate;
        } else {
            out.phases[n] = std::polar(1.0, -std::arg(c));
        }
    }
    return out;
}

AmplificationProfile amplification_profile(const CVector& g_hat, const CVector& h, double p_d, double p_ris,
                                           const NoiseModel& noise) {
    if (g_hat.size() != h.size()) throw std::invalid_argument("amplification_profile: dimension mismatch");
    if (!(p_ris > 0.0)) throw std::invalid_argument("amplification_profile: RIS power must be positive");
    const bool equal_noise_limit = noise.noiseless();
    if (!equal_noise_limit && !(noise.sigma_v2 > 0.0 && noise.sigma2 > 0.0)) {
        throw std::invalid_argument("amplification_profile: undefined without amplification noise");
    }

    const auto n = h.size();
    RVector alpha(n), beta(n), gamma(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double g2 = std::norm(g_hat[i]);
        alpha[i] = std::abs(g_hat[i]) * std::abs(h[i]);
        beta[i] = std::norm(h[i]);
        gamma[i] = equal_noise_limit ? g2 * p_d / p_ris
                                     : (g2 * p_d / noise.sigma_v2 + 1.0) / (p_ris / noise.sigma2);
    }
    const RVector denom = beta + gamma;
    const double sum = (alpha.array().square() * gamma.array() / denom.array().square()).sum();
    if (!(sum > 0.0) || !std::isfinite(sum)) {
        throw std::invalid_argument("amplification_profile: channel estimate carries no energy");
    }
    AmplificationProfile out;
    out.c = 1.0 / std::sqrt(sum);
    out.p = out.c * alpha.cwiseQuotient(denom);
    return out;
}

CVector compose_config(const AmplificationProfile& profile, const CVector& phases) {
    if (profile.p.size() != phases.size()) throw std::invalid_argument("compose_config: dimension mismatch");
    return profile.p.cast<complex_t>().cwiseProduct(phases);
}

std::optional<BeamSelection> closest_beam(const CVector& phi_star, Codebook& codebook) {
    if (phi_star.size() != codebook.beams().rows()) throw std::invalid_argument("closest_beam: dimension mismatch");
    // theta^H phi is the conjugate of phi^H theta; magnitudes agree
    const CVector scores = codebook.beams().adjoint() * phi_star;
    std::optional<std::size_t> best;
    double best_value = -1.0;
    for (std::size_t k = 0; k < codebook.size(); ++k) {
        if (codebook.used(k)) continue;
        const double value = std::abs(scores[static_cast<Eigen::Index>(k)]);
        if (value > best_value) {
            best_value = value;
            best = k;
        }
    }
    if (!best) return std::nullopt;
    codebook.mark_used(*best);
    return BeamSelection{*best, codebook.beam(*best)};
}

void export_codebook(const Codebook& codebook, std::ostream& os) {
    const auto precision = os.precision();
    os << std::setprecision(17);
    for (std::size_t k = 0; k < codebook.size(); ++k) {
        const auto& p = codebook.params(k);
        os << k << ' ' << p.azimuth << ' ' << p.elevation << ' ';
        if (p.distance) {
            os << *p.distance;
        } else {
            os << "inf";
        }
        const auto beam = codebook.beams().col(static_cast<Eigen::Index>(k));
        for (Eigen::Index n = 0; n < beam.size(); ++n) os << ' ' << std::arg(beam[n]);
        os << '\n';
    }
    os.precision(precision);
}

}  // namespace aris
