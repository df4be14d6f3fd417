#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "aris/channel.hpp"
#include "aris/geometry.hpp"
#include "aris/types.hpp"

namespace aris {

// Phase-only beams. Entry k focuses on params[k] under the received-signal
// model phi^T D_h g, i.e. beam = conj(a(params[k])).
class Codebook {
public:
    Codebook() = default;
    // beams: N x K, one phase-only beam per column.
    Codebook(std::vector<DirectionParams> params, CMatrix beams);

    std::size_t size() const { return params_.size(); }
    std::size_t remaining() const { return remaining_; }
    bool used(std::size_t k) const { return used_.at(k); }
    void mark_used(std::size_t k);
    void reset_usage();

    CVector beam(std::size_t k) const;
    // Shared between copies; only the usage flags are per copy.
    const CMatrix& beams() const { return *beams_; }
    const DirectionParams& params(std::size_t k) const { return params_.at(k); }
    const std::vector<DirectionParams>& all_params() const { return params_; }

    // Spatial-frequency and inverse-distance spacing of the generating grid.
    double u_step = 0.0;
    double v_step = 0.0;
    double inv_distance_step = 0.0;

private:
    std::vector<DirectionParams> params_;
    std::shared_ptr<const CMatrix> beams_;
    std::vector<bool> used_;
    std::size_t remaining_ = 0;
};

struct CodebookOptions {
    int near_distance_rings = 4;
    double max_sin = 0.8660254037844386;  // visible region |u|, |v| <= sin(pi/3)
};

// Far field: the N_H x N_V orthogonal spatial-frequency pairs
// u = (2m/N_H - 1) lambda/(2 Delta_H), v likewise, restricted to the visible
// region. Near field: the same pairs at `near_distance_rings` distances
// uniform in 1/r over [d_B, d_f]. Throws if no pair survives.
Codebook build_codebook(const ArrayGeometry& geometry, Regime regime, const CodebookOptions& options = {});

// Near-field codebook at explicit ring distances.
Codebook build_codebook(const ArrayGeometry& geometry, const std::vector<double>& ring_distances,
                        const CodebookOptions& options = {});

struct WideBeams {
    CVector first;   // azimuth sector [-pi/3, 0]
    CVector second;  // azimuth sector [0, pi/3]
};

// Each column is steered to its own azimuth along a uniform sweep of the
// sector and each row to its own elevation along [-pi/3, pi/3]; phases are
// accumulated so the local spatial frequency follows the sweep. The second
// beam visits the elevations in two halves (upper first) so the pair also
// resolves elevation.
WideBeams wide_beams(const ArrayGeometry& geometry);

// Received-signal gain |theta^T a(dir)|^2 / N^2.
double beam_gain(const CVector& theta, const ArrayGeometry& geometry, const DirectionParams& dir);

struct InitialConfigs {
    CVector first;
    CVector second;
};

// phi_i = sqrt(P_RIS / N) theta_w,i.
InitialConfigs initial_configs(const CVector& wide1, const CVector& wide2, double p_ris);

struct PhaseAlignment {
    CVector phases;                // exp(-j arg(h_n g_n))
    std::size_t degenerate = 0;    // entries with h_n g_n = 0, given phase 0
};

PhaseAlignment phase_align(const CVector& h, const CVector& g_hat);

struct AmplificationProfile {
    RVector p;
    double c = 0.0;
};

// p_n = C alpha_n / (beta_n + gamma_n) with alpha_n = |g_n||h_n|,
// beta_n = |h_n|^2, gamma_n = (|g_n|^2 p_d / sigma_v^2 + 1) / (P_ris / sigma^2),
// C = (sum alpha_n^2 gamma_n / (beta_n + gamma_n)^2)^(-1/2).
// With both noise powers zero the equal-noise limit gamma_n = |g_n|^2 p_d / P_ris
// is used. Throws for sigma_v^2 = 0 with sigma^2 > 0 or an all-zero g_hat.
AmplificationProfile amplification_profile(const CVector& g_hat, const CVector& h, double p_d, double p_ris,
                                           const NoiseModel& noise);

// phi = p (.) phases.
CVector compose_config(const AmplificationProfile& profile, const CVector& phases);

struct BeamSelection {
    std::size_t index = 0;
    CVector beam;
};

// argmax over unused entries of |phi_star^H theta| (lowest index on ties);
// the winner is marked used. nullopt once the codebook is exhausted.
std::optional<BeamSelection> closest_beam(const CVector& phi_star, Codebook& codebook);

// One line per entry: index, azimuth, elevation, distance (or "inf"), then
// the N phases in radians.
void export_codebook(const Codebook& codebook, std::ostream& os);

}  // namespace aris
