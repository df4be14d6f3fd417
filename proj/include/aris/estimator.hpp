#pragma once

#include <optional>
#include <vector>

#include "aris/channel.hpp"
#include "aris/geometry.hpp"
#include "aris/types.hpp"

namespace aris {

// F = sigma^2 I + sigma_v^2 diag(B D_h D_h^H B^H), held as a Cholesky factor.
// Only the diagonal of the amplification term survives because each pilot
// slot draws its own amplification noise.
// F is never inverted; every use is a triangular solve.
//
// When both noise powers are zero F vanishes. The estimator only depends on
// F up to a positive scale, so that case is handled as the limit F -> c I.
class NoiseCovariance {
public:
    NoiseCovariance() = default;
    NoiseCovariance(CMatrix f, bool noiseless_limit);

    const CMatrix& matrix() const { return f_; }
    Eigen::Index dim() const { return f_.rows(); }
    bool noiseless_limit() const { return identity_; }

    // L^{-1} x where F = L L^H.
    CMatrix whiten(const CMatrix& x) const;
    // F^{-1} x.
    CMatrix solve(const CMatrix& x) const;

private:
    CMatrix f_;
    Eigen::LLT<CMatrix> llt_;
    bool identity_ = false;
};

// Throws std::invalid_argument on non-finite input or a covariance that is
// not positive definite.
NoiseCovariance noise_covariance(const CMatrix& b_matrix, const CVector& h, const NoiseModel& noise);

// inner = y^H F^{-1} B D_h a, quad = a^H D_h^H B^H F^{-1} B D_h a.
struct Projection {
    complex_t inner;
    double quad = 0.0;
    // |u - z (z^H u) / |z|^2|^2 summed term by term. Equals |u|^2 - objective
    // but keeps its precision when one pilot dominates u, so candidates are
    // ranked by it.
    double residual = 0.0;
    bool observable = false;

    double objective() const { return observable ? std::norm(inner) / quad : 0.0; }
};

// The pieces every candidate evaluation needs: u = L^{-1} y, W = L^{-1} B D_h.
struct WhitenedProblem {
    CVector u;
    CMatrix w;
    double w_norm2 = 0.0;  // squared Frobenius norm of w

    // Projection from precomputed z = W a; a_norm2 = |a|^2.
    Projection from_projected(const CVector& z, double a_norm2) const;
};

WhitenedProblem whiten_problem(const CVector& y, const NoiseCovariance& cov, const CMatrix& b_matrix,
                               const CVector& h);

Projection project(const WhitenedProblem& problem, const CVector& a);

// |y^H F^-1 B D_h a|^2 / (a^H D_h^H B^H F^-1 B D_h a); nullopt when B D_h a = 0.
std::optional<double> objective(const CVector& y, const NoiseCovariance& cov, const CMatrix& b_matrix,
                                const CVector& h, const CVector& a_psi);

struct OmegaEstimate {
    double omega = 0.0;
    bool degenerate = false;  // inner product was zero; omega set to 0
};

OmegaEstimate estimate_omega(const CVector& y, const NoiseCovariance& cov, const CMatrix& b_matrix,
                             const CVector& h, const CVector& a_psi);

// Closed-form gain |inner|^2 / (P_p quad^2); nullopt for an unobservable direction.
std::optional<double> estimate_beta(const CVector& y, const NoiseCovariance& cov, const CMatrix& b_matrix,
                                    const CVector& h, const CVector& a_psi, double p_p);

// Candidate set for the direction search plus the local refinement schedule.
// Refinement works in spatial frequencies (u, v) and, for the near-field
// model, inverse distance. Level k re-grids +-coarse_step * shrink^(k-1) around
// the incumbent.
struct SearchGrid {
    SteeringModel model = SteeringModel::far_field;
    ArrayGeometry geometry;
    std::vector<DirectionParams> candidates;
    CMatrix steering;  // N x K, column k = a(candidates[k])

    double u_step = 0.0;
    double v_step = 0.0;
    double inv_distance_step = 0.0;
    double max_inv_distance = 0.0;  // 1 / d_B
    int depth = 4;
    double shrink = 0.25;
    int points_per_axis = 5;
    int max_recentre = 8;  // passes per level while the incumbent keeps moving
    int starts = 1;        // coarse points refined
    int polish_evaluations = 200;  // Levenberg-Marquardt budget after the grid levels; 0 disables

    static SearchGrid build(const ArrayGeometry& geometry, SteeringModel model,
                            std::vector<DirectionParams> candidates, double u_step, double v_step,
                            double inv_distance_step, double max_inv_distance, int depth = 4,
                            double shrink = 0.25, int points_per_axis = 5);

    std::size_t size() const { return candidates.size(); }
};

struct PsiEstimate {
    DirectionParams psi;
    Projection projection;  // at psi
    std::size_t coarse_index = 0;
};

// Coarse pass over the grid, then local refinement from the `starts` best
// coarse points (lowest index wins ties) and from every hint; the refined
// point with the smallest residual (highest objective) is returned, earliest
// start on ties.
// nullopt if no candidate is observable.
std::optional<PsiEstimate> estimate_psi(const WhitenedProblem& problem, const SearchGrid& grid,
                                        const std::vector<DirectionParams>& hints = {});
std::optional<PsiEstimate> estimate_psi(const CVector& y, const NoiseCovariance& cov, const CMatrix& b_matrix,
                                        const CVector& h, const SearchGrid& grid,
                                        const std::vector<DirectionParams>& hints = {});

struct EstimateResult {
    double beta_hat = 0.0;
    double omega_hat = 0.0;
    DirectionParams psi_hat;
    CVector g_hat;
    double objective_value = 0.0;
    bool degenerate = false;
};

// psi -> omega -> beta -> g_hat. nullopt when the direction search fails.
std::optional<EstimateResult> estimate_channel(const CVector& y, const NoiseCovariance& cov,
                                               const CMatrix& b_matrix, const CVector& h,
                                               const SearchGrid& grid, double p_p,
                                               const std::vector<DirectionParams>& hints = {});

}  // namespace aris
