#include "aris/estimator.hpp"

#include <algorithm>

#include <unsupported/Eigen/LevenbergMarquardt>
#include <unsupported/Eigen/NumericalDiff>

#include <cmath>
#include <stdexcept>

namespace aris {

namespace {

// |W a|^2 below this fraction of |W|^2 |a|^2 counts as B D_h a = 0.
constexpr double kUnobservableRatio = 1e-24;

bool all_finite(const CMatrix& m) { return m.allFinite(); }

}  // namespace

NoiseCovariance::NoiseCovariance(CMatrix f, bool noiseless_limit) : f_(std::move(f)), identity_(noiseless_limit) {
    if (!identity_) {
        llt_.compute(f_);
        if (llt_.info() != Eigen::Success) {
            throw std::invalid_argument("noise covariance is not positive definite");
        }
    }
}

CMatrix NoiseCovariance::whiten(const CMatrix& x) const {
    if (identity_) return x;
    return llt_.matrixL().solve(x);
}

CMatrix NoiseCovariance::solve(const CMatrix& x) const {
    if (identity_) return x;
    return llt_.solve(x);
}

NoiseCovariance noise_covariance(const CMatrix& b_matrix, const CVector& h, const NoiseModel& noise) {
    if (b_matrix.rows() < 1) throw std::invalid_argument("noise covariance needs at least one pilot");
    if (b_matrix.cols() != h.size()) throw std::invalid_argument("noise covariance: dimension mismatch");
    if (!all_finite(b_matrix) || !h.allFinite()) throw std::invalid_argument("noise covariance: non-finite input");
    noise.validate();

    const auto l = b_matrix.rows();
    const CMatrix m = b_matrix * h.asDiagonal();
    CMatrix f = noise.sigma2 * CMatrix::Identity(l, l);
    // every pilot slot sees its own amplifier noise draw, so rows are uncorrelated
    if (noise.sigma_v2 > 0.0) f.diagonal() += noise.sigma_v2 * m.rowwise().squaredNorm().cast<complex_t>();
    if (noise.noiseless()) return NoiseCovariance(std::move(f), true);
    // exact Hermitian symmetry for the factorization
    f = (0.5 * (f + f.adjoint())).eval();
    return NoiseCovariance(std::move(f), false);
}

Projection WhitenedProblem::from_projected(const CVector& z, double a_norm2) const {
    Projection p;
    p.quad = z.squaredNorm();
    p.inner = u.dot(z);  // conjugates u
    p.observable = p.quad > kUnobservableRatio * w_norm2 * a_norm2 && p.quad > 0.0;
    p.residual = p.observable ? (u - z * (std::conj(p.inner) / p.quad)).squaredNorm() : u.squaredNorm();
    return p;
}

WhitenedProblem whiten_problem(const CVector& y, const NoiseCovariance& cov, const CMatrix& b_matrix,
                               const CVector& h) {
    if (y.size() != b_matrix.rows() || cov.dim() != b_matrix.rows() || h.size() != b_matrix.cols()) {
        throw std::invalid_argument("estimator: dimension mismatch");
    }
    WhitenedProblem p;
    p.u = cov.whiten(y);
    p.w = cov.whiten(b_matrix * h.asDiagonal());
    p.w_norm2 = p.w.squaredNorm();
    return p;
}

Projection project(const WhitenedProblem& problem, const CVector& a) {
    return problem.from_projected(problem.w * a, a.squaredNorm());
}

std::optional<double> objective(const CVector& y, const NoiseCovariance& cov, const CMatrix& b_matrix,
                                const CVector& h, const CVector& a_psi) {
    const auto p = project(whiten_problem(y, cov, b_matrix, h), a_psi);
    if (!p.observable) return std::nullopt;
    return p.objective();
}

OmegaEstimate estimate_omega(const CVector& y, const NoiseCovariance& cov, const CMatrix& b_matrix,
                             const CVector& h, const CVector& a_psi) {
    const auto p = project(whiten_problem(y, cov, b_matrix, h), a_psi);
    if (p.inner == complex_t(0.0, 0.0)) return {0.0, true};
    return {wrap_phase(-std::arg(p.inner)), false};
}

std::optional<double> estimate_beta(const CVector& y, const NoiseCovariance& cov, const CMatrix& b_matrix,
                                    const CVector& h, const CVector& a_psi, double p_p) {
    const auto p = project(whiten_problem(y, cov, b_matrix, h), a_psi);
    if (!p.observable) return std::nullopt;
    return std::norm(p.inner) / (p_p * p.quad * p.quad);
}

SearchGrid SearchGrid::build(const ArrayGeometry& geometry, SteeringModel model,
                             std::vector<DirectionParams> candidates, double u_step, double v_step,
                             double inv_distance_step, double max_inv_distance, int depth, double shrink,
                             int points_per_axis) {
    if (candidates.empty()) throw std::invalid_argument("search grid has no candidates");
    if (depth < 0 || !(shrink > 0.0 && shrink < 1.0) || points_per_axis < 1 || points_per_axis % 2 == 0) {
        throw std::invalid_argument("search grid: invalid refinement schedule");
    }
    SearchGrid g;
    g.model = model;
    g.geometry = geometry;
    g.candidates = std::move(candidates);
    g.u_step = u_step;
    g.v_step = v_step;
    g.inv_distance_step = inv_distance_step;
    g.max_inv_distance = max_inv_distance;
    g.depth = depth;
    g.shrink = shrink;
    g.points_per_axis = points_per_axis;

    const auto n = static_cast<Eigen::Index>(geometry.size());
    g.steering.resize(n, static_cast<Eigen::Index>(g.candidates.size()));
    for (std::size_t k = 0; k < g.candidates.size(); ++k) {
        auto& c = g.candidates[k];
        if (model == SteeringModel::far_field) c.distance.reset();
        g.steering.col(static_cast<Eigen::Index>(k)) = aris::steering(geometry, c);
    }
    return g;
}

namespace {

// One pattern-search pass around the incumbent; true if it moved.
bool refine_step(const WhitenedProblem& problem, const SearchGrid& grid, double scale, PsiEstimate& best) {
    const int half = grid.points_per_axis / 2;
    const bool with_distance = grid.model == SteeringModel::near_field;
    const double a_norm2 = static_cast<double>(grid.geometry.size());
    // spatial frequencies seen from the aperture centre; moving 1/r at fixed
    // (u, v) would otherwise also shift the beam by (centre offset) * d(1/r)
    const double off_h = with_distance ? 0.5 * (grid.geometry.n_h - 1) * grid.geometry.delta_h : 0.0;
    const double off_v = with_distance ? 0.5 * (grid.geometry.n_v - 1) * grid.geometry.delta_v : 0.0;

    const double cinv = best.psi.distance ? 1.0 / *best.psi.distance : 0.0;
    const double cu = best.psi.u() - off_h * cinv;
    const double cv = best.psi.v() - off_v * cinv;
    const double du = grid.u_step * scale;
    const double dv = grid.v_step * scale;
    const double dinv = grid.inv_distance_step * scale;
    const int dist_half = with_distance && dinv > 0.0 ? half : 0;

    bool moved = false;
    double best_value = best.projection.residual;
    PsiEstimate next = best;
    for (int kr = -dist_half; kr <= dist_half; ++kr) {
        const double inv = cinv + kr * dinv;
        if (inv < 0.0 || (grid.max_inv_distance > 0.0 && inv > grid.max_inv_distance)) continue;
        std::optional<double> distance;
        if (with_distance && inv > 0.0) distance = 1.0 / inv;
        for (int kv = -half; kv <= half; ++kv) {
            for (int ku = -half; ku <= half; ++ku) {
                if (ku == 0 && kv == 0 && kr == 0) continue;
                const auto dir = direction_from_spatial(cu + ku * du + off_h * inv, cv + kv * dv + off_v * inv,
                                                        distance);
                if (!dir) continue;
                const CVector a = steering(grid.geometry, *dir);
                const auto p = problem.from_projected(problem.w * a, a_norm2);
                if (!p.observable) continue;
                if (p.residual < best_value) {
                    best_value = p.residual;
                    next.psi = *dir;
                    next.projection = p;
                    moved = true;
                }
            }
        }
    }
    best = next;
    return moved;
}

// Residual of the profiled fit, u - (w^H u / |w|^2) w with w = W a(psi),
// over centre-referenced coordinates in units of the coarse steps.
struct ProfiledResidual {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    using QRSolver = Eigen::ColPivHouseholderQR<Eigen::MatrixXd>;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    const WhitenedProblem* problem;
    const SearchGrid* grid;
    double off_h, off_v;
    bool with_distance;

    int inputs() const { return with_distance ? 3 : 2; }
    int values() const { return static_cast<int>(2 * problem->u.size()); }

    std::optional<DirectionParams> direction(const Eigen::VectorXd& x) const {
        const double inv = with_distance ? x[2] * grid->inv_distance_step : 0.0;
        if (inv < 0.0 || (grid->max_inv_distance > 0.0 && inv > grid->max_inv_distance)) return std::nullopt;
        std::optional<double> distance;
        if (with_distance && inv > 0.0) distance = 1.0 / inv;
        return direction_from_spatial(x[0] * grid->u_step + off_h * inv, x[1] * grid->v_step + off_v * inv, distance);
    }

    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& f) const {
        const auto& u = problem->u;
        const auto n = u.size();
        CVector r = u;
        if (const auto dir = direction(x)) {
            const CVector w = problem->w * steering(grid->geometry, *dir);
            const double w2 = w.squaredNorm();
            if (w2 > 0.0) r -= (w.dot(u) / w2) * w;
        }
        f.resize(2 * n);
        f.head(n) = r.real();
        f.tail(n) = r.imag();
        return 0;
    }
};

void polish(const WhitenedProblem& problem, const SearchGrid& grid, PsiEstimate& best) {
    const bool with_distance = grid.model == SteeringModel::near_field && grid.inv_distance_step > 0.0;
    if (grid.u_step <= 0.0 || grid.v_step <= 0.0) return;
    ProfiledResidual functor{&problem, &grid, 0.0, 0.0, with_distance};
    if (with_distance) {
        functor.off_h = 0.5 * (grid.geometry.n_h - 1) * grid.geometry.delta_h;
        functor.off_v = 0.5 * (grid.geometry.n_v - 1) * grid.geometry.delta_v;
    }
    const double inv = best.psi.distance ? 1.0 / *best.psi.distance : 0.0;
    Eigen::VectorXd x(functor.inputs());
    x[0] = (best.psi.u() - functor.off_h * inv) / grid.u_step;
    x[1] = (best.psi.v() - functor.off_v * inv) / grid.v_step;
    if (with_distance) x[2] = inv / grid.inv_distance_step;

    Eigen::NumericalDiff<ProfiledResidual> diff(functor);
    Eigen::LevenbergMarquardt<Eigen::NumericalDiff<ProfiledResidual>> lm(diff);
    lm.setMaxfev(grid.polish_evaluations);
    lm.minimize(x);

    const auto dir = functor.direction(x);
    if (!dir) return;
    const auto p = problem.from_projected(problem.w * steering(grid.geometry, *dir),
                                          static_cast<double>(grid.geometry.size()));
    if (p.observable && p.residual < best.projection.residual) {
        best.psi = *dir;
        best.projection = p;
    }
}

void refine(const WhitenedProblem& problem, const SearchGrid& grid, PsiEstimate& best) {
    const int half = grid.points_per_axis / 2;
    if (half == 0) return;
    // level k spans +-coarse_step * shrink^(k-1); while the incumbent keeps
    // moving the level is repeated around the new incumbent
    double scale = 1.0 / half;
    for (int level = 1; level <= grid.depth; ++level, scale *= grid.shrink) {
        for (int pass = 0; pass < grid.max_recentre && refine_step(problem, grid, scale, best); ++pass) {
        }
    }
    if (grid.polish_evaluations > 0) polish(problem, grid, best);
}

}  // namespace

std::optional<PsiEstimate> estimate_psi(const WhitenedProblem& problem, const SearchGrid& grid,
                                        const std::vector<DirectionParams>& hints) {
    if (grid.candidates.empty()) throw std::invalid_argument("search grid has no candidates");
    const CMatrix z = problem.w * grid.steering;
    const double a_norm2 = static_cast<double>(grid.geometry.size());

    std::vector<PsiEstimate> coarse;
    std::vector<double> values;
    for (Eigen::Index k = 0; k < z.cols(); ++k) {
        const auto p = problem.from_projected(z.col(k), a_norm2);
        if (!p.observable) continue;
        coarse.push_back(PsiEstimate{grid.candidates[static_cast<std::size_t>(k)], p, static_cast<std::size_t>(k)});
        values.push_back(p.residual);
    }
    if (coarse.empty()) return std::nullopt;

    // best `starts` coarse points, lowest index first among equals
    std::vector<std::size_t> order(coarse.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::size_t keep = std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::max(grid.starts, 1)));
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](std::size_t a, std::size_t b) { return values[a] < values[b] || (values[a] == values[b] && a < b); });

    std::vector<PsiEstimate> starts;
    for (std::size_t i = 0; i < keep; ++i) starts.push_back(coarse[order[i]]);
    const std::size_t coarse_index = starts.front().coarse_index;
    for (auto dir : hints) {
        if (grid.model == SteeringModel::far_field) dir.distance.reset();
        const auto p = problem.from_projected(problem.w * steering(grid.geometry, dir), a_norm2);
        if (p.observable) starts.push_back(PsiEstimate{dir, p, coarse_index});
    }

    std::optional<PsiEstimate> best;
    for (auto& start : starts) {
        refine(problem, grid, start);
        if (!best || start.projection.residual < best->projection.residual) best = start;
    }
    return best;
}

std::optional<PsiEstimate> estimate_psi(const CVector& y, const NoiseCovariance& cov, const CMatrix& b_matrix,
                                        const CVector& h, const SearchGrid& grid,
                                        const std::vector<DirectionParams>& hints) {
    return estimate_psi(whiten_problem(y, cov, b_matrix, h), grid, hints);
}

std::optional<EstimateResult> estimate_channel(const CVector& y, const NoiseCovariance& cov,
                                               const CMatrix& b_matrix, const CVector& h,
                                               const SearchGrid& grid, double p_p,
                                               const std::vector<DirectionParams>& hints) {
    if (!(p_p > 0.0)) throw std::invalid_argument("pilot power must be positive");
    const auto problem = whiten_problem(y, cov, b_matrix, h);
    const auto psi = estimate_psi(problem, grid, hints);
    if (!psi) return std::nullopt;

    const auto& p = psi->projection;
    EstimateResult r;
    r.psi_hat = psi->psi;
    r.objective_value = p.objective();
    const CVector a = steering(grid.geometry, r.psi_hat);
    if (p.inner == complex_t(0.0, 0.0)) {
        r.degenerate = true;
        r.g_hat = CVector::Zero(a.size());
        return r;
    }
    r.omega_hat = wrap_phase(-std::arg(p.inner));
    r.beta_hat = std::norm(p.inner) / (p_p * p.quad * p.quad);
    r.g_hat = std::sqrt(r.beta_hat) * std::polar(1.0, r.omega_hat) * a;
    return r;
}

}  // namespace aris
