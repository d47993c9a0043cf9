#pragma once

// Time-domain integration of DAE models with the same method family the
// pencil analysis covers, so predicted and simulated mode behavior can be
// compared on one model.
//
// Implicit rules solve the full residual with Newton and analytic step
// Jacobians. Explicit rules advance the differential states and re-solve
// the algebraic block g = 0 after every stage; they require either an
// invertible mass matrix or the explicit-DAE form blkdiag(I, 0).

#include "pencilbench/methods.hpp"
#include "pencilbench/model.hpp"

#include <cmath>
#include <limits>
#include <optional>

namespace pencilbench {

// Model replacement fired at the first grid time >= `time`. State carries
// over; algebraic variables settle within the following step.
struct Disturbance {
    double time = 0.0;
    std::function<DaeModel(const DaeModel&)> apply;
    std::string label;
};

struct SimulationConfig {
    double h = 0.01;
    double t_end = 1.0;
    int newton_max_iter = 25;
    double newton_tol = 1e-10;
    double divergence_threshold = 1e12;  // on the state infinity norm
    std::vector<Disturbance> disturbances;
};

struct Trajectory {
    std::string method;
    double h = 0.0;
    std::vector<double> t;
    Matrix x;                       // row k holds the state at t[k]
    std::vector<int> newton_iters;  // per sample; 0 for the initial state
    bool diverged = false;
    double divergence_time = std::numeric_limits<double>::quiet_NaN();

    Eigen::Index samples() const { return x.rows(); }
};

namespace detail {

// Newton with an increment stopping rule: done once
// |dx|_inf <= tol*(1 + |x|_inf). Counts linear solves.
template <typename Residual, typename Jacobian>
int newton_solve(Vector& x, const Residual& res, const Jacobian& jac,
                 double tol, int max_iter) {
    for (int it = 1; it <= max_iter; ++it) {
        const Vector r = res(x);
        if (!r.allFinite())
            throw std::runtime_error("newton: residual is not finite");
        Eigen::PartialPivLU<Matrix> lu(jac(x));
        const Vector d = lu.solve(-r);
        if (!d.allFinite())
            throw std::runtime_error("newton: singular iteration matrix");
        x += d;
        if (d.lpNorm<Eigen::Infinity>() <=
            tol * (1.0 + x.lpNorm<Eigen::Infinity>()))
            return it;
    }
    throw std::runtime_error("newton: no convergence within " +
                             std::to_string(max_iter) + " iterations");
}

// Solve g(states, y) = 0 for the algebraic block, warm-started from y.
inline int solve_algebraic(const DaeModel& m, const Vector& states, Vector& y,
                           double tol, int max_iter) {
    const Eigen::Index nd = m.n_diff, na = m.n_alg;
    Vector full(nd + na);
    full.head(nd) = states;
    full.tail(na) = y;
    auto res = [&](const Vector& yy) -> Vector {
        full.tail(na) = yy;
        return m.residual(full).tail(na);
    };
    auto jac = [&](const Vector& yy) -> Matrix {
        full.tail(na) = yy;
        return m.jacobian(full).bottomRightCorner(na, na);
    };
    const int iters = newton_solve(y, res, jac, tol, max_iter);
    return iters;
}

struct ExplicitContext {
    bool split;  // explicit-DAE path vs invertible-mass path
    Eigen::PartialPivLU<Matrix> mass_lu;
};

inline ExplicitContext make_explicit_context(const DaeModel& m) {
    ExplicitContext ctx;
    ctx.split = m.n_alg > 0;
    if (ctx.split) {
        if (!m.explicit_dae_form())
            throw std::invalid_argument(
                "simulate: explicit methods need mass = blkdiag(I, 0) when "
                "algebraic variables are present");
    } else {
        Eigen::FullPivLU<Matrix> probe(m.mass);
        if (!probe.isInvertible())
            throw std::invalid_argument(
                "simulate: explicit methods need an invertible mass matrix");
        ctx.mass_lu.compute(m.mass);
    }
    return ctx;
}

// State derivative of the differential block (split path) or the full
// state (invertible-mass path), with algebraic consistency restored first.
inline Vector stage_rate(const DaeModel& m, const ExplicitContext& ctx,
                         const Vector& states, Vector& y,
                         const SimulationConfig& cfg, int& iters) {
    if (!ctx.split) return ctx.mass_lu.solve(m.residual(states));
    iters +=
        solve_algebraic(m, states, y, cfg.newton_tol, cfg.newton_max_iter);
    Vector full(m.dim());
    full.head(m.n_diff) = states;
    full.tail(m.n_alg) = y;
    return m.residual(full).head(m.n_diff);
}

}  // namespace detail

// Fixed-step integration from x0 over [0, t_end]. The trajectory is cut
// short (and flagged in-band, not thrown) once the state norm passes
// cfg.divergence_threshold or stops being finite. BDF2 bootstraps its
// first step with the trapezoidal rule.
inline Trajectory simulate(const MethodSpec& method, DaeModel model,
                           const Vector& x0, const SimulationConfig& cfg) {
    check_model(model);
    if (!(cfg.h > 0.0) || !std::isfinite(cfg.h))
        throw std::invalid_argument("simulate: step must be positive");
    if (!(cfg.t_end >= cfg.h))
        throw std::invalid_argument("simulate: t_end must cover one step");
    if (x0.size() != model.dim())
        throw std::invalid_argument("simulate: x0 has wrong size");
    if (method.kind == MethodKind::tableau)
        throw std::invalid_argument(
            "simulate: raw tableaus have no time-stepping realization here");
    if (method.kind == MethodKind::moebius && method.mc == 0.0) {
        if (method.ma == 0.0)
            throw std::invalid_argument("simulate: degenerate moebius rule");
        if (model.n_alg > 0)
            throw std::invalid_argument(
                "simulate: an explicit moebius rule (c = 0) cannot carry "
                "algebraic variables");
    }

    const auto n_steps = static_cast<Eigen::Index>(
        std::floor(cfg.t_end / cfg.h + 1e-9));
    const Eigen::Index r = model.dim();

    Trajectory traj;
    traj.method = method.name;
    traj.h = cfg.h;
    traj.t.reserve(static_cast<std::size_t>(n_steps) + 1);
    traj.newton_iters.reserve(static_cast<std::size_t>(n_steps) + 1);
    traj.x.resize(n_steps + 1, r);

    std::vector<Disturbance> pending = cfg.disturbances;
    std::sort(pending.begin(), pending.end(),
              [](const Disturbance& a, const Disturbance& b) {
                  return a.time < b.time;
              });
    std::size_t next_disturbance = 0;

    const bool explicit_rule =
        !method.implicit ||
        (method.kind == MethodKind::moebius && method.mc == 0.0);
    std::optional<detail::ExplicitContext> ectx;
    if (explicit_rule) ectx = detail::make_explicit_context(model);

    Vector x = x0;
    Vector x_prev_prev = x0;  // BDF2 history
    traj.t.push_back(0.0);
    traj.newton_iters.push_back(0);
    traj.x.row(0) = x.transpose();

    Eigen::Index k = 0;
    for (; k < n_steps; ++k) {
        const double t_now = static_cast<double>(k) * cfg.h;

        while (next_disturbance < pending.size() &&
               pending[next_disturbance].time <= t_now + 1e-12) {
            const Disturbance& d = pending[next_disturbance];
            if (!d.apply)
                throw std::invalid_argument("simulate: disturbance '" +
                                            d.label + "' has no action");
            DaeModel swapped = d.apply(model);
            check_model(swapped);
            if (swapped.dim() != r || swapped.n_diff != model.n_diff)
                throw std::invalid_argument(
                    "simulate: disturbance '" + d.label +
                    "' changed the state layout");
            model = std::move(swapped);
            if (explicit_rule) ectx = detail::make_explicit_context(model);
            ++next_disturbance;
        }

        const Vector xp = x;
        int iters = 0;

        switch (method.kind) {
            case MethodKind::fem: {
                if (ectx->split) {
                    const Eigen::Index nd = model.n_diff, na = model.n_alg;
                    Vector states = xp.head(nd);
                    Vector y = xp.tail(na);
                    const Vector rate =
                        detail::stage_rate(model, *ectx, states, y, cfg, iters);
                    states += cfg.h * rate;
                    iters += detail::solve_algebraic(model, states, y,
                                                     cfg.newton_tol,
                                                     cfg.newton_max_iter);
                    x.head(nd) = states;
                    x.tail(na) = y;
                } else {
                    x = xp + cfg.h * ectx->mass_lu.solve(model.residual(xp));
                }
                break;
            }
            case MethodKind::rk4: {
                const Eigen::Index nd = ectx->split ? model.n_diff : r;
                const Eigen::Index na = model.dim() - nd;
                Vector y = ectx->split ? Vector(xp.tail(na)) : Vector();
                const Vector s0 = xp.head(nd);
                Vector states = s0;
                const Vector k1 =
                    detail::stage_rate(model, *ectx, states, y, cfg, iters);
                states = s0 + 0.5 * cfg.h * k1;
                const Vector k2 =
                    detail::stage_rate(model, *ectx, states, y, cfg, iters);
                states = s0 + 0.5 * cfg.h * k2;
                const Vector k3 =
                    detail::stage_rate(model, *ectx, states, y, cfg, iters);
                states = s0 + cfg.h * k3;
                const Vector k4 =
                    detail::stage_rate(model, *ectx, states, y, cfg, iters);
                states =
                    s0 + (cfg.h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                if (ectx->split) {
                    iters += detail::solve_algebraic(model, states, y,
                                                     cfg.newton_tol,
                                                     cfg.newton_max_iter);
                    x.head(nd) = states;
                    x.tail(na) = y;
                } else {
                    x = states;
                }
                break;
            }
            case MethodKind::bem: {
                auto res = [&](const Vector& xt) -> Vector {
                    return model.mass * (xt - xp) -
                           cfg.h * model.residual(xt);
                };
                auto jac = [&](const Vector& xt) -> Matrix {
                    return model.mass - cfg.h * model.jacobian(xt);
                };
                iters = detail::newton_solve(x, res, jac, cfg.newton_tol,
                                             cfg.newton_max_iter);
                break;
            }
            case MethodKind::itm: {
                const Vector phi_p = model.residual(xp);
                auto res = [&](const Vector& xt) -> Vector {
                    return model.mass * (xt - xp) -
                           0.5 * cfg.h * (model.residual(xt) + phi_p);
                };
                auto jac = [&](const Vector& xt) -> Matrix {
                    return model.mass - 0.5 * cfg.h * model.jacobian(xt);
                };
                iters = detail::newton_solve(x, res, jac, cfg.newton_tol,
                                             cfg.newton_max_iter);
                break;
            }
            case MethodKind::dirk2s: {
                auto jac = [&](const Vector& xs) -> Matrix {
                    return model.mass -
                           kDirkAlpha * cfg.h * model.jacobian(xs);
                };
                Vector x1 = xp;
                auto res1 = [&](const Vector& xs) -> Vector {
                    return model.mass * (xs - xp) -
                           kDirkAlpha * cfg.h * model.residual(xs);
                };
                iters = detail::newton_solve(x1, res1, jac, cfg.newton_tol,
                                             cfg.newton_max_iter);
                const Vector phi_1 = model.residual(x1);
                auto res2 = [&](const Vector& xt) -> Vector {
                    return model.mass * (xt - xp) -
                           cfg.h * ((1.0 - kDirkAlpha) * phi_1 +
                                    kDirkAlpha * model.residual(xt));
                };
                x = x1;
                iters += detail::newton_solve(x, res2, jac, cfg.newton_tol,
                                              cfg.newton_max_iter);
                break;
            }
            case MethodKind::bdf2: {
                if (k == 0) {
                    // trapezoidal bootstrap for the missing history point
                    const Vector phi_p = model.residual(xp);
                    auto res = [&](const Vector& xt) -> Vector {
                        return model.mass * (xt - xp) -
                               0.5 * cfg.h * (model.residual(xt) + phi_p);
                    };
                    auto jac = [&](const Vector& xt) -> Matrix {
                        return model.mass - 0.5 * cfg.h * model.jacobian(xt);
                    };
                    iters = detail::newton_solve(x, res, jac, cfg.newton_tol,
                                                 cfg.newton_max_iter);
                } else {
                    auto res = [&](const Vector& xt) -> Vector {
                        return model.mass *
                                   (xt - (4.0 / 3.0) * xp +
                                    (1.0 / 3.0) * x_prev_prev) -
                               (2.0 / 3.0) * cfg.h * model.residual(xt);
                    };
                    auto jac = [&](const Vector& xt) -> Matrix {
                        return model.mass -
                               (2.0 / 3.0) * cfg.h * model.jacobian(xt);
                    };
                    iters = detail::newton_solve(x, res, jac, cfg.newton_tol,
                                                 cfg.newton_max_iter);
                }
                break;
            }
            case MethodKind::moebius: {
                if (method.mc == 0.0) {
                    // a E x_t = d h phi(x_p) - b E x_p
                    const Vector rhs = method.md * cfg.h *
                                           model.residual(xp) -
                                       method.mb * (model.mass * xp);
                    x = ectx->mass_lu.solve(rhs) / method.ma;
                } else {
                    const Vector rhs = method.md * cfg.h *
                                           model.residual(xp) -
                                       method.mb * (model.mass * xp);
                    auto res = [&](const Vector& xt) -> Vector {
                        return method.ma * (model.mass * xt) -
                               method.mc * cfg.h * model.residual(xt) - rhs;
                    };
                    auto jac = [&](const Vector& xt) -> Matrix {
                        return method.ma * model.mass -
                               method.mc * cfg.h * model.jacobian(xt);
                    };
                    iters = detail::newton_solve(x, res, jac, cfg.newton_tol,
                                                 cfg.newton_max_iter);
                }
                break;
            }
            case MethodKind::tableau:
                break;  // rejected above
        }

        x_prev_prev = xp;
        const double t_next = static_cast<double>(k + 1) * cfg.h;

        if (!x.allFinite()) {
            traj.diverged = true;
            traj.divergence_time = t_next;
            break;
        }
        traj.t.push_back(t_next);
        traj.newton_iters.push_back(iters);
        traj.x.row(k + 1) = x.transpose();
        if (x.lpNorm<Eigen::Infinity>() > cfg.divergence_threshold) {
            traj.diverged = true;
            traj.divergence_time = t_next;
            ++k;
            break;
        }
    }

    traj.x.conservativeResize(static_cast<Eigen::Index>(traj.t.size()),
                              Eigen::NoChange);
    return traj;
}

// Shared yardstick: two-stage SDIRK at h = 0.001, L-stable and second
// order, far below the step sizes under study.
inline Trajectory reference_trajectory(const DaeModel& model, const Vector& x0,
                                       double t_end) {
    SimulationConfig cfg;
    cfg.h = 0.001;
    cfg.t_end = t_end;
    return simulate(method_dirk2s(), model, x0, cfg);
}

// Accumulated absolute gap sum_k |x_k(var) - ref(t_k)(var)| * h, with the
// reference read off by linear interpolation. Infinite when either
// trajectory diverged.
inline double trajectory_mismatch(const Trajectory& traj,
                                  const Trajectory& ref, Eigen::Index var) {
    if (var < 0 || var >= traj.x.cols() || var >= ref.x.cols())
        throw std::invalid_argument("trajectory_mismatch: bad variable index");
    if (traj.diverged || ref.diverged)
        return std::numeric_limits<double>::infinity();
    if (ref.t.size() < 2)
        throw std::invalid_argument("trajectory_mismatch: reference too short");

    double acc = 0.0;
    std::size_t j = 0;
    for (std::size_t k = 0; k < traj.t.size(); ++k) {
        const double t = traj.t[k];
        while (j + 2 < ref.t.size() && ref.t[j + 1] < t) ++j;
        const double t0 = ref.t[j], t1 = ref.t[j + 1];
        const double w = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
        const double ref_v = (1.0 - w) * ref.x(static_cast<Eigen::Index>(j), var) +
                             w * ref.x(static_cast<Eigen::Index>(j) + 1, var);
        acc += std::abs(traj.x(static_cast<Eigen::Index>(k), var) - ref_v) *
               traj.h;
    }
    return acc;
}

// Dominant discrete mode of a sampled scalar signal via a least-squares
// two-term recurrence fit u[k+2] = a u[k+1] + b u[k] + c (the intercept
// absorbs a constant offset). Returns log(w)/h for the root of largest
// magnitude, preferring the nonnegative-frequency member of a pair.
inline Complex fit_dominant_mode(const std::vector<double>& u, double h) {
    if (u.size() < 8)
        throw std::invalid_argument("fit_dominant_mode: too few samples");
    if (!(h > 0.0))
        throw std::invalid_argument("fit_dominant_mode: bad step");
    const auto rows = static_cast<Eigen::Index>(u.size() - 2);
    Matrix M(rows, 3);
    Vector rhs(rows);
    for (Eigen::Index k = 0; k < rows; ++k) {
        M(k, 0) = u[static_cast<std::size_t>(k) + 1];
        M(k, 1) = u[static_cast<std::size_t>(k)];
        M(k, 2) = 1.0;
        rhs(k) = u[static_cast<std::size_t>(k) + 2];
    }
    const Vector coef = M.colPivHouseholderQr().solve(rhs);
    const Complex disc = std::sqrt(Complex(coef(0) * coef(0) + 4.0 * coef(1)));
    const Complex w1 = (coef(0) + disc) / 2.0;
    const Complex w2 = (coef(0) - disc) / 2.0;
    Complex w = std::abs(w1) >= std::abs(w2) ? w1 : w2;
    if (w.imag() < 0.0) w = std::conj(w);
    if (w == Complex(0.0, 0.0))
        throw std::runtime_error("fit_dominant_mode: degenerate fit");
    return std::log(w) / h;
}

}  // namespace pencilbench
