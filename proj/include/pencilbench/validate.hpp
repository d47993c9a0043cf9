#pragma once

// Randomized cross-checks between independent code paths.
//
// Every method has two faces: a scalar growth function and a matrix pencil
// transformation. They are implemented separately on purpose, and this
// suite drives random systems through both to confirm they tell the same
// story. A deliberate perturbation knob exists so the suite itself can be
// shown to catch a lie.

#include "pencilbench/analysis.hpp"
#include "pencilbench/methods.hpp"
#include "pencilbench/model.hpp"

#include <cstdio>
#include <random>

namespace pencilbench {

struct ValidationOptions {
    std::uint64_t seed = 12345;
    int trials = 50;
    // Negative-control knob: relative distortion applied to one entry of
    // every trapezoidal pencil before comparison. Nonzero values must make
    // the suite fail.
    double perturbation = 0.0;
};

struct ValidationCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;

    bool all_pass() const {
        return std::all_of(checks.begin(), checks.end(),
                           [](const ValidationCheck& c) { return c.pass; });
    }
};

namespace detail {

inline std::string short_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// Deterministic uniform in [0, 1); avoids std::uniform_real_distribution,
// whose output is not pinned by the standard.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r) {
    Matrix A(r, r);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < r; ++j)
            A(i, j) = 2.0 * uniform01(rng) - 1.0;
    return A;
}

// Eigenvalues by the plain (QR-based) eigensolver, sorted; an independent
// route from the QZ factorization used on pencils.
inline std::vector<Complex> qr_eigenvalues(const Matrix& A) {
    Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("qr_eigenvalues: eigensolver failed");
    std::vector<Complex> out(static_cast<std::size_t>(A.rows()));
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        out[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    sort_complex(out);
    return out;
}

inline double set_mismatch(std::vector<Complex> a, std::vector<Complex> b) {
    if (a.size() != b.size())
        return std::numeric_limits<double>::infinity();
    sort_complex(a);
    sort_complex(b);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max(1.0, std::abs(a[i]));
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

}  // namespace detail

// Fitted log-log slope of the worst-mode |d_s| against h, dropping points
// below `floor` where the signal sinks into roundoff. Needs at least two
// surviving points.
inline double distortion_order_slope(const MethodSpec& m, Complex mode,
                                     const std::vector<double>& steps,
                                     double floor_abs = 1e-12) {
    const LinearizedModel lin =
        linearize(mode_fixture(mode), Vector::Zero(mode.imag() == 0 ? 1 : 2));
    std::vector<double> lx, ly;
    for (double h : steps) {
        const DistortionReport rep = distortion_report(m, lin, h);
        double worst = 0.0;
        for (const ModeDistortion& row : rep.modes)
            if (row.matched && std::isfinite(row.abs_ds))
                worst = std::max(worst, row.abs_ds);
        if (worst > floor_abs) {
            lx.push_back(std::log10(h));
            ly.push_back(std::log10(worst));
        }
    }
    if (lx.size() < 2)
        throw std::runtime_error(
            "distortion_order_slope: too few points above the noise floor");
    const auto n = static_cast<double>(lx.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline ValidationReport run_validation(const ValidationOptions& opts = {}) {
    if (opts.trials < 1)
        throw std::invalid_argument("run_validation: trials must be >= 1");
    ValidationReport report;
    std::mt19937_64 rng(opts.seed);
    const std::vector<double> steps = {1e-3, 1e-2, 1e-1};

    // One-step methods: pencil eigenvalues against the scalar growth
    // function on random dense ODE systems.
    {
        const std::vector<MethodSpec> one_step = {
            method_fem(), method_rk4(), method_bem(), method_itm(),
            method_dirk2s()};
        double worst = 0.0;
        std::string worst_at = "-";
        for (int trial = 0; trial < opts.trials; ++trial) {
            const auto r = static_cast<Eigen::Index>(1 + rng() % 6);
            const Matrix A = detail::random_matrix(rng, r);
            const LinearPencil sys{Matrix::Identity(r, r), A};
            const std::vector<Complex> lambdas = detail::qr_eigenvalues(A);
            for (const MethodSpec& m : one_step) {
                for (double h : steps) {
                    LinearPencil disc = build_pencil(m, sys, h);
                    if (opts.perturbation != 0.0 &&
                        m.kind == MethodKind::itm)
                        disc.A(0, 0) +=
                            opts.perturbation * (1.0 + std::abs(disc.A(0, 0)));
                    std::vector<Complex> expected;
                    for (const Complex& lam : lambdas)
                        expected.push_back(growth_roots(m, lam * h).front());
                    const double err = detail::set_mismatch(
                        finite_eigenvalues(disc).finite, expected);
                    if (err > worst) {
                        worst = err;
                        worst_at = m.name + " h=" + detail::short_num(h) +
                                   " r=" + std::to_string(r);
                    }
                }
            }
        }
        report.checks.push_back(
            {"one-step pencil eigenvalues match scalar growth",
             worst <= 1e-8,
             "worst relative mismatch " + detail::short_num(worst) + " at " +
                 worst_at});
    }

    // BDF2: companion pencil eigenvalues against the per-mode quadratic.
    {
        const MethodSpec m = method_bdf2();
        double worst = 0.0;
        for (int trial = 0; trial < opts.trials; ++trial) {
            const auto r = static_cast<Eigen::Index>(1 + rng() % 6);
            const Matrix A = detail::random_matrix(rng, r);
            const LinearPencil sys{Matrix::Identity(r, r), A};
            for (double h : steps) {
                std::vector<Complex> expected;
                for (const Complex& lam : detail::qr_eigenvalues(A))
                    for (const Complex& w : growth_roots(m, lam * h))
                        expected.push_back(w);
                const double err = detail::set_mismatch(
                    finite_eigenvalues(build_pencil(m, sys, h)).finite,
                    expected);
                worst = std::max(worst, err);
            }
        }
        report.checks.push_back(
            {"bdf2 companion eigenvalues match the mode quadratics",
             worst <= 1e-8,
             "worst relative mismatch " + detail::short_num(worst)});
    }

    // The classic quadruples must reproduce the dedicated pencils exactly,
    // entry for entry (the build paths share no code).
    {
        bool exact = true;
        std::string where = "-";
        const std::vector<std::pair<MethodSpec, MethodSpec>> pairs = {
            {method_fem(), method_moebius(1, -1, 0, 1)},
            {method_bem(), method_moebius(1, -1, 1, 0)},
            {method_itm(), method_moebius(1, -1, 0.5, 0.5)},
        };
        for (int trial = 0; trial < 10 && exact; ++trial) {
            const auto r = static_cast<Eigen::Index>(1 + rng() % 6);
            const LinearPencil sys{detail::random_matrix(rng, r),
                                   detail::random_matrix(rng, r)};
            for (double h : {1e-3, 0.05, 0.7}) {
                for (const auto& [dedicated, quad] : pairs) {
                    const LinearPencil a = build_pencil(dedicated, sys, h);
                    const LinearPencil b = build_pencil(quad, sys, h);
                    if (!(a.E.array() == b.E.array()).all() ||
                        !(a.A.array() == b.A.array()).all()) {
                        exact = false;
                        where = dedicated.name + " h=" + detail::short_num(h);
                        break;
                    }
                }
                if (!exact) break;
            }
        }
        report.checks.push_back(
            {"moebius quadruples rebuild fem/bem/itm pencils exactly", exact,
             exact ? "entrywise equal" : "first difference at " + where});
    }

    // Symmetric quadruples: stable modes land strictly inside the unit
    // disc, unstable ones strictly outside, at any step.
    {
        const std::vector<MethodSpec> quads = {
            method_moebius(1, -1, 0.5, 0.5),
            method_moebius(2, -2, 0.3, 0.3),
            method_moebius(1, 1, 0.4, -0.4),
        };
        bool ok = true;
        std::string detail_msg = "1000 modes per quadruple";
        for (const MethodSpec& m : quads)
            if (!moebius_is_symmetric_a_stable(m)) {
                ok = false;
                detail_msg = m.name + " rejected by the symmetry test";
            }
        if (moebius_is_symmetric_a_stable(method_moebius(1, -1, 0, 1)) ||
            moebius_is_symmetric_a_stable(method_moebius(1, -1, 1, 0))) {
            ok = false;
            detail_msg = "one-sided quadruple accepted by the symmetry test";
        }
        double worst_in = 0.0;
        for (int k = 0; k < 1000 && ok; ++k) {
            const Complex s{-0.01 - 3.0 * detail::uniform01(rng),
                            10.0 * (2.0 * detail::uniform01(rng) - 1.0)};
            for (const MethodSpec& m : quads) {
                for (double h : {1.0, 0.1}) {
                    const Complex z = (m.mb - s * (m.md * h)) /
                                      (s * (m.mc * h) - m.ma);
                    worst_in = std::max(worst_in, std::abs(z));
                    const Complex z_mirror =
                        (m.mb + std::conj(s) * (m.md * h)) /
                        (-std::conj(s) * (m.mc * h) - m.ma);
                    if (!(std::abs(z) < 1.0) || !(std::abs(z_mirror) > 1.0)) {
                        ok = false;
                        detail_msg = "mode " + detail::short_num(s.real()) + "+" +
                                     detail::short_num(s.imag()) + "j escaped on " +
                                     m.name;
                        break;
                    }
                }
                if (!ok) break;
            }
        }
        if (ok)
            detail_msg += ", max |z| = " + detail::short_num(worst_in);
        report.checks.push_back(
            {"symmetric quadruples keep stable modes inside the unit disc",
             ok, detail_msg});
    }

    // Consistency: every growth function passes through 1 at z = 0.
    {
        double worst = 0.0;
        std::vector<MethodSpec> methods = method_catalog();
        methods.push_back(method_moebius(1, -1, 0.5, 0.5));
        methods.push_back(method_tableau(rk4_tableau(), "rk:classic4"));
        for (const MethodSpec& m : methods) {
            double best = std::numeric_limits<double>::infinity();
            for (const Complex& w : growth_roots(m, Complex(0.0, 0.0)))
                best = std::min(best, std::abs(w - 1.0));
            worst = std::max(worst, best);
        }
        report.checks.push_back(
            {"growth functions equal 1 at z = 0", worst <= 1e-14,
             "worst |R(0) - 1| = " + detail::short_num(worst)});
    }

    // Observed convergence order of |d_s| on a smooth complex mode.
    {
        std::vector<double> hs;
        for (int k = 0; k <= 6; ++k)
            hs.push_back(std::pow(10.0, -1.0 - 0.5 * k));
        const Complex mode{-1.0, 2.0};
        struct Want {
            MethodSpec m;
            double min_slope;
        };
        const std::vector<Want> wants = {
            {method_fem(), 0.9},  {method_rk4(), 3.9},
            {method_bem(), 0.9},  {method_itm(), 1.9},
            {method_dirk2s(), 1.9}, {method_bdf2(), 1.9},
        };
        bool ok = true;
        std::string detail_msg;
        for (const Want& want : wants) {
            const double slope = distortion_order_slope(want.m, mode, hs);
            if (!detail_msg.empty()) detail_msg += ", ";
            detail_msg += want.m.name + "=" + detail::short_num(slope);
            if (!(slope >= want.min_slope)) ok = false;
        }
        report.checks.push_back(
            {"distortion decays at the classical order", ok, detail_msg});
    }

    return report;
}

}  // namespace pencilbench
