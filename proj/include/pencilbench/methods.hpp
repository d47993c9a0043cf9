#pragma once

// Time-integration methods viewed as pencil transformations.
//
// Applying a one-step (or, for BDF2, two-step) method with step h to the
// linear DAE E*x' = A*x yields a discrete recurrence whose pencil
// ztilde*Etilde - Atilde is built here. Scalar growth functions give the
// image of a single mode z = lambda*h and must agree with the pencil
// eigenvalues on diagonalizable systems; that redundancy is checked by the
// validation suite rather than assumed.

#include "pencilbench/pencil.hpp"

#include <cmath>
#include <optional>
#include <sstream>

namespace pencilbench {

enum class MethodKind {
    fem,      // forward Euler
    rk4,      // classical 4-stage Runge-Kutta
    bem,      // backward Euler
    itm,      // implicit trapezoidal
    dirk2s,   // 2-stage singly diagonally implicit RK, stiffly accurate
    bdf2,     // 2-step backward differentiation
    moebius,  // z(aE - cA) - (dA - bE), coefficients c,d carry one factor h
    tableau,  // arbitrary Butcher tableau, growth analysis only
};

struct ButcherTableau {
    Matrix Q;   // stage coefficient matrix
    Vector w;   // quadrature weights
};

// dirk2s stage coefficient; the scheme is L-stable and second order.
inline constexpr double kDirkAlpha = 0.29289321881345247559915563789515;  // 1 - 1/sqrt(2)
inline constexpr double kDirkAlphaBeta = -0.41421356237309504880168872420970;  // alpha * (-sqrt(2))

struct MethodSpec {
    MethodKind kind = MethodKind::fem;
    std::string name;
    int order = 1;
    int step_multiplicity = 1;  // companion methods contribute 2 roots/mode
    bool implicit = false;

    // moebius only; stored without the step so one spec serves every h.
    double ma = 0, mb = 0, mc = 0, md = 0;

    ButcherTableau rk;  // tableau only
};

inline MethodSpec method_fem() {
    return {MethodKind::fem, "fem", 1, 1, false, 0, 0, 0, 0, {}};
}

inline MethodSpec method_rk4() {
    return {MethodKind::rk4, "rk4", 4, 1, false, 0, 0, 0, 0, {}};
}

inline MethodSpec method_bem() {
    return {MethodKind::bem, "bem", 1, 1, true, 0, 0, 0, 0, {}};
}

inline MethodSpec method_itm() {
    return {MethodKind::itm, "itm", 2, 1, true, 0, 0, 0, 0, {}};
}

inline MethodSpec method_dirk2s() {
    return {MethodKind::dirk2s, "dirk2s", 2, 1, true, 0, 0, 0, 0, {}};
}

inline MethodSpec method_bdf2() {
    return {MethodKind::bdf2, "bdf2", 2, 2, true, 0, 0, 0, 0, {}};
}

// s = (a*z + b)/(c*z + d) with c and d understood as multiples of the step:
// the pencil for step h uses coefficients (a, b, c*h, d*h). Requires a
// nonzero determinant ad - bc.
inline MethodSpec method_moebius(double a, double b, double c, double d) {
    const double det = a * d - b * c;
    const double scale = std::max({std::abs(a * d), std::abs(b * c), 1.0});
    if (!(std::abs(det) > 1e-14 * scale))
        throw std::invalid_argument("moebius: ad - bc must be nonzero");
    MethodSpec m;
    m.kind = MethodKind::moebius;
    m.ma = a;
    m.mb = b;
    m.mc = c;
    m.md = d;
    m.implicit = c != 0.0;
    m.order = (a == -b && c == d) || (a == b && c == -d) ? 2 : 1;
    std::ostringstream nm;
    nm << "moebius:" << a << "," << b << "," << c << "," << d;
    m.name = nm.str();
    return m;
}

namespace detail {

// Order of the linear stability function: largest p such that
// w * Q^(k-1) * 1 = 1/k! for all k <= p.
inline int tableau_linear_order(const ButcherTableau& t, int cap = 12) {
    const Eigen::Index rho = t.Q.rows();
    Vector v = Vector::Ones(rho);
    double factorial = 1.0;
    for (int k = 1; k <= cap; ++k) {
        factorial *= k;
        const double coeff = t.w.dot(v);
        if (std::abs(coeff - 1.0 / factorial) > 1e-8 / factorial)
            return k - 1;
        v = t.Q * v;
    }
    return cap;
}

}  // namespace detail

inline MethodSpec method_tableau(ButcherTableau t,
                                 std::string name = "rk:tableau") {
    const Eigen::Index rho = t.Q.rows();
    if (rho == 0 || t.Q.cols() != rho || t.w.size() != rho)
        throw std::invalid_argument(
            "tableau: Q must be square and match the weight count");
    if (!t.Q.allFinite() || !t.w.allFinite())
        throw std::invalid_argument("tableau: entries must be finite");
    MethodSpec m;
    m.kind = MethodKind::tableau;
    m.name = std::move(name);
    bool strictly_lower = true;
    for (Eigen::Index i = 0; i < rho && strictly_lower; ++i)
        for (Eigen::Index j = i; j < rho; ++j)
            if (t.Q(i, j) != 0.0) {
                strictly_lower = false;
                break;
            }
    m.implicit = !strictly_lower;
    m.order = detail::tableau_linear_order(t);
    m.rk = std::move(t);
    return m;
}

inline ButcherTableau rk4_tableau() {
    ButcherTableau t;
    t.Q = Matrix::Zero(4, 4);
    t.Q(1, 0) = 0.5;
    t.Q(2, 1) = 0.5;
    t.Q(3, 2) = 1.0;
    t.w = Vector(4);
    t.w << 1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0;
    return t;
}

// The six stock methods in report order.
inline std::vector<MethodSpec> method_catalog() {
    return {method_fem(), method_rk4(),    method_bem(),
            method_itm(), method_dirk2s(), method_bdf2()};
}

// Discrete pencil ztilde*Etilde - Atilde of the method applied with step h.
// BDF2 returns its 2r x 2r companion form; a raw tableau has no pencil
// realization here and is rejected.
inline LinearPencil build_pencil(const MethodSpec& m, const LinearPencil& sys,
                                 double h) {
    check_pencil(sys);
    if (!(h > 0.0) || !std::isfinite(h))
        throw std::invalid_argument("build_pencil: step must be positive");
    const Matrix& E = sys.E;
    const Matrix& A = sys.A;
    const Eigen::Index r = sys.dim();

    switch (m.kind) {
        case MethodKind::fem:
            return {E, E + h * A};
        case MethodKind::rk4: {
            const Matrix hA = h * A;
            const Matrix hA2 = hA * hA;
            return {E, E + hA + hA2 / 2.0 + hA2 * hA / 6.0 +
                           hA2 * hA2 / 24.0};
        }
        case MethodKind::bem:
            return {E - h * A, E};
        case MethodKind::itm:
            return {E - 0.5 * h * A, E + 0.5 * h * A};
        case MethodKind::dirk2s: {
            const Matrix S = E - kDirkAlpha * h * A;
            Eigen::FullPivLU<Matrix> lu(S);
            if (!lu.isInvertible())
                throw std::runtime_error(
                    "build_pencil: dirk2s stage matrix E - alpha*h*A is "
                    "singular at h = " +
                    std::to_string(h));
            return {S, (E - kDirkAlphaBeta * h * A) * lu.solve(E)};
        }
        case MethodKind::bdf2: {
            LinearPencil p;
            p.E = Matrix::Identity(2 * r, 2 * r);
            p.E.bottomRightCorner(r, r) = E - (2.0 / 3.0) * h * A;
            p.A = Matrix::Zero(2 * r, 2 * r);
            p.A.topRightCorner(r, r).setIdentity();
            p.A.bottomLeftCorner(r, r) = -(1.0 / 3.0) * E;
            p.A.bottomRightCorner(r, r) = (4.0 / 3.0) * E;
            return p;
        }
        case MethodKind::moebius:
            return {m.ma * E - (m.mc * h) * A, (m.md * h) * A - m.mb * E};
        case MethodKind::tableau:
            throw std::invalid_argument(
                "build_pencil: a raw tableau has no pencil form; use "
                "growth analysis");
    }
    throw std::logic_error("build_pencil: unhandled method kind");
}

// Stability function of a tableau: R(z) = det(I - zQ + z*1*w^T)/det(I - zQ).
inline Complex rk_growth_from_tableau(const ButcherTableau& t, Complex z) {
    const Eigen::Index rho = t.Q.rows();
    if (rho == 0 || t.Q.cols() != rho || t.w.size() != rho)
        throw std::invalid_argument("rk_growth_from_tableau: bad tableau");
    using CMatrix = Eigen::MatrixXcd;
    const CMatrix I = CMatrix::Identity(rho, rho);
    const CMatrix zQ = z * t.Q.cast<Complex>();
    const Complex den = (I - zQ).determinant();
    const CMatrix num_m =
        I - zQ + z * (Eigen::VectorXcd::Ones(rho) * t.w.transpose().cast<Complex>());
    const Complex num = num_m.determinant();
    if (!(std::abs(den) > 1e-14 * std::max(1.0, std::abs(num))))
        throw std::domain_error("rk_growth_from_tableau: pole at z");
    return num / den;
}

namespace detail {

inline Complex guarded_ratio(Complex num, Complex den, const char* who) {
    if (!(std::abs(den) > 1e-14 * std::max(1.0, std::abs(num))))
        throw std::domain_error(std::string(who) + ": pole in growth function");
    return num / den;
}

}  // namespace detail

// Images of a single scalar mode under the method, z = lambda*h. One root
// for one-step methods; BDF2 yields [principal, parasitic] with the
// principal root the one closer to exp(z) (ties toward Im >= 0).
inline std::vector<Complex> growth_roots(const MethodSpec& m, Complex z) {
    switch (m.kind) {
        case MethodKind::fem:
            return {1.0 + z};
        case MethodKind::rk4:
            return {1.0 + z + z * z / 2.0 + z * z * z / 6.0 +
                    z * z * z * z / 24.0};
        case MethodKind::bem:
            return {detail::guarded_ratio(1.0, 1.0 - z, "bem")};
        case MethodKind::itm:
            return {detail::guarded_ratio(1.0 + 0.5 * z, 1.0 - 0.5 * z, "itm")};
        case MethodKind::dirk2s: {
            const Complex den = (1.0 - kDirkAlpha * z) * (1.0 - kDirkAlpha * z);
            return {detail::guarded_ratio(1.0 - kDirkAlphaBeta * z, den,
                                          "dirk2s")};
        }
        case MethodKind::bdf2: {
            // (1 - (2/3)z) w^2 - (4/3) w + 1/3 = 0
            const Complex a = 1.0 - (2.0 / 3.0) * z;
            const Complex b = -4.0 / 3.0;
            const Complex c = 1.0 / 3.0;
            if (std::abs(a) <= 1e-14)
                throw std::domain_error("bdf2: degenerate quadratic at z");
            const Complex disc = std::sqrt(b * b - 4.0 * a * c);
            const Complex w1 = (-b + disc) / (2.0 * a);
            const Complex w2 = (-b - disc) / (2.0 * a);
            const Complex target = std::exp(z);
            const double d1 = std::abs(w1 - target);
            const double d2 = std::abs(w2 - target);
            if (d1 < d2) return {w1, w2};
            if (d2 < d1) return {w2, w1};
            return w1.imag() >= w2.imag() ? std::vector<Complex>{w1, w2}
                                          : std::vector<Complex>{w2, w1};
        }
        case MethodKind::moebius:
            // scalar pencil: ztilde (a - c z) = d z - b
            return {detail::guarded_ratio(m.md * z - m.mb, m.ma - m.mc * z,
                                          "moebius")};
        case MethodKind::tableau:
            return {rk_growth_from_tableau(m.rk, z)};
    }
    throw std::logic_error("growth_roots: unhandled method kind");
}

// Exact test on the stored quadruple. Either sign pattern makes the map
// carry the open left half plane onto the open unit disc, so the method is
// A-stable and preserves marginal modes on the boundary.
inline bool moebius_is_symmetric_a_stable(const MethodSpec& m) {
    if (m.kind != MethodKind::moebius)
        throw std::invalid_argument(
            "moebius_is_symmetric_a_stable: not a moebius method");
    return (m.ma == m.mb && m.mc == -m.md) || (m.ma == -m.mb && m.mc == m.md);
}

struct RegionWindow {
    double re_min = -4.0, re_max = 1.0;
    double im_min = -4.0, im_max = 4.0;
    int nx = 101, ny = 101;
};

struct RegionSample {
    RegionWindow window;
    std::vector<std::uint8_t> stable;  // row-major, index = iy*nx + ix

    bool at(int ix, int iy) const {
        return stable[static_cast<std::size_t>(iy) *
                          static_cast<std::size_t>(window.nx) +
                      static_cast<std::size_t>(ix)] != 0;
    }
};

// Samples |growth| < 1 on a rectangle in the z = lambda*h plane. Points
// where the growth function has a pole count as unstable.
inline RegionSample stability_region_sample(const MethodSpec& m,
                                            const RegionWindow& w) {
    if (w.nx < 2 || w.ny < 2 || !(w.re_max > w.re_min) ||
        !(w.im_max > w.im_min))
        throw std::invalid_argument("stability_region_sample: bad window");
    RegionSample out;
    out.window = w;
    out.stable.resize(static_cast<std::size_t>(w.nx) *
                      static_cast<std::size_t>(w.ny));
    for (int iy = 0; iy < w.ny; ++iy) {
        const double im =
            w.im_min + (w.im_max - w.im_min) * iy / (w.ny - 1.0);
        for (int ix = 0; ix < w.nx; ++ix) {
            const double re =
                w.re_min + (w.re_max - w.re_min) * ix / (w.nx - 1.0);
            bool stable = true;
            try {
                for (const Complex& root : growth_roots(m, {re, im}))
                    if (!(std::abs(root) < 1.0)) {
                        stable = false;
                        break;
                    }
            } catch (const std::domain_error&) {
                stable = false;
            }
            out.stable[static_cast<std::size_t>(iy) *
                           static_cast<std::size_t>(w.nx) +
                       static_cast<std::size_t>(ix)] = stable ? 1 : 0;
        }
    }
    return out;
}

}  // namespace pencilbench
