#pragma once

// Semi-implicit DAE models E*x' = phi(x) and their linearizations.
//
// State layout is differential variables first, then algebraic ones; the
// mass matrix of an explicit DAE is blkdiag(I, 0) in that order.

#include "pencilbench/pencil.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <utility>

namespace pencilbench {

struct DaeModel {
    std::string name;
    Matrix mass;                                       // E, r x r
    Eigen::Index n_diff = 0;                           // differential states
    Eigen::Index n_alg = 0;                            // algebraic states
    std::function<Vector(const Vector&)> residual;     // phi
    std::function<Matrix(const Vector&)> jacobian;     // d phi / d x
    Vector equilibrium_guess;                          // Newton seed

    Eigen::Index dim() const { return mass.rows(); }

    // True when E is exactly blkdiag(I_{n_diff}, 0).
    bool explicit_dae_form() const {
        Matrix ref = Matrix::Zero(dim(), dim());
        ref.topLeftCorner(n_diff, n_diff).setIdentity();
        return mass == ref;
    }
};

inline void check_model(const DaeModel& m) {
    if (m.dim() == 0 || m.mass.rows() != m.mass.cols())
        throw std::invalid_argument("model: mass matrix must be square");
    if (m.n_diff < 0 || m.n_alg < 0 || m.n_diff + m.n_alg != m.dim())
        throw std::invalid_argument("model: n_diff + n_alg must equal dim");
    if (!m.residual)
        throw std::invalid_argument("model: residual is not set");
}

// Central-difference Jacobian, column step sqrt(eps)*max(1, |x_i|).
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f,
                          const Vector& x) {
    const double sqrt_eps =
        std::sqrt(std::numeric_limits<double>::epsilon());
    const Eigen::Index n = x.size();
    const Eigen::Index m = f(x).size();
    Matrix J(m, n);
    Vector xp = x, xm = x;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double step = sqrt_eps * std::max(1.0, std::abs(x(j)));
        xp(j) = x(j) + step;
        xm(j) = x(j) - step;
        J.col(j) = (f(xp) - f(xm)) / (xp(j) - xm(j));
        xp(j) = x(j);
        xm(j) = x(j);
    }
    return J;
}

// Linear (affine) model phi(x) = A*x + b with analytic Jacobian.
inline DaeModel linear_dae(std::string name, Matrix E, Matrix A,
                           Vector b = Vector(), Eigen::Index n_alg = 0) {
    DaeModel m;
    m.name = std::move(name);
    const Eigen::Index r = E.rows();
    if (b.size() == 0) b = Vector::Zero(r);
    if (A.rows() != r || A.cols() != r || E.cols() != r || b.size() != r)
        throw std::invalid_argument("linear_dae: inconsistent shapes");
    m.mass = std::move(E);
    m.n_alg = n_alg;
    m.n_diff = r - n_alg;
    m.equilibrium_guess = Vector::Zero(r);
    auto A_sh = std::make_shared<Matrix>(std::move(A));
    auto b_sh = std::make_shared<Vector>(std::move(b));
    m.residual = [A_sh, b_sh](const Vector& x) -> Vector {
        return (*A_sh) * x + (*b_sh);
    };
    m.jacobian = [A_sh](const Vector&) -> Matrix { return *A_sh; };
    return m;
}

// Damped Newton on phi(x) = 0. Up to 20 step halvings per iteration; the
// step is accepted once the residual norm decreases.
inline Vector find_equilibrium(const DaeModel& m, const Vector& guess,
                               double tol = 1e-10, int max_iter = 50) {
    check_model(m);
    if (guess.size() != m.dim())
        throw std::invalid_argument("find_equilibrium: guess has wrong size");
    if (!(tol > 0.0))
        throw std::invalid_argument("find_equilibrium: tol must be positive");

    Vector x = guess;
    for (int it = 0; it < max_iter; ++it) {
        const Vector r = m.residual(x);
        if (!r.allFinite())
            throw std::runtime_error("find_equilibrium: residual is not finite");
        if (r.lpNorm<Eigen::Infinity>() <= tol) return x;

        const Matrix J = m.jacobian ? m.jacobian(x) : fd_jacobian(m.residual, x);
        Eigen::FullPivLU<Matrix> lu(J);
        if (!lu.isInvertible())
            throw std::runtime_error(
                "find_equilibrium: singular Jacobian at iteration " +
                std::to_string(it));
        const Vector d = lu.solve(-r);

        const double r0 = r.norm();
        double step = 1.0;
        bool accepted = false;
        for (int k = 0; k <= 20; ++k) {
            const Vector trial = x + step * d;
            const Vector rt = m.residual(trial);
            if (rt.allFinite() && rt.norm() < r0) {
                x = trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted)
            throw std::runtime_error(
                "find_equilibrium: line search stalled at iteration " +
                std::to_string(it));
    }
    throw std::runtime_error("find_equilibrium: no convergence within " +
                             std::to_string(max_iter) + " iterations");
}

inline Vector find_equilibrium(const DaeModel& m, double tol = 1e-10,
                               int max_iter = 50) {
    const Vector guess = m.equilibrium_guess.size() == m.dim()
                             ? m.equilibrium_guess
                             : Vector::Zero(m.dim()).eval();
    return find_equilibrium(m, guess, tol, max_iter);
}

// A model frozen at an equilibrium: the pencil s*E - A with A = dphi/dx(x_o).
struct LinearizedModel {
    std::string name;
    LinearPencil pencil;
    Vector x_o;
    Eigen::Index n_alg = 0;
};

inline LinearizedModel linearize(const DaeModel& m, const Vector& x_o,
                                 double residual_tol = 1e-8) {
    check_model(m);
    if (x_o.size() != m.dim())
        throw std::invalid_argument("linearize: x_o has wrong size");
    const double res = m.residual(x_o).lpNorm<Eigen::Infinity>();
    if (!(res <= residual_tol)) {
        std::ostringstream msg;
        msg << "linearize: |phi(x_o)| = " << res
            << " exceeds equilibrium tolerance " << residual_tol;
        throw std::invalid_argument(msg.str());
    }
    LinearizedModel lin;
    lin.name = m.name;
    lin.pencil.E = m.mass;
    lin.pencil.A = m.jacobian ? m.jacobian(x_o) : fd_jacobian(m.residual, x_o);
    lin.x_o = x_o;
    lin.n_alg = m.n_alg;
    return lin;
}

// ---- built-in models ------------------------------------------------------

// Scalar test equation x' = lambda*x.
inline DaeModel builtin_dahlquist(double lambda) {
    Matrix A(1, 1);
    A << lambda;
    return linear_dae("dahlquist", Matrix::Identity(1, 1), A);
}

// Two decoupled decays with rates sigma_fast and sigma_slow.
inline DaeModel builtin_stiff2(double sigma_fast, double sigma_slow) {
    if (!(sigma_fast > 0.0) || !(sigma_slow > 0.0))
        throw std::invalid_argument("stiff2: decay rates must be positive");
    Matrix A = Matrix::Zero(2, 2);
    A(0, 0) = -sigma_fast;
    A(1, 1) = -sigma_slow;
    return linear_dae("stiff2", Matrix::Identity(2, 2), A);
}

// Single machine vs infinite bus, classical machine model with the electric
// power kept as an algebraic variable. State (delta, omega, p_e).
struct SmibParams {
    double omega_b = 2.0 * std::numbers::pi * 60.0;  // base speed, rad/s
    double H = 3.5;       // inertia constant, s
    double D = 1.0;       // damping coefficient
    double p_m = 0.8;     // mechanical power
    double e_q = 1.05;    // internal EMF magnitude
    double v = 1.0;       // bus voltage magnitude
    double x_eq = 0.65;   // total reactance machine-to-bus
};

inline DaeModel builtin_smib(const SmibParams& p = {}) {
    if (!(p.omega_b > 0.0) || !(p.H > 0.0) || !(p.x_eq > 0.0) ||
        !(p.e_q > 0.0) || !(p.v > 0.0) || p.D < 0.0)
        throw std::invalid_argument("smib: parameter out of range");
    const double p_max = p.e_q * p.v / p.x_eq;
    if (!(std::abs(p.p_m) < p_max))
        throw std::invalid_argument(
            "smib: |p_m| must stay below e_q*v/x_eq for an equilibrium "
            "to exist");

    DaeModel m;
    m.name = "smib";
    m.mass = Matrix::Zero(3, 3);
    m.mass(0, 0) = 1.0;
    m.mass(1, 1) = 1.0;
    m.n_diff = 2;
    m.n_alg = 1;
    m.residual = [p, p_max](const Vector& x) -> Vector {
        Vector f(3);
        f(0) = p.omega_b * (x(1) - 1.0);
        f(1) = (p.p_m - x(2) - p.D * (x(1) - 1.0)) / (2.0 * p.H);
        f(2) = x(2) - p_max * std::sin(x(0));
        return f;
    };
    m.jacobian = [p, p_max](const Vector& x) -> Matrix {
        Matrix J = Matrix::Zero(3, 3);
        J(0, 1) = p.omega_b;
        J(1, 1) = -p.D / (2.0 * p.H);
        J(1, 2) = -1.0 / (2.0 * p.H);
        J(2, 0) = -p_max * std::cos(x(0));
        J(2, 2) = 1.0;
        return J;
    };
    m.equilibrium_guess = Vector(3);
    m.equilibrium_guess << 0.5, 1.0, p.p_m;
    return m;
}

// Real realization of the scalar mode s = alpha + i*beta: a 2x2 rotation
// block for beta != 0, a plain decay for beta == 0. Lets scalar complex
// modes run through the real-arithmetic pipeline unchanged.
inline DaeModel mode_fixture(Complex s) {
    if (s.imag() == 0.0) {
        DaeModel m = builtin_dahlquist(s.real());
        m.name = "mode";
        return m;
    }
    Matrix A(2, 2);
    A << s.real(), -s.imag(),
         s.imag(),  s.real();
    return linear_dae("mode", Matrix::Identity(2, 2), std::move(A));
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("cannot parse " + what + " from '" + s +
                                    "'");
    }
}

}  // namespace detail

// Built-in model from a compact text form:
//   "dahlquist:<lambda>"
//   "stiff2:<sigma_fast>,<sigma_slow>"
//   "smib" or "smib:<key>=<value>,..." with keys
//   omega_b, H, D, p_m, e_q, v, x_eq
inline DaeModel builtin_model(const std::string& spec) {
    const auto head_end = spec.find(':');
    const std::string head = spec.substr(0, head_end);
    const std::string args =
        head_end == std::string::npos ? "" : spec.substr(head_end + 1);

    if (head == "dahlquist") {
        if (args.empty())
            throw std::invalid_argument("dahlquist needs a rate, e.g. "
                                        "dahlquist:-1000");
        return builtin_dahlquist(detail::parse_double(args, "dahlquist rate"));
    }
    if (head == "stiff2") {
        const auto parts = detail::split(args, ',');
        if (parts.size() != 2)
            throw std::invalid_argument("stiff2 needs two rates, e.g. "
                                        "stiff2:1000,0.02");
        return builtin_stiff2(detail::parse_double(parts[0], "stiff2 rate"),
                              detail::parse_double(parts[1], "stiff2 rate"));
    }
    if (head == "smib") {
        SmibParams p;
        if (!args.empty()) {
            for (const auto& kv : detail::split(args, ',')) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos)
                    throw std::invalid_argument("smib parameter '" + kv +
                                                "' is not key=value");
                const std::string key = kv.substr(0, eq);
                const double val =
                    detail::parse_double(kv.substr(eq + 1), "smib " + key);
                if (key == "omega_b") p.omega_b = val;
                else if (key == "H") p.H = val;
                else if (key == "D") p.D = val;
                else if (key == "p_m") p.p_m = val;
                else if (key == "e_q") p.e_q = val;
                else if (key == "v") p.v = val;
                else if (key == "x_eq") p.x_eq = val;
                else
                    throw std::invalid_argument("smib has no parameter '" +
                                                key + "'");
            }
        }
        return builtin_smib(p);
    }
    throw std::invalid_argument("unknown built-in model '" + head + "'");
}

}  // namespace pencilbench
