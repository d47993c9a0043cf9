#pragma once

// Generalized matrix pencils and their spectra.
//
// A pencil is the pair (E, A) interpreted as lambda*E - A. Eigenvalues with
// |beta| ~ 0 in the QZ decomposition are treated as infinite; everything else
// is reported as alpha/beta and sorted by (real, imag) ascending.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace pencilbench {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Complex = std::complex<double>;

struct LinearPencil {
    Matrix E;
    Matrix A;

    Eigen::Index dim() const { return E.rows(); }
};

inline void check_pencil(const LinearPencil& p) {
    if (p.E.rows() == 0 || p.E.rows() != p.E.cols())
        throw std::invalid_argument("pencil: E must be square and non-empty");
    if (p.A.rows() != p.E.rows() || p.A.cols() != p.E.cols())
        throw std::invalid_argument("pencil: A must match E in shape");
    if (!p.E.allFinite() || !p.A.allFinite())
        throw std::invalid_argument("pencil: matrices must be finite");
}

// Finite eigenvalues plus the count of infinite ones. `finite` is closed
// under conjugation for real pencils up to roundoff and sorted by
// (real, imag) ascending.
struct Spectrum {
    std::vector<Complex> finite;
    std::size_t infinite_count = 0;
    Eigen::Index dim = 0;
};

inline void sort_complex(std::vector<Complex>& v) {
    std::sort(v.begin(), v.end(), [](const Complex& x, const Complex& y) {
        if (x.real() != y.real()) return x.real() < y.real();
        return x.imag() < y.imag();
    });
}

// QZ-based eigenvalues of lambda*E - A. An eigenvalue is classified as
// infinite when |beta| <= infinite_tol * ||(alpha, beta)||.
inline Spectrum finite_eigenvalues(const LinearPencil& p,
                                   double infinite_tol = 1e-8) {
    check_pencil(p);
    if (!(infinite_tol > 0.0 && infinite_tol < 1.0))
        throw std::invalid_argument("finite_eigenvalues: tol must be in (0,1)");

    // Eigen solves A*v = lambda*B*v for compute(A, B).
    Eigen::GeneralizedEigenSolver<Matrix> solver;
    solver.compute(p.A, p.E, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("QZ iteration failed on a " +
                                 std::to_string(p.dim()) + "x" +
                                 std::to_string(p.dim()) + " pencil");

    Spectrum out;
    out.dim = p.dim();
    const auto& alphas = solver.alphas();
    const auto& betas = solver.betas();
    for (Eigen::Index i = 0; i < alphas.size(); ++i) {
        const Complex a = alphas(i);
        const double b = betas(i);
        const double scale = std::hypot(std::abs(a), b);
        if (std::abs(b) <= infinite_tol * scale) {
            ++out.infinite_count;
        } else {
            out.finite.push_back(a / b);
        }
    }
    sort_complex(out.finite);
    return out;
}

// Discrete-time stability: every finite eigenvalue strictly inside the unit
// disc. Infinite eigenvalues encode constraints, not dynamics, and are
// ignored here and in the continuous test below.
inline bool is_discrete_stable(const Spectrum& s) {
    return std::all_of(s.finite.begin(), s.finite.end(),
                       [](const Complex& z) { return std::abs(z) < 1.0; });
}

inline bool is_continuous_stable(const Spectrum& s) {
    return std::all_of(s.finite.begin(), s.finite.end(),
                       [](const Complex& z) { return z.real() < 0.0; });
}

namespace detail {

// Best rational p/q ~ x (x > 0) by continued fractions, stopping at
// |x - p/q| <= tol*x. Throws if no approximant with q <= q_max qualifies.
inline void rationalize(double x, double tol, std::int64_t q_max,
                        std::int64_t& p_out, std::int64_t& q_out) {
    std::int64_t p0 = 1, q0 = 0;  // convergent k-1
    std::int64_t p1 = 0, q1 = 1;  // convergent k-2 (seeded for a0 step)
    double frac = x;
    constexpr std::int64_t guard = std::int64_t{1} << 60;
    for (int k = 0; k < 64; ++k) {
        const double fl = std::floor(frac);
        if (fl > static_cast<double>(q_max)) break;
        const auto a = static_cast<std::int64_t>(fl);
        if (a > 0 && (p0 > guard / a || q0 > guard / a)) break;
        const std::int64_t p = a * p0 + p1;
        const std::int64_t q = a * q0 + q1;
        if (q > q_max || q < 0 || p < 0) break;
        p1 = p0; q1 = q0; p0 = p; q0 = q;
        if (q0 > 0 &&
            std::abs(x - static_cast<double>(p0) / static_cast<double>(q0)) <=
                tol * x) {
            p_out = p0;
            q_out = q0;
            return;
        }
        const double rem = frac - fl;
        if (rem < 1e-18) break;
        frac = 1.0 / rem;
    }
    throw std::invalid_argument(
        "companion_pencil: delay " + std::to_string(x) +
        " admits no rational approximation within tolerance");
}

inline std::int64_t checked_lcm(std::int64_t a, std::int64_t b) {
    const std::int64_t g = std::gcd(a, b);
    const std::int64_t a_red = a / g;
    if (a_red != 0 && b > (static_cast<std::int64_t>(1) << 40) / a_red)
        throw std::invalid_argument(
            "companion_pencil: delays share no practical common grid");
    return a_red * b;
}

}  // namespace detail

struct CompanionPencil {
    LinearPencil pencil;
    double grid = 0.0;        // common delay grid step
    std::size_t slots = 0;    // pencil spans slots+1 grid points
};

// Companion pencil of the delayed recurrence sum_k B_k x(t - d_k) = 0.
//
// Delays are normalized so the smallest is zero, then snapped to a common
// rational grid (relative tolerance `tol`); incommensurable delays are an
// error. With slot coefficients C_0..C_N (C_0 the zero-delay block, zero
// matrices filling unused slots) the result is the N*r pencil
//
//   Etilde = blkdiag(I, ..., I, C_0)
//   Atilde = superdiagonal identity blocks, last block row (-C_N ... -C_1)
//
// whose finite eigenvalues are the roots of det(C_0 w^N + ... + C_N) = 0.
inline CompanionPencil companion_pencil(const std::map<double, Matrix>& blocks,
                                        double tol = 1e-12) {
    if (blocks.empty())
        throw std::invalid_argument("companion_pencil: no coefficient blocks");
    const Eigen::Index r = blocks.begin()->second.rows();
    for (const auto& [d, B] : blocks) {
        if (!(d >= 0.0) || !std::isfinite(d))
            throw std::invalid_argument("companion_pencil: delays must be >= 0");
        if (B.rows() != r || B.cols() != r)
            throw std::invalid_argument(
                "companion_pencil: blocks must be square and equal-sized");
        if (!B.allFinite())
            throw std::invalid_argument("companion_pencil: blocks must be finite");
    }

    const double d_min = blocks.begin()->first;  // map is ordered by delay
    std::vector<double> shifted;
    std::vector<const Matrix*> mats;
    for (const auto& [d, B] : blocks) {
        shifted.push_back(d - d_min);
        mats.push_back(&B);
    }
    if (shifted.back() <= 0.0)
        throw std::invalid_argument(
            "companion_pencil: need at least two distinct delays");

    // Snap each positive delay to p/q, take the grid as gcd of the fractions.
    constexpr std::int64_t q_max = 10'000'000;
    std::vector<std::int64_t> ps(shifted.size(), 0), qs(shifted.size(), 1);
    std::int64_t den = 1;
    for (std::size_t i = 0; i < shifted.size(); ++i) {
        if (shifted[i] <= 0.0) continue;
        detail::rationalize(shifted[i], tol, q_max, ps[i], qs[i]);
        den = detail::checked_lcm(den, qs[i]);
    }
    std::int64_t num_gcd = 0;
    std::vector<std::int64_t> counts(shifted.size(), 0);
    for (std::size_t i = 0; i < shifted.size(); ++i) {
        const std::int64_t mul = den / qs[i];
        if (ps[i] != 0 && mul > (std::int64_t{1} << 60) / ps[i])
            throw std::invalid_argument(
                "companion_pencil: delays share no practical common grid");
        counts[i] = ps[i] * mul;
        num_gcd = std::gcd(num_gcd, counts[i]);
    }
    for (auto& c : counts) c /= num_gcd;
    const double grid = static_cast<double>(num_gcd) / static_cast<double>(den);

    const std::int64_t N = *std::max_element(counts.begin(), counts.end());
    if (N > 4096)
        throw std::invalid_argument(
            "companion_pencil: grid needs " + std::to_string(N) +
            " slots; delays are not commensurable on a practical grid");

    std::vector<Matrix> C(static_cast<std::size_t>(N) + 1, Matrix::Zero(r, r));
    for (std::size_t i = 0; i < counts.size(); ++i)
        C[static_cast<std::size_t>(counts[i])] += *mats[i];

    const Eigen::Index n = static_cast<Eigen::Index>(N) * r;
    CompanionPencil out;
    out.grid = grid;
    out.slots = static_cast<std::size_t>(N);
    out.pencil.E = Matrix::Identity(n, n);
    out.pencil.E.bottomRightCorner(r, r) = C[0];
    out.pencil.A = Matrix::Zero(n, n);
    for (std::int64_t k = 0; k + 1 < N; ++k)
        out.pencil.A.block(k * r, (k + 1) * r, r, r) = Matrix::Identity(r, r);
    for (std::int64_t k = 0; k < N; ++k)
        out.pencil.A.block((N - 1) * r, k * r, r, r) =
            -C[static_cast<std::size_t>(N - k)];
    return out;
}

}  // namespace pencilbench
