#pragma once

// Mode-level comparison of a discrete pencil against its continuous parent.
//
// Discrete eigenvalues are pulled back to the s-plane through the principal
// logarithm, greedily matched to the continuous modes by s-plane distance,
// and the leftovers classified as spurious (parasitic roots) or annihilated
// (ztilde ~ 0, the image of modes the method wiped out).

#include "pencilbench/methods.hpp"
#include "pencilbench/model.hpp"
#include "pencilbench/pencil.hpp"

#include <cmath>
#include <functional>
#include <limits>

namespace pencilbench {

// Principal-branch pullback, Im in (-pi, pi]. The step must be positive and
// ztilde nonzero; a zero root has no finite preimage.
inline Complex map_z_to_s(Complex z_tilde, double h) {
    if (!(h > 0.0) || !std::isfinite(h))
        throw std::invalid_argument("map_z_to_s: step must be positive");
    if (z_tilde == Complex(0.0, 0.0))
        throw std::invalid_argument(
            "map_z_to_s: ztilde = 0 marks an annihilated mode");
    return std::log(z_tilde) / h;
}

// Damping ratio -Re(s)/|s|; 1 for pure decay, negative for growing modes.
inline double damping(Complex s) {
    const double mag = std::abs(s);
    if (mag == 0.0)
        throw std::invalid_argument("damping: undefined for s = 0");
    return -s.real() / mag;
}

// A mode is aliased once its angle |Im(s)|*h leaves the principal strip.
inline bool is_aliased(Complex s, double h) {
    return std::abs(s.imag()) * h > std::numbers::pi;
}

struct MatchResult {
    // For each continuous mode, index into the discrete list or -1.
    std::vector<std::ptrdiff_t> image;
    std::vector<std::size_t> spurious;     // unmatched nonzero roots
    std::vector<std::size_t> annihilated;  // |ztilde| <= zero_tol
};

// Greedy globally-nearest pairing in the s-plane. Deterministic: candidate
// pairs are taken in order of (distance, mode index, root index).
inline MatchResult match_modes(const std::vector<Complex>& original,
                               const std::vector<Complex>& discrete, double h,
                               int step_multiplicity = 1,
                               double zero_tol = 1e-10) {
    if (!(h > 0.0))
        throw std::invalid_argument("match_modes: step must be positive");
    if (step_multiplicity < 1)
        throw std::invalid_argument("match_modes: bad step multiplicity");

    MatchResult out;
    out.image.assign(original.size(), -1);

    std::vector<std::size_t> candidates;
    std::vector<Complex> pulled(discrete.size());
    for (std::size_t c = 0; c < discrete.size(); ++c) {
        if (std::abs(discrete[c]) <= zero_tol) {
            out.annihilated.push_back(c);
        } else {
            candidates.push_back(c);
            pulled[c] = map_z_to_s(discrete[c], h);
        }
    }

    struct Pair {
        double dist;
        std::size_t mode, root;
    };
    std::vector<Pair> pairs;
    pairs.reserve(original.size() * candidates.size());
    for (std::size_t i = 0; i < original.size(); ++i)
        for (std::size_t c : candidates)
            pairs.push_back({std::abs(pulled[c] - original[i]), i, c});
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        if (a.mode != b.mode) return a.mode < b.mode;
        return a.root < b.root;
    });

    std::vector<char> root_used(discrete.size(), 0);
    std::size_t matched = 0;
    const std::size_t want = std::min(original.size(), candidates.size());
    for (const Pair& p : pairs) {
        if (matched == want) break;
        if (out.image[p.mode] != -1 || root_used[p.root]) continue;
        out.image[p.mode] = static_cast<std::ptrdiff_t>(p.root);
        root_used[p.root] = 1;
        ++matched;
    }
    for (std::size_t c : candidates)
        if (!root_used[c]) out.spurious.push_back(c);
    return out;
}

struct AnalysisOptions {
    double infinite_tol = 1e-8;   // QZ infinite-eigenvalue classification
    double zero_tol = 1e-10;      // |ztilde| below this counts as annihilated
    double growth_check_tol = 1e-6;  // pencil-vs-scalar-growth diagnostic
};

struct ModeDistortion {
    Complex s;        // continuous mode
    Complex z_tilde;  // matched discrete root (NaN if unmatched)
    Complex s_tilde;  // pullback of z_tilde
    double abs_ds = std::numeric_limits<double>::quiet_NaN();
    double d_zeta = std::numeric_limits<double>::quiet_NaN();  // fraction
    bool matched = false;
    bool aliased = false;
};

struct DistortionReport {
    std::string method;
    double h = 0.0;
    std::vector<ModeDistortion> modes;     // continuous sorted order
    std::vector<Complex> spurious;         // unmatched nonzero roots
    std::size_t annihilated = 0;
    std::size_t infinite_continuous = 0;
    std::size_t infinite_discrete = 0;
    std::vector<std::string> diagnostics;
};

// Full per-mode comparison of method m at step h against the linearized
// model. Matched roots are cross-checked against the scalar growth
// prediction; a disagreement (expected for explicit stage polynomials on
// singular mass matrices, where stage powers mix constraint rows into the
// dynamics) lands in `diagnostics` rather than failing.
inline DistortionReport distortion_report(const MethodSpec& m,
                                          const LinearizedModel& lin, double h,
                                          const AnalysisOptions& opts = {}) {
    const Spectrum cont = finite_eigenvalues(lin.pencil, opts.infinite_tol);
    const Spectrum disc =
        finite_eigenvalues(build_pencil(m, lin.pencil, h), opts.infinite_tol);
    const MatchResult match = match_modes(cont.finite, disc.finite, h,
                                          m.step_multiplicity, opts.zero_tol);

    DistortionReport rep;
    rep.method = m.name;
    rep.h = h;
    rep.infinite_continuous = cont.infinite_count;
    rep.infinite_discrete = disc.infinite_count;
    rep.annihilated = match.annihilated.size();

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < cont.finite.size(); ++i) {
        ModeDistortion row;
        row.s = cont.finite[i];
        row.aliased = is_aliased(row.s, h);
        if (match.image[i] >= 0) {
            row.matched = true;
            row.z_tilde = disc.finite[static_cast<std::size_t>(match.image[i])];
            row.s_tilde = map_z_to_s(row.z_tilde, h);
            row.abs_ds = std::abs(row.s_tilde - row.s);
            row.d_zeta = (row.s == Complex(0.0, 0.0) ||
                          row.s_tilde == Complex(0.0, 0.0))
                             ? nan
                             : damping(row.s_tilde) - damping(row.s);

            try {
                const Complex predicted = growth_roots(m, row.s * h).front();
                const double err = std::abs(row.z_tilde - predicted);
                if (err > opts.growth_check_tol *
                              std::max(1.0, std::abs(predicted))) {
                    std::ostringstream msg;
                    msg << "mode " << i << " (s = " << row.s
                        << "): pencil root deviates from scalar growth "
                           "prediction by "
                        << err;
                    rep.diagnostics.push_back(msg.str());
                }
            } catch (const std::domain_error&) {
                std::ostringstream msg;
                msg << "mode " << i << " (s = " << row.s
                    << "): scalar growth function has a pole at z = s*h";
                rep.diagnostics.push_back(msg.str());
            }
        } else {
            row.z_tilde = {nan, nan};
            row.s_tilde = {nan, nan};
        }
        rep.modes.push_back(row);
    }

    for (std::size_t c : match.spurious)
        rep.spurious.push_back(disc.finite[c]);
    sort_complex(rep.spurious);
    return rep;
}

// Ratio of largest to smallest |Re| over the finite spectrum. Modes with
// |Re| <= zero_tol * max|Re| are treated as round-off zeros (or pure
// oscillators) and excluded from the minimum.
inline double stiffness_ratio(const Spectrum& sp, double zero_tol = 1e-8) {
    if (sp.finite.empty())
        throw std::invalid_argument("stiffness_ratio: empty spectrum");
    double sig_max = 0.0;
    for (const Complex& s : sp.finite)
        sig_max = std::max(sig_max, std::abs(s.real()));
    if (sig_max == 0.0)
        throw std::invalid_argument(
            "stiffness_ratio: no damped modes in the spectrum");
    double sig_min = std::numeric_limits<double>::infinity();
    for (const Complex& s : sp.finite) {
        const double sig = std::abs(s.real());
        if (sig > zero_tol * sig_max) sig_min = std::min(sig_min, sig);
    }
    return sig_max / sig_min;
}

struct StepBound {
    double h = 0.0;
    bool open = false;  // no crossing inside the searched range
};

namespace detail {

// Smallest h in [lo, hi] with f(h) >= target: geometric scan at
// points_per_decade, then geometric bisection of the first bracketing
// interval down to relative width rel_tol. Evaluation failures (poles, QZ
// breakdowns) count as crossings. Returns an open bound at `hi` when f
// stays below the target, and an open bound at `lo` when it starts above.
inline StepBound find_crossing(const std::function<double(double)>& f,
                               double lo, double hi, double target,
                               double rel_tol = 1e-4,
                               int points_per_decade = 40) {
    if (!(lo > 0.0) || !(hi > lo))
        throw std::invalid_argument("find_crossing: need 0 < lo < hi");

    auto eval = [&f](double h) {
        try {
            return f(h);
        } catch (const std::exception&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    if (eval(lo) >= target) return {lo, true};

    const double decades = std::log10(hi / lo);
    const int n = std::max(2, static_cast<int>(
                                  std::ceil(decades * points_per_decade)) +
                                  1);
    double prev = lo;
    double found = -1.0;
    for (int k = 1; k < n; ++k) {
        const double hk =
            k + 1 == n ? hi : lo * std::pow(10.0, decades * k / (n - 1.0));
        if (eval(hk) >= target) {
            found = hk;
            break;
        }
        prev = hk;
    }
    if (found < 0.0) return {hi, true};

    double a = prev, b = found;
    while (b - a > rel_tol * b) {
        const double mid = std::sqrt(a * b);
        (eval(mid) >= target ? b : a) = mid;
    }
    return {b, false};
}

}  // namespace detail

// Smallest step at which the worst matched mode reaches |d_s| = target.
inline StepBound step_for_target_distortion(const MethodSpec& m,
                                            const LinearizedModel& lin,
                                            double target, double h_lo = 1e-4,
                                            double h_hi = 10.0,
                                            const AnalysisOptions& opts = {}) {
    if (!(target > 0.0))
        throw std::invalid_argument(
            "step_for_target_distortion: target must be positive");
    auto worst = [&](double h) {
        const DistortionReport rep = distortion_report(m, lin, h, opts);
        double v = 0.0;
        bool any = false;
        for (const ModeDistortion& row : rep.modes)
            if (row.matched && std::isfinite(row.abs_ds)) {
                v = std::max(v, row.abs_ds);
                any = true;
            }
        return any ? v : std::numeric_limits<double>::infinity();
    };
    return detail::find_crossing(worst, h_lo, h_hi, target);
}

// Smallest step at which the worst matched mode reaches |d_zeta| = target
// (damping-ratio error as a fraction, not percent).
inline StepBound damping_bound_step(const MethodSpec& m,
                                    const LinearizedModel& lin, double target,
                                    double h_lo = 1e-4, double h_hi = 10.0,
                                    const AnalysisOptions& opts = {}) {
    if (!(target > 0.0))
        throw std::invalid_argument(
            "damping_bound_step: target must be positive");
    auto worst = [&](double h) {
        const DistortionReport rep = distortion_report(m, lin, h, opts);
        double v = 0.0;
        bool any = false;
        for (const ModeDistortion& row : rep.modes)
            if (row.matched && std::isfinite(row.d_zeta)) {
                v = std::max(v, std::abs(row.d_zeta));
                any = true;
            }
        return any ? v : std::numeric_limits<double>::infinity();
    };
    return detail::find_crossing(worst, h_lo, h_hi, target);
}

// Largest stable step: the crossing where some discrete root leaves the
// unit disc. Roots matched to continuous modes that are already unstable
// are exempt (the method is entitled to grow them); parasitic roots are
// not. An A-stable method on a stable model returns an open bound at h_hi.
inline StepBound stability_margin(const MethodSpec& m,
                                  const LinearizedModel& lin,
                                  double h_lo = 1e-4, double h_hi = 10.0,
                                  const AnalysisOptions& opts = {}) {
    const Spectrum cont = finite_eigenvalues(lin.pencil, opts.infinite_tol);
    auto radius = [&](double h) {
        const Spectrum disc = finite_eigenvalues(build_pencil(m, lin.pencil, h),
                                                 opts.infinite_tol);
        const MatchResult match = match_modes(cont.finite, disc.finite, h,
                                              m.step_multiplicity,
                                              opts.zero_tol);
        std::vector<char> exempt(disc.finite.size(), 0);
        for (std::size_t i = 0; i < cont.finite.size(); ++i)
            if (cont.finite[i].real() >= 0.0 && match.image[i] >= 0)
                exempt[static_cast<std::size_t>(match.image[i])] = 1;
        double v = 0.0;
        for (std::size_t c = 0; c < disc.finite.size(); ++c)
            if (!exempt[c]) v = std::max(v, std::abs(disc.finite[c]));
        return v;
    };
    return detail::find_crossing(radius, h_lo, h_hi, 1.0);
}

struct LocusPoint {
    double h = 0.0;
    int mode = 0;  // index into the sorted continuous spectrum
    Complex s;
    Complex s_tilde;
    double abs_ds = std::numeric_limits<double>::quiet_NaN();
    bool matched = false;
    bool aliased = false;
};

// Discrete-mode trajectories over a list of steps; h outer, mode inner.
inline std::vector<LocusPoint> root_locus(const MethodSpec& m,
                                          const LinearizedModel& lin,
                                          const std::vector<double>& steps,
                                          const AnalysisOptions& opts = {}) {
    std::vector<LocusPoint> out;
    for (double h : steps) {
        const DistortionReport rep = distortion_report(m, lin, h, opts);
        for (std::size_t i = 0; i < rep.modes.size(); ++i) {
            const ModeDistortion& row = rep.modes[i];
            LocusPoint pt;
            pt.h = h;
            pt.mode = static_cast<int>(i);
            pt.s = row.s;
            pt.s_tilde = row.s_tilde;
            pt.abs_ds = row.abs_ds;
            pt.matched = row.matched;
            pt.aliased = row.aliased;
            out.push_back(pt);
        }
    }
    return out;
}

}  // namespace pencilbench
