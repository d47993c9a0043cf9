#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "pencilbench/analysis.hpp"
#include "pencilbench/model.hpp"
#include "support/test_util.hpp"

namespace pb = pencilbench;
using pb::Complex;
using pb::Matrix;
using pb::Vector;

namespace {

const Complex kModeA(-0.1699, 7.6696);
const Complex kModeB(-0.3042, 4.1426);

pb::LinearizedModel linearized_mode(Complex s) {
    const pb::DaeModel m = pb::mode_fixture(s);
    return pb::linearize(m, Vector::Zero(m.dim()));
}

// Distortion row of the positive-frequency member of the pair.
const pb::ModeDistortion& upper_row(const pb::DistortionReport& rep) {
    for (const auto& row : rep.modes)
        if (row.s.imag() > 0.0) return row;
    return rep.modes.back();
}

}  // namespace

TEST_CASE("principal-branch pullback", "[analysis]") {
    // Trapezoidal image of lambda = -1 at h = 0.1 is exactly 19/21.
    const Complex s = pb::map_z_to_s(Complex(19.0 / 21.0, 0.0), 0.1);
    CHECK(s.real() == Catch::Approx(-1.0008345855698254).epsilon(1e-13));
    CHECK(s.imag() == 0.0);

    // A negative real root lands on the branch boundary Im = pi/h.
    const Complex neg = pb::map_z_to_s(Complex(-3.0, 0.0), 2.0);
    CHECK(neg.real() == Catch::Approx(std::log(3.0) / 2.0).epsilon(1e-14));
    CHECK(neg.imag() == Catch::Approx(std::numbers::pi / 2.0).epsilon(1e-14));

    CHECK_THROWS_AS(pb::map_z_to_s(Complex(0.0, 0.0), 0.1),
                    std::invalid_argument);
    CHECK_THROWS_AS(pb::map_z_to_s(Complex(1.0, 0.0), 0.0),
                    std::invalid_argument);
}

TEST_CASE("pullback inverts the exponential map inside the strip",
          "[analysis][property]") {
    std::mt19937_64 rng(2718);
    for (int k = 0; k < 100; ++k) {
        const double h = std::pow(10.0, testutil::uniform(rng, -3.0, 0.0));
        const double im_max = 0.95 * std::numbers::pi / h;
        const Complex s(testutil::uniform(rng, -5.0, 1.0),
                        testutil::uniform(rng, -im_max, im_max));
        const Complex back = pb::map_z_to_s(std::exp(s * h), h);
        CHECK(std::abs(back - s) < 1e-9 * std::max(1.0, std::abs(s)));
    }
}

TEST_CASE("damping ratio convention", "[analysis]") {
    CHECK(pb::damping(Complex(-1.0, 1.0)) ==
          Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
    CHECK(pb::damping(Complex(-2.0, 0.0)) == Catch::Approx(1.0));
    CHECK(pb::damping(Complex(2.0, 0.0)) == Catch::Approx(-1.0));
    CHECK(pb::damping(Complex(3.0, -4.0)) == Catch::Approx(-0.6).epsilon(1e-14));
    CHECK_THROWS_AS(pb::damping(Complex(0.0, 0.0)), std::invalid_argument);

    // Anchors for the two oscillatory benchmark modes.
    CHECK(pb::damping(kModeA) ==
          Catch::Approx(0.022146960460253290).epsilon(1e-12));
    CHECK(pb::damping(kModeB) ==
          Catch::Approx(0.073234957836326666).epsilon(1e-12));
}

TEST_CASE("aliasing threshold is |Im s| * h > pi", "[analysis]") {
    CHECK(pb::is_aliased(kModeA, 0.5));
    CHECK_FALSE(pb::is_aliased(kModeA, 0.4));
    CHECK_FALSE(pb::is_aliased(Complex(0.0, std::numbers::pi), 1.0));
    CHECK(pb::is_aliased(Complex(0.0, std::numbers::pi * (1.0 + 1e-9)), 1.0));
}

TEST_CASE("greedy matching pairs time scales correctly", "[analysis]") {
    // Both eigenvalues of the stiff pair under the explicit rule at
    // h = 0.005: the fast mode has already crossed to z = -4.
    const std::vector<Complex> original = {Complex(-1000.0, 0.0),
                                           Complex(-0.02, 0.0)};
    const std::vector<Complex> discrete = {Complex(-4.0, 0.0),
                                           Complex(0.9999, 0.0)};
    const pb::MatchResult mr = pb::match_modes(original, discrete, 0.005);

    REQUIRE(mr.image.size() == 2);
    CHECK(mr.image[0] == 0);
    CHECK(mr.image[1] == 1);
    CHECK(mr.spurious.empty());
    CHECK(mr.annihilated.empty());
}

TEST_CASE("zero roots are annihilated, unmatched roots are spurious",
          "[analysis]") {
    const std::vector<Complex> original = {Complex(-1.0, 0.0)};
    const pb::MatchResult mr = pb::match_modes(
        original, {Complex(0.0, 0.0), Complex(0.9, 0.0), Complex(-0.8, 0.0)},
        0.1);

    REQUIRE(mr.annihilated.size() == 1);
    CHECK(mr.annihilated[0] == 0);
    CHECK(mr.image[0] == 1);
    REQUIRE(mr.spurious.size() == 1);
    CHECK(mr.spurious[0] == 2);
}

TEST_CASE("damping distortion of the benchmark mode at h=0.05",
          "[analysis][table]") {
    const pb::LinearizedModel lin = linearized_mode(kModeA);
    const double h = 0.05;

    auto dzeta = [&](const pb::MethodSpec& m) {
        return upper_row(pb::distortion_report(m, lin, h)).d_zeta;
    };

    CHECK(dzeta(pb::method_fem()) ==
          Catch::Approx(-0.18566871271750285).epsilon(1e-9));
    CHECK(dzeta(pb::method_bem()) ==
          Catch::Approx(0.18253329041643795).epsilon(1e-9));
    CHECK(dzeta(pb::method_itm()) ==
          Catch::Approx(-5.2609104703711857e-4).epsilon(1e-9));
    CHECK(dzeta(pb::method_dirk2s()) ==
          Catch::Approx(-5.5511731474539263e-5).epsilon(1e-9));
    CHECK(dzeta(pb::method_bdf2()) ==
          Catch::Approx(9.1152611405139003e-3).epsilon(1e-9));
    CHECK(dzeta(pb::method_rk4()) ==
          Catch::Approx(4.1536993743188183e-5).epsilon(1e-9));
}

TEST_CASE("frequency-error magnitudes at h=0.1 on the plant mode",
          "[analysis][table]") {
    const pb::LinearizedModel lin = linearized_mode(kModeB);

    auto ds = [&](const pb::MethodSpec& m) {
        return upper_row(pb::distortion_report(m, lin, 0.1)).abs_ds;
    };

    CHECK(ds(pb::method_bem()) ==
          Catch::Approx(0.81044860641953705).epsilon(1e-9));
    CHECK(ds(pb::method_itm()) ==
          Catch::Approx(0.058238423766723489).epsilon(1e-9));
    CHECK(ds(pb::method_dirk2s()) ==
          Catch::Approx(0.028680962629243312).epsilon(1e-9));
    CHECK(ds(pb::method_bdf2()) ==
          Catch::Approx(0.20778663439511656).epsilon(1e-9));
}

TEST_CASE("parasitic companion roots are reported as spurious", "[analysis]") {
    const pb::LinearizedModel lin = linearized_mode(kModeA);
    const pb::DistortionReport rep =
        pb::distortion_report(pb::method_bdf2(), lin, 0.01);

    CHECK(rep.modes.size() == 2);
    CHECK(rep.spurious.size() == 2);
    CHECK(rep.annihilated == 0);
    for (const auto& row : rep.modes) {
        CHECK(row.matched);
        // The principal root is a second-order approximation.
        CHECK(row.abs_ds < 0.02);
    }
    // Parasitic roots sit well inside the disc at small steps.
    for (const Complex& z : rep.spurious) CHECK(std::abs(z) < 0.5);
}

TEST_CASE("machine reports under singular mass matrices", "[analysis]") {
    const pb::DaeModel smib = pb::builtin_smib();
    const Vector xo = pb::find_equilibrium(smib);
    const pb::LinearizedModel lin = pb::linearize(smib, xo);

    SECTION("explicit rule keeps the constraint infinite") {
        const pb::DistortionReport rep =
            pb::distortion_report(pb::method_fem(), lin, 0.001);
        CHECK(rep.infinite_continuous == 1);
        CHECK(rep.infinite_discrete == 1);
        CHECK(rep.annihilated == 0);
        CHECK(rep.spurious.empty());
        for (const auto& row : rep.modes) {
            CHECK(row.matched);
            // First-order phase error ~ |s|^2 h / 2 on the swing mode.
            CHECK(row.abs_ds < 0.1);
        }
        CHECK(rep.diagnostics.empty());
    }

    SECTION("backward rule annihilates the constraint") {
        const pb::DistortionReport rep =
            pb::distortion_report(pb::method_bem(), lin, 0.01);
        CHECK(rep.infinite_continuous == 1);
        CHECK(rep.infinite_discrete == 0);
        CHECK(rep.annihilated == 1);
        CHECK(rep.spurious.empty());
    }

    SECTION("stage polynomial mixes constraint rows into the dynamics") {
        const pb::DistortionReport rep =
            pb::distortion_report(pb::method_rk4(), lin, 0.05);
        CHECK_FALSE(rep.diagnostics.empty());
    }
}

TEST_CASE("aliasing is flagged on the report rows", "[analysis]") {
    const pb::LinearizedModel lin = linearized_mode(kModeA);
    const pb::DistortionReport rep =
        pb::distortion_report(pb::method_itm(), lin, 0.5);
    for (const auto& row : rep.modes) CHECK(row.aliased);
}

TEST_CASE("time-scale separation ratio", "[analysis]") {
    pb::Spectrum sp;
    sp.finite = {Complex(-1000.0, 0.0), Complex(-0.02, 0.0)};
    CHECK(pb::stiffness_ratio(sp) == Catch::Approx(5.0e4).epsilon(1e-12));

    sp.finite = {Complex(-99900.1, 0.0), Complex(-0.077, 1.2)};
    CHECK(pb::stiffness_ratio(sp) ==
          Catch::Approx(1297403.8961038961).epsilon(1e-12));

    // Round-off real parts and pure oscillators drop out of the minimum.
    sp.finite = {Complex(-5.0, 0.0), Complex(-1e-14, 2.0), Complex(0.0, 3.0)};
    CHECK(pb::stiffness_ratio(sp) == Catch::Approx(1.0));

    sp.finite = {Complex(0.0, 1.0)};
    CHECK_THROWS_AS(pb::stiffness_ratio(sp), std::invalid_argument);
    sp.finite.clear();
    CHECK_THROWS_AS(pb::stiffness_ratio(sp), std::invalid_argument);
}

TEST_CASE("step bound for a frequency-error target on the benchmark mode",
          "[analysis][search]") {
    const pb::LinearizedModel lin = linearized_mode(kModeA);

    auto bound = [&](const pb::MethodSpec& m) {
        const pb::StepBound b = pb::step_for_target_distortion(m, lin, 0.1);
        CHECK_FALSE(b.open);
        return b.h;
    };

    CHECK(bound(pb::method_fem()) ==
          Catch::Approx(0.0033977099711742).epsilon(5e-4));
    CHECK(bound(pb::method_bem()) ==
          Catch::Approx(0.0034003268483929).epsilon(5e-4));
    CHECK(bound(pb::method_itm()) ==
          Catch::Approx(0.0521674018645637).epsilon(5e-4));
    CHECK(bound(pb::method_dirk2s()) ==
          Catch::Approx(0.0749013477559264).epsilon(5e-4));
    CHECK(bound(pb::method_bdf2()) ==
          Catch::Approx(0.0262769501305781).epsilon(5e-4));
    CHECK(bound(pb::method_rk4()) ==
          Catch::Approx(0.1452838558240776).epsilon(5e-4));
}

TEST_CASE("step bound for a frequency-error target on the plant mode",
          "[analysis][search]") {
    const pb::LinearizedModel lin = linearized_mode(kModeB);

    auto bound = [&](const pb::MethodSpec& m) {
        const pb::StepBound b = pb::step_for_target_distortion(m, lin, 0.1);
        CHECK_FALSE(b.open);
        return b.h;
    };

    CHECK(bound(pb::method_bem()) ==
          Catch::Approx(0.0116264939826154).epsilon(5e-4));
    CHECK(bound(pb::method_itm()) ==
          Catch::Approx(0.1322421743195631).epsilon(5e-4));
    CHECK(bound(pb::method_dirk2s()) ==
          Catch::Approx(0.1896474119166757).epsilon(5e-4));
    CHECK(bound(pb::method_bdf2()) ==
          Catch::Approx(0.0667653865116357).epsilon(5e-4));
}

TEST_CASE("stability margin search", "[analysis][search]") {
    const pb::DaeModel m = pb::builtin_dahlquist(-1000.0);
    const pb::LinearizedModel lin = pb::linearize(m, Vector::Zero(1));

    const pb::StepBound fem = pb::stability_margin(pb::method_fem(), lin);
    CHECK_FALSE(fem.open);
    CHECK(fem.h == Catch::Approx(0.002).epsilon(5e-4));

    const pb::StepBound rk4 = pb::stability_margin(pb::method_rk4(), lin);
    CHECK_FALSE(rk4.open);
    CHECK(rk4.h == Catch::Approx(0.0027852935634053).epsilon(5e-4));

    // A-stable rules never cross: the bound comes back open at the top.
    const pb::StepBound itm = pb::stability_margin(pb::method_itm(), lin);
    CHECK(itm.open);
    CHECK(itm.h == Catch::Approx(10.0));
}

TEST_CASE("originally unstable modes are exempt from the margin",
          "[analysis][search]") {
    const pb::LinearizedModel lin = linearized_mode(Complex(0.3, 2.0));
    const pb::StepBound b = pb::stability_margin(pb::method_itm(), lin);
    // The trapezoidal images of an unstable pair leave the disc at every
    // h, so only the exemption can keep the search open.
    CHECK(b.open);
}

TEST_CASE("damping-error step bound brackets the table value",
          "[analysis][search]") {
    const pb::LinearizedModel lin = linearized_mode(kModeA);
    const pb::StepBound b =
        pb::damping_bound_step(pb::method_itm(), lin, 5.0e-4);
    CHECK_FALSE(b.open);
    // |d_zeta| at h=0.05 is 5.26e-4, so the crossing sits just below.
    CHECK(b.h > 0.02);
    CHECK(b.h < 0.05);
}

TEST_CASE("unreachable targets return open bounds", "[analysis][search]") {
    const pb::LinearizedModel lin = linearized_mode(kModeA);
    const pb::StepBound b = pb::step_for_target_distortion(
        pb::method_itm(), lin, 1e9, 1e-4, 1.0);
    CHECK(b.open);
    CHECK(b.h == Catch::Approx(1.0));
}

TEST_CASE("search validates its bracket and target", "[analysis][search]") {
    const pb::LinearizedModel lin = linearized_mode(kModeA);
    CHECK_THROWS_AS(
        pb::step_for_target_distortion(pb::method_itm(), lin, -0.1),
        std::invalid_argument);
    CHECK_THROWS_AS(
        pb::step_for_target_distortion(pb::method_itm(), lin, 0.1, 1.0, 0.5),
        std::invalid_argument);
}

TEST_CASE("mode trajectories over a step sweep", "[analysis]") {
    const pb::LinearizedModel lin = linearized_mode(kModeA);
    const std::vector<double> steps = {0.001, 0.01, 0.1};
    const auto pts = pb::root_locus(pb::method_itm(), lin, steps);

    REQUIRE(pts.size() == 6);  // 3 steps x 2 modes
    CHECK(pts[0].h == 0.001);
    CHECK(pts[0].mode == 0);
    CHECK(pts[1].mode == 1);
    CHECK(pts[2].h == 0.01);

    // Distortion grows with the step.
    CHECK(pts[1].abs_ds < pts[3].abs_ds);
    CHECK(pts[3].abs_ds < pts[5].abs_ds);
}
