#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "pencilbench/model_io.hpp"
#include "pencilbench/report_io.hpp"

namespace pb = pencilbench;
namespace fs = std::filesystem;
using pb::Complex;
using pb::Matrix;
using pb::Vector;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("pencilbench-test-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int n = 0;
        return n;
    }
    std::string file(const std::string& name) const {
        return (path / name).string();
    }
};

void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    out << body;
}

}  // namespace

TEST_CASE("dense JSON model round trip", "[io]") {
    TempDir dir;
    const std::string path = dir.file("plant.json");
    write_text(path, R"({
      "r": 3, "m_x": 2, "m_y": 1,
      "E": [[1,0,0],[0,1,0],[0,0,0]],
      "A": [[0,377,0],[-0.2,-0.14,-0.14],[-1.4,0,1]],
      "b": [0, 0.11, -0.74]
    })");

    const pb::LoadedModel lm = pb::load_linear_model(path);
    CHECK(lm.linear.name == "plant");
    CHECK(lm.linear.pencil.dim() == 3);
    CHECK(lm.linear.n_alg == 1);
    CHECK(lm.linear.pencil.E(0, 0) == 1.0);
    CHECK(lm.linear.pencil.E(2, 2) == 0.0);
    CHECK(lm.linear.pencil.A(0, 1) == 377.0);

    CHECK(lm.dae.n_alg == 1);
    Vector x = Vector::Zero(3);
    CHECK(lm.dae.residual(x)(1) == Catch::Approx(0.11));
    CHECK((lm.dae.jacobian(x) - lm.linear.pencil.A)
              .lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("sparse JSON model form", "[io]") {
    TempDir dir;
    const std::string path = dir.file("coo.json");
    write_text(path, R"({
      "r": 2,
      "E": {"shape": [2,2], "coo": [[0,0,1.0],[1,1,1.0]]},
      "A": {"shape": [2,2], "coo": [[0,1,1.0],[1,0,-4.0]]}
    })");

    const pb::LoadedModel lm = pb::load_linear_model(path);
    CHECK(lm.linear.n_alg == 0);
    CHECK(lm.linear.pencil.A(1, 0) == -4.0);
    CHECK(lm.linear.pencil.A(0, 0) == 0.0);

    const pb::Spectrum sp = pb::finite_eigenvalues(lm.linear.pencil);
    REQUIRE(sp.finite.size() == 2);
    CHECK(std::abs(sp.finite[1] - Complex(0.0, 2.0)) < 1e-12);
}

TEST_CASE("JSON model validation", "[io]") {
    TempDir dir;

    const std::string missing = dir.file("missing.json");
    write_text(missing, R"({"r": 2, "E": [[1,0],[0,1]]})");
    CHECK_THROWS_AS(pb::load_linear_model(missing), std::invalid_argument);

    const std::string ragged = dir.file("ragged.json");
    write_text(ragged, R"({"r": 2, "E": [[1,0],[0,1]], "A": [[1,0],[0]]})");
    CHECK_THROWS_AS(pb::load_linear_model(ragged), std::invalid_argument);

    const std::string badsplit = dir.file("badsplit.json");
    write_text(badsplit,
               R"({"r": 2, "m_x": 2, "m_y": 1, "E": [[1,0],[0,1]],
                   "A": [[1,0],[0,1]]})");
    CHECK_THROWS_AS(pb::load_linear_model(badsplit), std::invalid_argument);

    const std::string oob = dir.file("oob.json");
    write_text(oob, R"({"r": 2, "E": {"coo": [[2,0,1.0]]},
                        "A": [[1,0],[0,1]]})");
    CHECK_THROWS_AS(pb::load_linear_model(oob), std::invalid_argument);

    const std::string garbage = dir.file("garbage.json");
    write_text(garbage, "{not json");
    CHECK_THROWS_AS(pb::load_linear_model(garbage), std::invalid_argument);

    CHECK_THROWS_AS(pb::load_linear_model(dir.file("absent.json")),
                    std::invalid_argument);
}

TEST_CASE("matrix-market pair round trip", "[io]") {
    TempDir dir;
    write_text(dir.file("grid.E.mtx"),
               "%%MatrixMarket matrix coordinate real general\n"
               "% mass matrix\n"
               "3 3 2\n"
               "1 1 1.0\n"
               "2 2 1.0\n");
    write_text(dir.file("grid.A.mtx"),
               "%%MatrixMarket matrix array real general\n"
               "3 3\n"
               "0\n-0.2\n-1.4\n377\n-0.14\n0\n0\n-0.14\n1\n");

    for (const std::string sel :
         {dir.file("grid"), dir.file("grid.E.mtx"), dir.file("grid.A.mtx")}) {
        const pb::LoadedModel lm = pb::load_linear_model(sel);
        CHECK(lm.linear.name == "grid");
        CHECK(lm.linear.n_alg == 1);
        CHECK(lm.linear.pencil.A(0, 1) == 377.0);  // column-major array
        CHECK(lm.linear.pencil.A(2, 0) == -1.4);
    }
}

TEST_CASE("matrix-market symmetric coordinate entries mirror", "[io]") {
    TempDir dir;
    write_text(dir.file("sym.E.mtx"),
               "%%MatrixMarket matrix coordinate real symmetric\n"
               "2 2 2\n"
               "1 1 2.0\n"
               "2 1 0.5\n");
    write_text(dir.file("sym.A.mtx"),
               "%%MatrixMarket matrix coordinate real general\n"
               "2 2 2\n"
               "1 1 -1.0\n"
               "2 2 -1.0\n");
    const pb::LoadedModel lm = pb::load_linear_model(dir.file("sym"));
    CHECK(lm.linear.pencil.E(0, 1) == 0.5);
    CHECK(lm.linear.pencil.E(1, 0) == 0.5);
}

TEST_CASE("matrix-market validation", "[io]") {
    TempDir dir;
    write_text(dir.file("bad.E.mtx"), "not a header\n1 1 1\n1 1 1.0\n");
    write_text(dir.file("bad.A.mtx"),
               "%%MatrixMarket matrix coordinate real general\n"
               "1 1 1\n"
               "1 1 -1.0\n");
    CHECK_THROWS_AS(pb::load_linear_model(dir.file("bad")),
                    std::invalid_argument);

    CHECK_THROWS_AS(pb::load_linear_model(dir.file("nothing")),
                    std::invalid_argument);
}

TEST_CASE("tableau file loading", "[io]") {
    TempDir dir;
    const std::string path = dir.file("classic4.json");
    write_text(path, R"({
      "Q": [[0,0,0,0],[0.5,0,0,0],[0,0.5,0,0],[0,0,1,0]],
      "w": [0.16666666666666666, 0.3333333333333333,
            0.3333333333333333, 0.16666666666666666]
    })");

    const pb::MethodSpec m = pb::parse_method("rk:" + path);
    CHECK(m.kind == pb::MethodKind::tableau);
    CHECK(m.name == "rk:classic4");
    CHECK(m.order == 4);
    CHECK_FALSE(m.implicit);

    const std::string named = dir.file("named.json");
    write_text(named, R"({"Q": [[0.5]], "w": [1.0], "name": "implicit-mid"})");
    CHECK(pb::load_tableau_method(named).name == "implicit-mid");
    CHECK(pb::load_tableau_method(named).order == 2);

    const std::string bad = dir.file("badtab.json");
    write_text(bad, R"({"Q": [[0,0],[0.5,0]], "w": [1.0]})");
    CHECK_THROWS_AS(pb::load_tableau_method(bad), std::invalid_argument);
}

TEST_CASE("method selector strings", "[io]") {
    CHECK(pb::parse_method("fem").kind == pb::MethodKind::fem);
    CHECK(pb::parse_method("bdf2").step_multiplicity == 2);

    const pb::MethodSpec mb = pb::parse_method("moebius:1,-1,0.5,0.5");
    CHECK(mb.kind == pb::MethodKind::moebius);
    CHECK(mb.ma == 1.0);
    CHECK(mb.md == 0.5);
    CHECK(pb::moebius_is_symmetric_a_stable(mb));

    CHECK_THROWS_AS(pb::parse_method("euler"), std::invalid_argument);
    CHECK_THROWS_AS(pb::parse_method("moebius:1,2"), std::invalid_argument);
    CHECK_THROWS_AS(pb::parse_method("moebius:1,2,x,4"),
                    std::invalid_argument);
}

TEST_CASE("complex scalar parsing", "[io]") {
    CHECK(pb::parse_complex("-0.1699+7.6696j") ==
          Complex(-0.1699, 7.6696));
    CHECK(pb::parse_complex("-1000") == Complex(-1000.0, 0.0));
    CHECK(pb::parse_complex("2.5j") == Complex(0.0, 2.5));
    CHECK(pb::parse_complex("j") == Complex(0.0, 1.0));
    CHECK(pb::parse_complex("-j") == Complex(0.0, -1.0));
    CHECK(pb::parse_complex("1e-3-2e-4j") == Complex(1e-3, -2e-4));
    CHECK(pb::parse_complex("-0.3042 + 4.1426i") ==
          Complex(-0.3042, 4.1426));

    CHECK_THROWS_AS(pb::parse_complex(""), std::invalid_argument);
    CHECK_THROWS_AS(pb::parse_complex("1+2"), std::invalid_argument);
    CHECK_THROWS_AS(pb::parse_complex("abcj"), std::invalid_argument);
}

TEST_CASE("distortion table serialization", "[io]") {
    pb::DistortionReport rep;
    rep.method = "itm";
    rep.h = 0.05;
    pb::ModeDistortion row;
    row.s = Complex(-0.1699, 7.6696);
    row.z_tilde = Complex(0.9, 0.37);
    row.s_tilde = Complex(-0.17, 7.66);
    row.abs_ds = 0.0125;
    row.d_zeta = -5.26e-4;
    row.matched = true;
    rep.modes.push_back(row);
    rep.spurious.push_back(Complex(0.2, 0.0));

    const std::string csv = pb::distortion_csv({rep});
    CHECK(csv.find("method,h,re_s,im_s,re_stilde,im_stilde,abs_ds,"
                   "d_zeta_pct,aliased,spurious_count") == 0);
    CHECK(csv.find("itm,0.05,-0.1699,7.6696,") != std::string::npos);
    CHECK(csv.find("-0.0526") != std::string::npos);  // percent
    CHECK(csv.find(",1\n") != std::string::npos);     // spurious count

    const nlohmann::json j = pb::report_json(rep);
    CHECK(j["method"] == "itm");
    CHECK(j["modes"][0]["matched"] == true);
    CHECK(j["spurious"].size() == 1);

    // Unmatched rows serialize as "nan" rather than breaking the table.
    pb::DistortionReport empty_rep;
    empty_rep.method = "fem";
    empty_rep.h = 0.1;
    pb::ModeDistortion unmatched;
    unmatched.s = Complex(-1.0, 0.0);
    empty_rep.modes.push_back(unmatched);
    const std::string csv2 = pb::distortion_csv({empty_rep});
    CHECK(csv2.find("nan") != std::string::npos);
}

TEST_CASE("bound and locus serialization", "[io]") {
    const std::string bcsv = pb::bounds_csv(
        {{"itm", "abs_ds<=0.1", 0.1, {0.052, false}},
         {"itm", "stable", 1.0, {10.0, true}}});
    CHECK(bcsv.find("method,criterion,target,h,open") == 0);
    CHECK(bcsv.find("itm,abs_ds<=0.1,0.1,0.052,0") != std::string::npos);
    CHECK(bcsv.find("itm,stable,1,10,1") != std::string::npos);

    pb::LocusPoint pt;
    pt.h = 0.01;
    pt.mode = 1;
    pt.s = Complex(-0.17, 7.67);
    pt.s_tilde = Complex(-0.18, 7.61);
    pt.abs_ds = 0.06;
    pt.matched = true;
    const std::string lcsv = pb::locus_csv("itm", {pt});
    CHECK(lcsv.find("method,h,mode,re_s,im_s,re_stilde,im_stilde,abs_ds,"
                    "matched,aliased") == 0);
    CHECK(lcsv.find("itm,0.01,1,") != std::string::npos);
}

TEST_CASE("trajectory serialization", "[io]") {
    pb::Trajectory traj;
    traj.method = "itm";
    traj.h = 0.5;
    traj.t = {0.0, 0.5};
    traj.x = Matrix(2, 2);
    traj.x << 1.0, 2.0, 3.0, 4.0;
    traj.newton_iters = {0, 2};

    const std::string csv = pb::trajectory_csv(traj);
    CHECK(csv.find("t,x_0,x_1,newton_iters") == 0);
    CHECK(csv.find("0,1,2,0") != std::string::npos);
    CHECK(csv.find("0.5,3,4,2") != std::string::npos);
}

TEST_CASE("nine-digit float formatting", "[io]") {
    CHECK(pb::format_g9(0.05) == "0.05");
    CHECK(pb::format_g9(-1.0008345855698254) == "-1.00083459");
    CHECK(pb::format_g9(std::numeric_limits<double>::quiet_NaN()) == "nan");
}
