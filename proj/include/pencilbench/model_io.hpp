#pragma once

// Loading linear models and Butcher tableaus from disk.
//
// Two on-disk forms are understood:
//   *.json       one document with dimensions, E, A and an optional offset b
//   <stem>.E.mtx Matrix Market pair; the mate is <stem>.A.mtx
//
// A JSON matrix is either dense (array of rows) or sparse:
// {"shape": [r, r], "coo": [[i, j, value], ...]} with 0-based indices.

#include "pencilbench/methods.hpp"
#include "pencilbench/model.hpp"

#include <json.hpp>

#include <fstream>
#include <filesystem>

namespace pencilbench {

struct LoadedModel {
    DaeModel dae;          // phi(x) = A x + b, for the nonlinear code paths
    LinearizedModel linear;  // the pencil (E, A) at face value, x_o = 0
};

namespace detail {

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("'" + path + "' is not valid JSON: " +
                                    e.what());
    }
}

inline Matrix json_matrix(const nlohmann::json& j, Eigen::Index r,
                          const std::string& what) {
    if (j.is_array()) {
        if (static_cast<Eigen::Index>(j.size()) != r)
            throw std::invalid_argument(what + ": expected " +
                                        std::to_string(r) + " rows");
        Matrix M(r, r);
        for (Eigen::Index i = 0; i < r; ++i) {
            const auto& row = j[static_cast<std::size_t>(i)];
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != r)
                throw std::invalid_argument(what + ": row " +
                                            std::to_string(i) +
                                            " must hold " + std::to_string(r) +
                                            " numbers");
            for (Eigen::Index k = 0; k < r; ++k)
                M(i, k) = row[static_cast<std::size_t>(k)].get<double>();
        }
        return M;
    }
    if (j.is_object() && j.contains("coo")) {
        if (j.contains("shape")) {
            const auto& sh = j["shape"];
            if (!sh.is_array() || sh.size() != 2 ||
                sh[0].get<Eigen::Index>() != r ||
                sh[1].get<Eigen::Index>() != r)
                throw std::invalid_argument(what + ": shape must be [" +
                                            std::to_string(r) + ", " +
                                            std::to_string(r) + "]");
        }
        Matrix M = Matrix::Zero(r, r);
        for (const auto& trip : j["coo"]) {
            if (!trip.is_array() || trip.size() != 3)
                throw std::invalid_argument(
                    what + ": coo entries must be [i, j, value]");
            const auto i = trip[0].get<Eigen::Index>();
            const auto k = trip[1].get<Eigen::Index>();
            if (i < 0 || i >= r || k < 0 || k >= r)
                throw std::invalid_argument(what + ": coo index out of range");
            M(i, k) = trip[2].get<double>();
        }
        return M;
    }
    throw std::invalid_argument(
        what + ": matrix must be an array of rows or {shape, coo}");
}

// Matrix Market, real entries, coordinate or array layout, general or
// symmetric qualifier. Indices are 1-based per the format.
inline Matrix read_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open '" + path + "'");
    std::string header;
    if (!std::getline(in, header) || header.rfind("%%MatrixMarket", 0) != 0)
        throw std::invalid_argument("'" + path +
                                    "' is missing the MatrixMarket header");
    std::istringstream hs(header);
    std::string tag, object, layout, field, symmetry;
    hs >> tag >> object >> layout >> field >> symmetry;
    if (object != "matrix" || (layout != "coordinate" && layout != "array") ||
        field != "real" ||
        (symmetry != "general" && symmetry != "symmetric"))
        throw std::invalid_argument("'" + path +
                                    "': unsupported MatrixMarket flavor '" +
                                    layout + " " + field + " " + symmetry +
                                    "'");
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '%') break;

    std::istringstream dims(line);
    Eigen::Index rows = 0, cols = 0;
    if (!(dims >> rows >> cols) || rows <= 0 || cols <= 0)
        throw std::invalid_argument("'" + path + "': bad size line");

    Matrix M = Matrix::Zero(rows, cols);
    if (layout == "coordinate") {
        long long nnz = 0;
        if (!(dims >> nnz) || nnz < 0)
            throw std::invalid_argument("'" + path + "': bad entry count");
        for (long long e = 0; e < nnz; ++e) {
            Eigen::Index i = 0, j = 0;
            double v = 0.0;
            if (!(in >> i >> j >> v))
                throw std::invalid_argument("'" + path +
                                            "': truncated entry list");
            if (i < 1 || i > rows || j < 1 || j > cols)
                throw std::invalid_argument("'" + path +
                                            "': entry index out of range");
            M(i - 1, j - 1) = v;
            if (symmetry == "symmetric") M(j - 1, i - 1) = v;
        }
    } else {
        // array layout stores the full matrix column-major
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) {
                double v = 0.0;
                if (!(in >> v))
                    throw std::invalid_argument("'" + path +
                                                "': truncated value list");
                M(i, j) = v;
                if (symmetry == "symmetric") M(j, i) = v;
            }
    }
    return M;
}

// blkdiag(I_k, 0) detection so a bare matrix pair still gets the right
// differential/algebraic split when it uses the explicit-DAE layout.
inline Eigen::Index infer_algebraic_count(const Matrix& E) {
    const Eigen::Index r = E.rows();
    Eigen::Index ones = 0;
    while (ones < r && E(ones, ones) == 1.0) ++ones;
    Matrix ref = Matrix::Zero(r, r);
    ref.topLeftCorner(ones, ones).setIdentity();
    return E == ref ? r - ones : 0;
}

inline LoadedModel assemble_loaded(const std::string& name, Matrix E, Matrix A,
                                   Vector b, Eigen::Index n_alg) {
    LoadedModel out;
    out.dae = linear_dae(name, E, A, std::move(b), n_alg);
    out.linear.name = name;
    out.linear.pencil = {std::move(E), std::move(A)};
    out.linear.x_o = Vector::Zero(out.linear.pencil.dim());
    out.linear.n_alg = n_alg;
    check_pencil(out.linear.pencil);
    return out;
}

}  // namespace detail

// Reads "<path>.json" or a "<stem>.E.mtx"/"<stem>.A.mtx" pair; the path may
// name the stem or either file of the pair. The linear part reports the
// pencil exactly as stored, anchored at x_o = 0; the DAE wrapper carries
// phi(x) = A x + b so the nonlinear paths (equilibrium search, simulation)
// work on the same input.
inline LoadedModel load_linear_model(const std::string& path) {
    namespace fs = std::filesystem;

    if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
        const nlohmann::json j = detail::read_json_file(path);
        for (const char* key : {"r", "E", "A"})
            if (!j.contains(key))
                throw std::invalid_argument("'" + path + "': missing key '" +
                                            std::string(key) + "'");
        const auto r = j["r"].get<Eigen::Index>();
        if (r <= 0)
            throw std::invalid_argument("'" + path + "': r must be positive");
        const auto m_x = j.value<Eigen::Index>("m_x", r);
        const auto m_y = j.value<Eigen::Index>("m_y", r - m_x);
        if (m_x < 0 || m_y < 0 || m_x + m_y != r)
            throw std::invalid_argument("'" + path +
                                        "': m_x + m_y must equal r");
        Matrix E = detail::json_matrix(j["E"], r, path + ": E");
        Matrix A = detail::json_matrix(j["A"], r, path + ": A");
        Vector b = Vector::Zero(r);
        if (j.contains("b")) {
            const auto& jb = j["b"];
            if (!jb.is_array() || static_cast<Eigen::Index>(jb.size()) != r)
                throw std::invalid_argument("'" + path +
                                            "': b must hold r numbers");
            for (Eigen::Index i = 0; i < r; ++i)
                b(i) = jb[static_cast<std::size_t>(i)].get<double>();
        }
        return detail::assemble_loaded(fs::path(path).stem().string(),
                                       std::move(E), std::move(A),
                                       std::move(b), m_y);
    }

    // Matrix Market pair; accept the stem or either member.
    std::string stem = path;
    for (const char* suffix : {".E.mtx", ".A.mtx"}) {
        const std::string s(suffix);
        if (stem.size() > s.size() &&
            stem.substr(stem.size() - s.size()) == s) {
            stem = stem.substr(0, stem.size() - s.size());
            break;
        }
    }
    const std::string e_path = stem + ".E.mtx";
    const std::string a_path = stem + ".A.mtx";
    if (!fs::exists(e_path) || !fs::exists(a_path))
        throw std::invalid_argument("expected a JSON model or the pair '" +
                                    e_path + "' + '" + a_path + "'");
    Matrix E = detail::read_matrix_market(e_path);
    Matrix A = detail::read_matrix_market(a_path);
    if (E.rows() != E.cols() || A.rows() != A.cols() || E.rows() != A.rows())
        throw std::invalid_argument("'" + stem +
                                    "': E and A must be square and equal");
    const Eigen::Index n_alg = detail::infer_algebraic_count(E);
    return detail::assemble_loaded(fs::path(stem).filename().string(),
                                   std::move(E), std::move(A), Vector(),
                                   n_alg);
}

// Tableau file: {"Q": [[...]], "w": [...]} with optional "name".
inline MethodSpec load_tableau_method(const std::string& path) {
    const nlohmann::json j = detail::read_json_file(path);
    if (!j.contains("Q") || !j.contains("w"))
        throw std::invalid_argument("'" + path +
                                    "': tableau needs keys 'Q' and 'w'");
    const auto rho = static_cast<Eigen::Index>(j["Q"].size());
    if (rho == 0)
        throw std::invalid_argument("'" + path + "': empty tableau");
    ButcherTableau t;
    t.Q = detail::json_matrix(j["Q"], rho, path + ": Q");
    const auto& jw = j["w"];
    if (!jw.is_array() || static_cast<Eigen::Index>(jw.size()) != rho)
        throw std::invalid_argument("'" + path +
                                    "': w must match the stage count");
    t.w = Vector(rho);
    for (Eigen::Index i = 0; i < rho; ++i)
        t.w(i) = jw[static_cast<std::size_t>(i)].get<double>();
    const std::string name = j.value("name", std::string("rk:") +
                                                 std::filesystem::path(path)
                                                     .stem()
                                                     .string());
    return method_tableau(std::move(t), name);
}

// Method selector used on the command line:
//   fem | rk4 | bem | itm | dirk2s | bdf2
//   moebius:a,b,c,d   (c and d as multiples of the step)
//   rk:<tableau.json>
inline MethodSpec parse_method(const std::string& text) {
    if (text == "fem") return method_fem();
    if (text == "rk4") return method_rk4();
    if (text == "bem") return method_bem();
    if (text == "itm") return method_itm();
    if (text == "dirk2s") return method_dirk2s();
    if (text == "bdf2") return method_bdf2();
    if (text.rfind("moebius:", 0) == 0) {
        const auto parts = detail::split(text.substr(8), ',');
        if (parts.size() != 4)
            throw std::invalid_argument(
                "moebius needs four coefficients, e.g. moebius:1,-1,0.5,0.5");
        return method_moebius(detail::parse_double(parts[0], "moebius a"),
                              detail::parse_double(parts[1], "moebius b"),
                              detail::parse_double(parts[2], "moebius c"),
                              detail::parse_double(parts[3], "moebius d"));
    }
    if (text.rfind("rk:", 0) == 0) return load_tableau_method(text.substr(3));
    throw std::invalid_argument("unknown method '" + text + "'");
}

// Complex scalar like "-0.1699+7.6696j" or "-1000" or "2.5j".
inline Complex parse_complex(const std::string& text) {
    const std::string err = "cannot parse complex number from '" + text + "'";
    std::string s = text;
    s.erase(std::remove(s.begin(), s.end(), ' '), s.end());
    if (s.empty()) throw std::invalid_argument(err);

    bool has_j = s.back() == 'j' || s.back() == 'i';
    if (has_j) s.pop_back();
    if (s.empty() && !has_j) throw std::invalid_argument(err);

    // split at the last +/- that is not an exponent sign or leading sign
    std::size_t split_pos = std::string::npos;
    for (std::size_t k = s.size(); k-- > 1;) {
        if ((s[k] == '+' || s[k] == '-') && s[k - 1] != 'e' &&
            s[k - 1] != 'E') {
            split_pos = k;
            break;
        }
    }
    try {
        if (!has_j) {
            if (split_pos != std::string::npos)
                throw std::invalid_argument(err);
            return {detail::parse_double(s, "real part"), 0.0};
        }
        if (split_pos == std::string::npos) {
            const double im = (s == "+" || s == "-" || s.empty())
                                  ? (s == "-" ? -1.0 : 1.0)
                                  : detail::parse_double(s, "imaginary part");
            return {0.0, im};
        }
        const double re =
            detail::parse_double(s.substr(0, split_pos), "real part");
        std::string im_text = s.substr(split_pos);
        if (im_text == "+" || im_text == "-")
            im_text += "1";
        return {re, detail::parse_double(im_text, "imaginary part")};
    } catch (const std::invalid_argument&) {
        throw std::invalid_argument(err);
    }
}

}  // namespace pencilbench
