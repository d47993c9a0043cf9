#pragma once

// CSV and JSON serialization of analysis results.
//
// CSV floats are printed with %.9g so reruns of the same analysis are
// byte-identical; booleans become 0/1 and undefined values "nan".

#include "pencilbench/analysis.hpp"
#include "pencilbench/tdi.hpp"

#include <json.hpp>

#include <cstdio>

namespace pencilbench {

inline std::string format_g9(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline std::string distortion_csv(const std::vector<DistortionReport>& reps) {
    std::string out =
        "method,h,re_s,im_s,re_stilde,im_stilde,abs_ds,d_zeta_pct,aliased,"
        "spurious_count\n";
    for (const DistortionReport& rep : reps) {
        for (const ModeDistortion& row : rep.modes) {
            out += rep.method;
            out += ',' + format_g9(rep.h);
            out += ',' + format_g9(row.s.real());
            out += ',' + format_g9(row.s.imag());
            out += ',' + format_g9(row.s_tilde.real());
            out += ',' + format_g9(row.s_tilde.imag());
            out += ',' + format_g9(row.abs_ds);
            out += ',' + format_g9(row.d_zeta * 100.0);
            out += ',';
            out += row.aliased ? '1' : '0';
            out += ',' + std::to_string(rep.spurious.size());
            out += '\n';
        }
    }
    return out;
}

inline nlohmann::json report_json(const DistortionReport& rep) {
    nlohmann::json j;
    j["method"] = rep.method;
    j["h"] = rep.h;
    j["modes"] = nlohmann::json::array();
    for (const ModeDistortion& row : rep.modes) {
        nlohmann::json m;
        m["re_s"] = row.s.real();
        m["im_s"] = row.s.imag();
        m["matched"] = row.matched;
        m["aliased"] = row.aliased;
        if (row.matched) {
            m["re_ztilde"] = row.z_tilde.real();
            m["im_ztilde"] = row.z_tilde.imag();
            m["re_stilde"] = row.s_tilde.real();
            m["im_stilde"] = row.s_tilde.imag();
            m["abs_ds"] = row.abs_ds;
            if (std::isfinite(row.d_zeta)) m["d_zeta"] = row.d_zeta;
        }
        j["modes"].push_back(std::move(m));
    }
    j["spurious"] = nlohmann::json::array();
    for (const Complex& z : rep.spurious)
        j["spurious"].push_back({z.real(), z.imag()});
    j["annihilated"] = rep.annihilated;
    j["infinite_continuous"] = rep.infinite_continuous;
    j["infinite_discrete"] = rep.infinite_discrete;
    j["diagnostics"] = rep.diagnostics;
    return j;
}

inline nlohmann::json report_json(const std::vector<DistortionReport>& reps) {
    nlohmann::json arr = nlohmann::json::array();
    for (const DistortionReport& rep : reps) arr.push_back(report_json(rep));
    return arr;
}

struct BoundRow {
    std::string method;
    std::string criterion;  // "abs_ds", "d_zeta" or "margin"
    double target = 0.0;    // 0 for margin rows
    StepBound bound;
};

inline std::string bounds_csv(const std::vector<BoundRow>& rows) {
    std::string out = "method,criterion,target,h,open\n";
    for (const BoundRow& r : rows) {
        out += r.method + ',' + r.criterion;
        out += ',' + format_g9(r.target);
        out += ',' + format_g9(r.bound.h);
        out += ',';
        out += r.bound.open ? '1' : '0';
        out += '\n';
    }
    return out;
}

inline std::string locus_csv(const std::string& method,
                             const std::vector<LocusPoint>& points) {
    std::string out =
        "method,h,mode,re_s,im_s,re_stilde,im_stilde,abs_ds,matched,aliased\n";
    for (const LocusPoint& p : points) {
        out += method;
        out += ',' + format_g9(p.h);
        out += ',' + std::to_string(p.mode);
        out += ',' + format_g9(p.s.real());
        out += ',' + format_g9(p.s.imag());
        out += ',' + format_g9(p.s_tilde.real());
        out += ',' + format_g9(p.s_tilde.imag());
        out += ',' + format_g9(p.abs_ds);
        out += ',';
        out += p.matched ? '1' : '0';
        out += ',';
        out += p.aliased ? '1' : '0';
        out += '\n';
    }
    return out;
}

inline std::string trajectory_csv(const Trajectory& traj) {
    std::string out = "t";
    for (Eigen::Index i = 0; i < traj.x.cols(); ++i)
        out += ",x_" + std::to_string(i);
    out += ",newton_iters\n";
    for (std::size_t k = 0; k < traj.t.size(); ++k) {
        out += format_g9(traj.t[k]);
        for (Eigen::Index i = 0; i < traj.x.cols(); ++i)
            out += ',' + format_g9(traj.x(static_cast<Eigen::Index>(k), i));
        out += ',' + std::to_string(traj.newton_iters[k]);
        out += '\n';
    }
    return out;
}

}  // namespace pencilbench
