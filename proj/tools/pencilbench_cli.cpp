// pencilbench command line front end.
//
// Subcommands:
//   analyze    per-mode distortion table for methods x steps
//   bounds     step-size bounds (|d_s| target, damping target, stability)
//   locus      discrete-mode trajectories over a geometric step sweep
//   simulate   fixed-step time-domain integration
//   validate   randomized cross-checks between growth and pencil paths
//
// Exit codes: 0 success, 2 bad input, 3 numerical failure (including a
// failing validation run). Every file output gets a sibling
// <name>.manifest.json recording tool version, options and outputs.

#include "pencilbench/analysis.hpp"
#include "pencilbench/model_io.hpp"
#include "pencilbench/report_io.hpp"
#include "pencilbench/tdi.hpp"
#include "pencilbench/validate.hpp"
#include "pencilbench/version.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

namespace pb = pencilbench;

namespace {

// ---- shared helpers --------------------------------------------------------

std::size_t worker_count(std::size_t items) {
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("PENCILBENCH_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && cap >= 1)
            n = std::min(n, static_cast<std::size_t>(cap));
    }
    return std::min(n, std::max<std::size_t>(1, items));
}

// Index-sharded worker pool; results land in caller-owned slots so output
// order never depends on scheduling.
void parallel_for(std::size_t items,
                  const std::function<void(std::size_t)>& body) {
    const std::size_t workers = worker_count(items);
    if (workers <= 1) {
        for (std::size_t i = 0; i < items; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= items) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::string utc_now() {
    const std::time_t now =
        std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::invalid_argument("cannot write '" + path + "'");
    out << content;
}

void write_manifest(const std::string& command, const nlohmann::json& options,
                    const std::vector<std::string>& outputs,
                    const nlohmann::json& result = {}) {
    nlohmann::json m;
    m["tool"] = "pencilbench";
    m["version"] = PENCILBENCH_VERSION;
    m["command"] = command;
    m["options"] = options;
    m["outputs"] = outputs;
    if (!result.is_null()) m["result"] = result;
    m["generated_utc"] = utc_now();
    for (const std::string& out : outputs)
        write_file(out + ".manifest.json", m.dump(2) + "\n");
}

// Model selector:
//   dahlquist:<rate> | stiff2:<fast>,<slow> | smib[:k=v,...]
//   (optionally prefixed builtin:) | mode:<re>[+<im>j] |
//   <file.json> | <stem>[.E.mtx]
struct ResolvedModel {
    pb::DaeModel dae;
    pb::LinearizedModel lin;
};

bool is_builtin_name(const std::string& text) {
    const std::string head = text.substr(0, text.find(':'));
    return head == "dahlquist" || head == "stiff2" || head == "smib";
}

pb::DaeModel resolve_dae(const std::string& text) {
    if (text.rfind("builtin:", 0) == 0)
        return pb::builtin_model(text.substr(8));
    if (text.rfind("mode:", 0) == 0)
        return pb::mode_fixture(pb::parse_complex(text.substr(5)));
    if (is_builtin_name(text)) return pb::builtin_model(text);
    return pb::load_linear_model(text).dae;
}

ResolvedModel resolve_model(const std::string& text) {
    if (text.rfind("builtin:", 0) == 0 || text.rfind("mode:", 0) == 0 ||
        is_builtin_name(text)) {
        ResolvedModel out;
        out.dae = resolve_dae(text);
        out.lin = pb::linearize(out.dae, pb::find_equilibrium(out.dae));
        return out;
    }
    ResolvedModel out;
    pb::LoadedModel loaded = pb::load_linear_model(text);
    out.dae = std::move(loaded.dae);
    out.lin = std::move(loaded.linear);
    return out;
}

std::vector<double> parse_double_list(const std::string& text,
                                      const std::string& what) {
    std::vector<double> out;
    for (const std::string& item : pb::detail::split(text, ','))
        out.push_back(pb::detail::parse_double(item, what));
    if (out.empty())
        throw std::invalid_argument(what + ": empty list");
    return out;
}

std::vector<pb::MethodSpec> parse_methods(const std::string& text) {
    if (text.empty() || text == "all") return pb::method_catalog();
    std::vector<pb::MethodSpec> out;
    for (const std::string& item : pb::detail::split(text, ','))
        out.push_back(pb::parse_method(item));
    return out;
}

std::vector<double> geometric_grid(double lo, double hi, int points) {
    if (!(lo > 0.0) || !(hi > lo) || points < 2)
        throw std::invalid_argument(
            "step grid needs 0 < h-min < h-max and at least 2 points");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(points));
    for (int k = 0; k < points; ++k)
        out.push_back(lo * std::pow(hi / lo, k / (points - 1.0)));
    return out;
}

// ---- subcommand options ----------------------------------------------------

struct AnalyzeOpts {
    std::string model, methods = "all", steps, out, json_out;
    double infinite_tol = 1e-8, zero_tol = 1e-10;
};

struct BoundsOpts {
    std::string model, methods = "all", out;
    double target_ds = 0.0, target_dzeta_pct = 0.0;
    bool margin = false;
    double h_min = 1e-4, h_max = 10.0;
};

struct LocusOpts {
    std::string model, methods = "all", out;
    double h_min = 1e-3, h_max = 1.0;
    int points = 81;
};

struct SimulateOpts {
    std::string model, method = "itm", out, x0_text, x0_delta_text;
    std::vector<std::string> disturb;
    double h = 0.01, t_end = 1.0;
    int var = 0;
    bool with_reference = false;
};

struct ValidateOpts {
    std::uint64_t seed = 12345;
    int trials = 50;
    double perturbation = 0.0;
};

// ---- subcommand bodies -----------------------------------------------------

int run_analyze(const AnalyzeOpts& o) {
    const ResolvedModel rm = resolve_model(o.model);
    const std::vector<pb::MethodSpec> methods = parse_methods(o.methods);
    const std::vector<double> steps = parse_double_list(o.steps, "--h");
    pb::AnalysisOptions aopts;
    aopts.infinite_tol = o.infinite_tol;
    aopts.zero_tol = o.zero_tol;

    std::vector<pb::DistortionReport> reports(methods.size() * steps.size());
    parallel_for(reports.size(), [&](std::size_t i) {
        const pb::MethodSpec& m = methods[i / steps.size()];
        const double h = steps[i % steps.size()];
        reports[i] = pb::distortion_report(m, rm.lin, h, aopts);
    });

    const std::string csv = pb::distortion_csv(reports);
    nlohmann::json options = {
        {"model", o.model},       {"methods", o.methods},
        {"h", steps},             {"infinite_tol", o.infinite_tol},
        {"zero_tol", o.zero_tol},
    };
    std::vector<std::string> outputs;
    if (o.out.empty()) {
        std::cout << csv;
    } else {
        write_file(o.out, csv);
        outputs.push_back(o.out);
    }
    if (!o.json_out.empty()) {
        write_file(o.json_out, pb::report_json(reports).dump(2) + "\n");
        outputs.push_back(o.json_out);
    }
    if (!outputs.empty()) {
        write_manifest("analyze", options, outputs);
        for (const std::string& p : outputs)
            std::cout << "wrote " << p << "\n";
    }
    for (const pb::DistortionReport& rep : reports)
        for (const std::string& d : rep.diagnostics)
            std::cerr << "note: " << rep.method << " h=" << rep.h << ": " << d
                      << "\n";
    return 0;
}

int run_bounds(const BoundsOpts& o) {
    if (o.target_ds <= 0.0 && o.target_dzeta_pct <= 0.0 && !o.margin)
        throw std::invalid_argument(
            "bounds: pick at least one of --target-ds, --target-dzeta-pct, "
            "--margin");
    const ResolvedModel rm = resolve_model(o.model);
    const std::vector<pb::MethodSpec> methods = parse_methods(o.methods);

    struct Item {
        std::size_t method;
        std::string criterion;
        double target;
    };
    std::vector<Item> items;
    for (std::size_t m = 0; m < methods.size(); ++m) {
        if (o.target_ds > 0.0) items.push_back({m, "abs_ds", o.target_ds});
        if (o.target_dzeta_pct > 0.0)
            items.push_back({m, "d_zeta", o.target_dzeta_pct / 100.0});
        if (o.margin) items.push_back({m, "stable", 1.0});
    }

    std::vector<pb::BoundRow> rows(items.size());
    parallel_for(items.size(), [&](std::size_t i) {
        const Item& item = items[i];
        const pb::MethodSpec& m = methods[item.method];
        pb::StepBound bound;
        std::string criterion = item.criterion;
        if (item.criterion == "abs_ds") {
            bound = pb::step_for_target_distortion(m, rm.lin, item.target,
                                                   o.h_min, o.h_max);
            criterion += "<=" + pb::format_g9(item.target);
        } else if (item.criterion == "d_zeta") {
            bound = pb::damping_bound_step(m, rm.lin, item.target, o.h_min,
                                           o.h_max);
            criterion += "<=" + pb::format_g9(item.target);
        } else {
            bound = pb::stability_margin(m, rm.lin, o.h_min, o.h_max);
        }
        rows[i] = {m.name, criterion, item.target, bound};
    });

    const std::string csv = pb::bounds_csv(rows);
    if (o.out.empty()) {
        std::cout << csv;
    } else {
        write_file(o.out, csv);
        write_manifest("bounds",
                       {{"model", o.model},
                        {"methods", o.methods},
                        {"target_ds", o.target_ds},
                        {"target_dzeta_pct", o.target_dzeta_pct},
                        {"margin", o.margin},
                        {"h_min", o.h_min},
                        {"h_max", o.h_max}},
                       {o.out});
        std::cout << "wrote " << o.out << "\n";
    }
    return 0;
}

int run_locus(const LocusOpts& o) {
    const ResolvedModel rm = resolve_model(o.model);
    const std::vector<pb::MethodSpec> methods = parse_methods(o.methods);
    const std::vector<double> steps =
        geometric_grid(o.h_min, o.h_max, o.points);

    std::vector<std::vector<pb::LocusPoint>> traces(methods.size());
    parallel_for(methods.size(), [&](std::size_t i) {
        traces[i] = pb::root_locus(methods[i], rm.lin, steps);
    });

    std::string csv;
    for (std::size_t i = 0; i < methods.size(); ++i) {
        std::string part = pb::locus_csv(methods[i].name, traces[i]);
        if (i == 0) {
            csv = std::move(part);
        } else {
            csv += part.substr(part.find('\n') + 1);  // drop repeated header
        }
    }
    if (o.out.empty()) {
        std::cout << csv;
    } else {
        write_file(o.out, csv);
        write_manifest("locus",
                       {{"model", o.model},
                        {"methods", o.methods},
                        {"h_min", o.h_min},
                        {"h_max", o.h_max},
                        {"points", o.points}},
                       {o.out});
        std::cout << "wrote " << o.out << "\n";
    }
    return 0;
}

int run_simulate(const SimulateOpts& o) {
    const ResolvedModel rm = resolve_model(o.model);
    const pb::MethodSpec method = pb::parse_method(o.method);

    pb::Vector x0;
    if (!o.x0_text.empty()) {
        const std::vector<double> vals = parse_double_list(o.x0_text, "--x0");
        if (static_cast<Eigen::Index>(vals.size()) != rm.dae.dim())
            throw std::invalid_argument("--x0 needs " +
                                        std::to_string(rm.dae.dim()) +
                                        " values");
        x0 = Eigen::Map<const pb::Vector>(vals.data(),
                                          static_cast<Eigen::Index>(
                                              vals.size()));
    } else {
        x0 = pb::find_equilibrium(rm.dae);
    }
    if (!o.x0_delta_text.empty()) {
        const std::vector<double> vals =
            parse_double_list(o.x0_delta_text, "--x0-delta");
        if (static_cast<Eigen::Index>(vals.size()) != rm.dae.dim())
            throw std::invalid_argument("--x0-delta needs " +
                                        std::to_string(rm.dae.dim()) +
                                        " values");
        x0 += Eigen::Map<const pb::Vector>(vals.data(),
                                           static_cast<Eigen::Index>(
                                               vals.size()));
    }

    pb::SimulationConfig cfg;
    cfg.h = o.h;
    cfg.t_end = o.t_end;
    for (const std::string& text : o.disturb) {
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(
                "--disturb takes <time>=<model>, e.g. "
                "1.0=builtin:smib:p_m=0.5");
        pb::Disturbance d;
        d.time = pb::detail::parse_double(text.substr(0, eq),
                                          "disturbance time");
        d.label = text.substr(eq + 1);
        d.apply = [spec = d.label](const pb::DaeModel&) {
            return resolve_dae(spec);
        };
        cfg.disturbances.push_back(std::move(d));
    }

    const pb::Trajectory traj = pb::simulate(method, rm.dae, x0, cfg);

    nlohmann::json result;
    result["samples"] = traj.t.size();
    result["diverged"] = traj.diverged;
    if (traj.diverged) {
        result["divergence_time"] = traj.divergence_time;
        std::cout << "diverged at t = " << pb::format_g9(traj.divergence_time)
                  << "\n";
    }
    if (o.with_reference) {
        if (o.var < 0 || o.var >= rm.dae.dim())
            throw std::invalid_argument("--var out of range");
        const pb::Trajectory ref =
            pb::reference_trajectory(rm.dae, x0, o.t_end);
        const double mismatch = pb::trajectory_mismatch(
            traj, ref, static_cast<Eigen::Index>(o.var));
        result["reference_mismatch"] = mismatch;
        result["var"] = o.var;
        std::cout << "reference mismatch on x_" << o.var << " = "
                  << pb::format_g9(mismatch) << "\n";
    }

    if (o.out.empty()) {
        std::cout << pb::trajectory_csv(traj);
    } else {
        write_file(o.out, pb::trajectory_csv(traj));
        write_manifest("simulate",
                       {{"model", o.model},
                        {"method", o.method},
                        {"h", o.h},
                        {"t_end", o.t_end},
                        {"x0", o.x0_text},
                        {"x0_delta", o.x0_delta_text},
                        {"disturb", o.disturb},
                        {"var", o.var},
                        {"reference", o.with_reference}},
                       {o.out}, result);
        std::cout << "wrote " << o.out << "\n";
    }
    return 0;
}

int run_validate(const ValidateOpts& o) {
    pb::ValidationOptions vopts;
    vopts.seed = o.seed;
    vopts.trials = o.trials;
    vopts.perturbation = o.perturbation;
    const pb::ValidationReport report = pb::run_validation(vopts);
    for (const pb::ValidationCheck& check : report.checks)
        std::cout << (check.pass ? "PASS" : "FAIL") << "  " << check.name
                  << "  [" << check.detail << "]\n";
    if (!report.all_pass()) {
        std::cout << "validation failed\n";
        return 3;
    }
    std::cout << "all checks passed\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Matrix-pencil analysis of time-integration methods"};
    app.require_subcommand(1);
    // --h is a step-size option below; the default -h short flag would
    // shadow it.
    app.set_help_flag("--help", "Print help and exit");
    app.set_version_flag("--version", PENCILBENCH_VERSION);

    AnalyzeOpts an;
    CLI::App* analyze =
        app.add_subcommand("analyze", "Per-mode distortion table");
    analyze->add_option("--model", an.model, "Model selector")->required();
    analyze->add_option("--method", an.methods,
                        "Comma list of methods, or 'all'");
    analyze->add_option("--h", an.steps, "Comma list of step sizes")
        ->required();
    analyze->add_option("-o,--out", an.out, "CSV output path");
    analyze->add_option("--json", an.json_out, "JSON output path");
    analyze->add_option("--infinite-tol", an.infinite_tol,
                        "Infinite-eigenvalue classification tolerance");
    analyze->add_option("--zero-tol", an.zero_tol,
                        "|ztilde| treated as an annihilated mode");

    BoundsOpts bo;
    CLI::App* bounds = app.add_subcommand("bounds", "Step-size bounds");
    bounds->add_option("--model", bo.model, "Model selector")->required();
    bounds->add_option("--method", bo.methods,
                       "Comma list of methods, or 'all'");
    bounds->add_option("--target-ds", bo.target_ds,
                       "Smallest h with worst-mode |d_s| at this value");
    bounds->add_option("--target-dzeta-pct", bo.target_dzeta_pct,
                       "Smallest h with worst-mode |d_zeta| at this value, "
                       "percentage points");
    bounds->add_flag("--margin", bo.margin,
                     "Largest stable h (open bound when A-stable)");
    bounds->add_option("--h-min", bo.h_min, "Search range start");
    bounds->add_option("--h-max", bo.h_max, "Search range end");
    bounds->add_option("-o,--out", bo.out, "CSV output path");

    LocusOpts lo;
    CLI::App* locus =
        app.add_subcommand("locus", "Mode trajectories over a step sweep");
    locus->add_option("--model", lo.model, "Model selector")->required();
    locus->add_option("--method", lo.methods,
                      "Comma list of methods, or 'all'");
    locus->add_option("--h-min", lo.h_min, "Sweep start");
    locus->add_option("--h-max", lo.h_max, "Sweep end");
    locus->add_option("--points", lo.points, "Geometric grid size");
    locus->add_option("-o,--out", lo.out, "CSV output path");

    SimulateOpts so;
    CLI::App* simulate =
        app.add_subcommand("simulate", "Fixed-step time integration");
    simulate->add_option("--model", so.model, "Model selector")->required();
    simulate->add_option("--method", so.method, "Integration method");
    simulate->add_option("--h", so.h, "Step size")->required();
    simulate->add_option("--t-end", so.t_end, "End time")->required();
    simulate->add_option("--x0", so.x0_text,
                         "Initial state (comma list); default equilibrium");
    simulate->add_option("--x0-delta", so.x0_delta_text,
                         "Offset added to the initial state");
    simulate->add_option("--disturb", so.disturb,
                         "<time>=<model>: swap the model at a grid time");
    simulate->add_option("--var", so.var, "State index for --ref mismatch");
    simulate->add_flag("--ref", so.with_reference,
                       "Also integrate the shared reference and report the "
                       "trajectory mismatch");
    simulate->add_option("-o,--out", so.out, "CSV output path");

    ValidateOpts vo;
    CLI::App* validate =
        app.add_subcommand("validate", "Randomized cross-checks");
    validate->add_option("--seed", vo.seed, "RNG seed");
    validate->add_option("--trials", vo.trials, "Random systems per check");
    validate->add_option("--inject-pencil-perturbation", vo.perturbation,
                         "Negative control: distort one pencil entry and "
                         "expect the suite to fail");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(analyze)) return run_analyze(an);
        if (app.got_subcommand(bounds)) return run_bounds(bo);
        if (app.got_subcommand(locus)) return run_locus(lo);
        if (app.got_subcommand(simulate)) return run_simulate(so);
        if (app.got_subcommand(validate)) return run_validate(vo);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
