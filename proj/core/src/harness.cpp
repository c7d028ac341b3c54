#include "plasthin/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/core.h>
#include <spdlog/spdlog.h>
#include <tbb/global_control.h>
#include <tbb/parallel_for.h>

#include "json.hpp"
#include "plasthin/duality_audit.hpp"
#include "plasthin/errors.hpp"
#include "plasthin/unfolding.hpp"

namespace plasthin {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(fmt::format("'{}' must be a JSON object", where));
    for (const auto& item : j.items()) {
        const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return item.key() == a; });
        if (!ok) throw ConfigError(fmt::format("unknown key '{}' in '{}'", item.key(), where));
    }
}

template <class T>
T value_or(const json& j, const char* key, T def) {
    return j.contains(key) ? j.at(key).get<T>() : def;
}

template <std::size_t N>
std::array<double, N> fixed_array(const json& j, const std::string& where) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != N) throw ConfigError(fmt::format("'{}' needs {} numbers, got {}", where, N, v.size()));
    std::array<double, N> a{};
    std::copy(v.begin(), v.end(), a.begin());
    return a;
}

bool is_integer_ratio(double a, double b, int* n) {
    const double r = a / b;
    const long k = std::lround(r);
    if (n) *n = static_cast<int>(k);
    return k >= 1 && std::abs(r - static_cast<double>(k)) <= 1e-9 * std::max(1.0, r);
}

const char* kind_name(GeneratorKind k) {
    switch (k) {
    case GeneratorKind::Laminate: return "laminate";
    case GeneratorKind::Checkerboard: return "checkerboard";
    case GeneratorKind::Inclusion: return "inclusion";
    case GeneratorKind::Raster: return "raster";
    }
    return "raster";
}

std::string fmt_double(double x) { return fmt::format("{:.17g}", x); }

// ---- output writers ---------------------------------------------------------------------------

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p);
    if (!os) throw Error(fmt::format("cannot write '{}'", p.string()));
    return os;
}

void write_manifest(const fs::path& dir, const ScenarioConfig& cfg, const std::string& command, const json& extra) {
    json m;
    m["command"] = command;
    m["schema"] = kConfigSchema;
    m["config"] = json::parse(config_to_json(cfg));
    for (const auto& item : extra.items()) m[item.key()] = item.value();
    open_out(dir / "manifest.json") << m.dump(2) << "\n";
}

void write_reports(const fs::path& dir, const std::vector<IncrementReport>& reps) {
    auto os = open_out(dir / "reports.csv");
    os << "step,t,Q,dD,W,balance_residual,stability_margin,iters\n";
    for (std::size_t k = 0; k < reps.size(); ++k) {
        const auto& r = reps[k];
        os << fmt::format("{},{},{},{},{},{},{},{}\n", k, fmt_double(r.t), fmt_double(r.elastic_energy),
                          fmt_double(r.increment_dissipation), fmt_double(r.cumulative_work),
                          fmt_double(r.balance_residual), fmt_double(r.stability_margin), r.inner_iterations);
    }
}

void write_stress(const fs::path& dir, const CellTensorField& s) {
    auto os = open_out(dir / "stress.csv");
    os << "cell,s11,s22,s33,s12,s13,s23\n";
    for (std::size_t c = 0; c < s.size(); ++c)
        os << fmt::format("{},{},{},{},{},{},{}\n", c, fmt_double(s[c][0]), fmt_double(s[c][1]), fmt_double(s[c][2]),
                          fmt_double(s[c][3]), fmt_double(s[c][4]), fmt_double(s[c][5]));
}

void write_plot(const fs::path& dir) {
    open_out(dir / "plot.gp") << "set datafile separator ','\n"
                                 "set key autotitle columnhead\n"
                                 "set terminal pngcairo size 900,600\n"
                                 "set output 'energies.png'\n"
                                 "set xlabel 't'\n"
                                 "plot 'reports.csv' using 2:3 with linespoints title 'Q', \\\n"
                                 "     'reports.csv' using 2:5 with linespoints title 'W', \\\n"
                                 "     'states.csv' using 2:4 with linespoints title 'D'\n"
                                 "set output 'balance.png'\n"
                                 "plot 'reports.csv' using 2:6 with linespoints title 'balance residual', \\\n"
                                 "     'states.csv' using 2:7 with linespoints title 'balance identity residual'\n";
}

struct AuditRow {
    int step = 0;
    double t = 0.0;
    AdmissibilityReport rep;
    double margin = 0.0;
    double identity = 0.0;
    double slack = 0.0;
    bool ok = true;
};

void write_audit(const fs::path& dir, const std::vector<AuditRow>& rows, const char* name = "audit.csv") {
    auto os = open_out(dir / name);
    os << "step,t,div_residual,boundary_residual,yield_violation,sigma_i3_residual,membrane_residual,"
          "bending_residual,work_slack,stress_scale,stability_margin,identity_residual,status\n";
    for (const auto& r : rows)
        os << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.step, fmt_double(r.t),
                          fmt_double(r.rep.div_residual), fmt_double(r.rep.boundary_residual),
                          fmt_double(r.rep.yield_violation), fmt_double(r.rep.sigma_i3_residual),
                          fmt_double(r.rep.moment_residuals[0]), fmt_double(r.rep.moment_residuals[1]),
                          fmt_double(r.slack), fmt_double(r.rep.scale), fmt_double(r.margin), fmt_double(r.identity),
                          r.ok ? "pass" : "fail");
}

// ---- runs -------------------------------------------------------------------------------------

struct HRun {
    double h = 0.0;
    std::unique_ptr<HProblem> problem;
    EvolutionH evo;
    std::vector<AuditRow> audit;
    bool audit_ok = true;
    double wall_ms = 0.0;
};

std::unique_ptr<HProblem> make_h_problem(const ScenarioConfig& cfg, double h) {
    return std::make_unique<HProblem>(cfg.mesh_for(h), cfg.materials, cfg.phase_map(), cfg.eps(h), cfg.linear);
}

std::unique_ptr<HomProblem> make_hom_problem(const ScenarioConfig& cfg) {
    return std::make_unique<HomProblem>(cfg.macro_grid(), cfg.mesh.n3, cfg.phase_map(), cfg.materials, cfg.gamma);
}

void check_initial_stability(const ScenarioConfig& cfg, double margin, double scale) {
    if (cfg.solver.stability_samples > 0 && margin < -cfg.solver.stability_tol * std::max(scale, 1e-300))
        throw ConfigError(fmt::format("initial elastic state is not stable (margin {:.3e}); lower the load at t = 0",
                                      margin));
}

HRun run_h(const ScenarioConfig& cfg, double h) {
    HRun run;
    run.h = h;
    const auto t0 = std::chrono::steady_clock::now();
    run.problem = make_h_problem(cfg, h);
    run.evo = run_evolution_h(*run.problem, cfg.datum(), cfg.n_steps, cfg.solver);
    run.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    const double escale = run.evo.energy_scale;
    check_initial_stability(cfg, run.evo.reports[0].stability_margin, escale);
    for (std::size_t k = 0; k < run.evo.states.size(); ++k) {
        const auto& s = run.evo.states[k];
        const auto& r = run.evo.reports[k];
        AuditRow row;
        row.step = static_cast<int>(k);
        row.t = s.t;
        row.rep = check_Kh(*run.problem, run.problem->stress(s.e_scaled));
        row.margin = r.stability_margin;
        row.identity = r.balance_residual - r.cumulative_defect;
        row.ok = row.rep.admissible(cfg.audit_tol) &&
                 std::abs(row.identity) <= cfg.solver.balance_tol * escale &&
                 (cfg.solver.stability_samples == 0 || row.margin >= -cfg.solver.stability_tol * escale);
        run.audit_ok = run.audit_ok && row.ok;
        run.audit.push_back(row);
    }
    return run;
}

void write_h_outputs(const fs::path& dir, const ScenarioConfig& cfg, const HRun& run, const std::string& command) {
    fs::create_directories(dir);
    json extra;
    extra["h"] = run.h;
    extra["eps"] = cfg.eps(run.h);
    const PlateMesh& mesh = run.problem->mesh();
    extra["resolution"] = {mesh.n1(), mesh.n2(), mesh.n3()};
    extra["energy_scale"] = run.evo.energy_scale;
    write_manifest(dir, cfg, command, extra);
    write_reports(dir, run.evo.reports);
    auto os = open_out(dir / "states.csv");
    os << "step,t,Q,D,W,cumulative_defect,balance_identity_residual,constraint_residual,max_q,max_u\n";
    for (std::size_t k = 0; k < run.evo.states.size(); ++k) {
        const auto& s = run.evo.states[k];
        const auto& r = run.evo.reports[k];
        double mq = 0.0, mu = 0.0;
        for (const auto& q : s.q) mq = std::max(mq, norm(q));
        for (const auto& u : s.u) mu = std::max(mu, norm(u));
        os << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", k, fmt_double(s.t), fmt_double(r.elastic_energy),
                          fmt_double(s.accumulated_dissipation), fmt_double(r.cumulative_work),
                          fmt_double(r.cumulative_defect), fmt_double(r.balance_residual - r.cumulative_defect),
                          fmt_double(constraint_residual(*run.problem, s)), fmt_double(mq), fmt_double(mu));
    }
    write_stress(dir, run.problem->stress(run.evo.states.back().e_scaled));
    write_audit(dir, run.audit);
    write_plot(dir);
}

struct HomRun {
    std::unique_ptr<HomProblem> problem;
    EvolutionHom evo;
    std::vector<AuditRow> audit;
    bool audit_ok = true;
    double wall_ms = 0.0;
};

HomRun run_hom(const ScenarioConfig& cfg) {
    HomRun run;
    const auto t0 = std::chrono::steady_clock::now();
    run.problem = make_hom_problem(cfg);
    const BoundaryDatum bd = cfg.datum();
    run.evo = run_evolution_hom(*run.problem, bd, cfg.n_steps, cfg.solver);
    run.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    const double escale = run.evo.energy_scale;
    check_initial_stability(cfg, run.evo.reports[0].stability_margin, escale);
    const HomProblem& P = *run.problem;
    for (std::size_t k = 0; k < run.evo.states.size(); ++k) {
        const auto& s = run.evo.states[k];
        const auto& r = run.evo.reports[k];
        AuditRow row;
        row.step = static_cast<int>(k);
        row.t = s.t;
        const CellTensorField sigma = P.stress(s.E);
        row.rep = check_Khom(P, sigma);
        row.margin = r.stability_margin;
        row.identity = r.balance_residual - r.cumulative_defect;
        bool slack_ok = true;
        if (k > 0) {
            const auto& sp = run.evo.states[k - 1];
            CellTensorField dP(s.P.size()), dE(s.E.size());
            for (std::size_t i = 0; i < dP.size(); ++i) {
                dP[i] = make_traceless(s.P[i] - sp.P[i]);
                dE[i] = s.E[i] - sp.E[i];
            }
            std::vector<std::array<double, 2>> ub0, ub1;
            std::vector<double> w0, w1;
            P.datum_macro(bd, sp.t, ub0, w0);
            P.datum_macro(bd, s.t, ub1, w1);
            for (std::size_t i = 0; i < ub1.size(); ++i) ub1[i] = {ub1[i][0] - ub0[i][0], ub1[i][1] - ub0[i][1]};
            for (std::size_t i = 0; i < w1.size(); ++i) w1[i] -= w0[i];
            try {
                row.slack = max_plastic_work_check(P, sigma, dP, dE, ub1, w1, cfg.audit_tol);
                slack_ok = row.slack >= -cfg.work_tol * escale;
            } catch (const PreconditionError& e) {
                spdlog::warn("step {}: {}", k, e.what());
                row.slack = std::nan("");
                slack_ok = false;
            }
        }
        row.ok = slack_ok && row.rep.admissible(cfg.audit_tol) &&
                 std::abs(row.identity) <= cfg.solver.balance_tol * escale &&
                 (cfg.solver.stability_samples == 0 || row.margin >= -cfg.solver.stability_tol * escale);
        run.audit_ok = run.audit_ok && row.ok;
        run.audit.push_back(row);
    }
    return run;
}

void write_hom_outputs(const fs::path& dir, const ScenarioConfig& cfg, const HomRun& run, const std::string& command) {
    fs::create_directories(dir);
    json extra;
    extra["energy_scale"] = run.evo.energy_scale;
    extra["plate_matrix"] = json::array();
    for (int a = 0; a < 6; ++a) {
        std::vector<double> row;
        for (int b = 0; b < 6; ++b) row.push_back(run.problem->plate_matrix()(a, b));
        extra["plate_matrix"].push_back(row);
    }
    write_manifest(dir, cfg, command, extra);
    write_reports(dir, run.evo.reports);
    auto os = open_out(dir / "states.csv");
    os << "step,t,Q,D,W,cumulative_defect,balance_identity_residual,compatibility_residual,max_P,max_ubar\n";
    for (std::size_t k = 0; k < run.evo.states.size(); ++k) {
        const auto& s = run.evo.states[k];
        const auto& r = run.evo.reports[k];
        double mp = 0.0, mu = 0.0;
        for (const auto& p : s.P) mp = std::max(mp, norm(p));
        for (const auto& u : s.ubar) mu = std::max({mu, std::abs(u[0]), std::abs(u[1])});
        os << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", k, fmt_double(s.t), fmt_double(r.elastic_energy),
                          fmt_double(s.accumulated_dissipation), fmt_double(r.cumulative_work),
                          fmt_double(r.cumulative_defect), fmt_double(r.balance_residual - r.cumulative_defect),
                          fmt_double(run.problem->compatibility_residual(s)), fmt_double(mp), fmt_double(mu));
    }
    write_stress(dir, run.problem->stress(run.evo.states.back().E));
    write_audit(dir, run.audit);
    write_plot(dir);
}

// ---- command plumbing -------------------------------------------------------------------------

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        spdlog::error("configuration error: {}", e.what());
        return exit_code::config;
    } catch (const InvalidParameter& e) {
        spdlog::error("invalid parameter: {}", e.what());
        return exit_code::config;
    } catch (const UnsupportedGrid& e) {
        spdlog::error("unsupported grid: {}", e.what());
        return exit_code::config;
    } catch (const json::exception& e) {
        spdlog::error("configuration error: {}", e.what());
        return exit_code::config;
    } catch (const ConvergenceError& e) {
        spdlog::error("solver did not converge: {} (last residual {:.3e})", e.what(), e.last_residual());
        return exit_code::convergence;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return exit_code::other;
    }
}

tbb::global_control thread_limit(const RunOptions& opt) {
    return tbb::global_control(tbb::global_control::max_allowed_parallelism,
                               static_cast<std::size_t>(std::max(1, opt.jobs)));
}

ScenarioConfig prepare(const std::string& config_path, const RunOptions& opt, fs::path* out) {
    ScenarioConfig cfg = load_config(config_path);
    if (opt.seed) cfg.solver.seed = *opt.seed;
    *out = opt.out_dir.empty() ? fs::path(cfg.output) : fs::path(opt.out_dir);
    fs::create_directories(*out);
    return cfg;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

CellTensorField read_stress(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError(fmt::format("missing stress file '{}'", p.string()));
    std::string line;
    std::getline(in, line);
    CellTensorField s;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != 7) throw ConfigError(fmt::format("malformed stress row '{}'", line));
        Sym3 v;
        for (int i = 0; i < 6; ++i) v[i] = std::stod(cells[i + 1]);
        s.push_back(v);
    }
    return s;
}

} // namespace

// ---- configuration ----------------------------------------------------------------------------

PlateMesh ScenarioConfig::mesh_for(double h) const {
    int n1 = mesh.n1, n2 = mesh.n2;
    if (mesh.by_period) {
        int p1 = 0, p2 = 0;
        const double e = eps(h);
        if (!is_integer_ratio(mesh.L1, e, &p1) || !is_integer_ratio(mesh.L2, e, &p2))
            throw ConfigError(fmt::format("omega = {} x {} is not an integer number of periods eps = {}", mesh.L1,
                                          mesh.L2, e));
        n1 = p1 * mesh.cpp1;
        n2 = p2 * mesh.cpp2;
    }
    return PlateMesh(mesh.L1, mesh.L2, n1, n2, mesh.n3, h);
}

PhaseMap ScenarioConfig::phase_map() const {
    if (!micro.raster_file.empty()) return read_raster(micro.raster_file);
    return build_phase_map(micro.generator, micro.n_y);
}

BoundaryDatum ScenarioConfig::datum() const {
    BoundaryDatum bd;
    Quadratic2 q1, q2, q3;
    const double A = load.amplitude;
    if (load.preset == "stretch") {
        q1.c[1] = A;
    } else if (load.preset == "shear") {
        q1.c[2] = A;
    } else if (load.preset == "bend") {
        q3.c[3] = 0.5 * A;
    } else if (load.preset == "custom") {
        q1 = load.w1;
        q2 = load.w2;
        q3 = load.w3;
    } else if (load.preset != "zero") {
        throw ConfigError(fmt::format("unknown load preset '{}'", load.preset));
    }
    bd.w1 = q1;
    bd.w2 = q2;
    bd.w3 = q3;
    bd.fd_step = load.fd_step;
    if (load.profile_given) {
        bd.profile = load.profile;
    } else {
        bd.profile.t = {0.0, T};
        bd.profile.v = {0.0, 1.0};
    }
    return bd;
}

MacroGrid ScenarioConfig::macro_grid() const { return {mesh.L1, mesh.L2, macro1, macro2}; }

void ScenarioConfig::validate() const {
    if (!(mesh.L1 > 0.0) || !(mesh.L2 > 0.0)) throw ConfigError("mesh.L must be positive");
    if (mesh.n3 < 2) throw ConfigError(fmt::format("mesh.n3 must be >= 2, got {}", mesh.n3));
    if (mesh.by_period ? (mesh.cpp1 < 1 || mesh.cpp2 < 1) : (mesh.n1 < 1 || mesh.n2 < 1))
        throw ConfigError("mesh resolution must be positive");
    if (!(gamma > 0.0)) throw ConfigError(fmt::format("gamma must be positive, got {}", gamma));
    if (h.empty()) throw ConfigError("h list is empty");
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (!(h[i] > 0.0)) throw ConfigError(fmt::format("h must be positive, got {}", h[i]));
        if (i > 0 && !(h[i] < h[i - 1])) throw ConfigError("h list must be strictly decreasing");
        if (!is_integer_ratio(mesh.L1, eps(h[i]), nullptr) || !is_integer_ratio(mesh.L2, eps(h[i]), nullptr))
            throw ConfigError(fmt::format("h = {}: eps = h / gamma = {} does not tile omega by whole periods", h[i],
                                          eps(h[i])));
    }
    if (!(T > 0.0)) throw ConfigError("time.T must be positive");
    if (n_steps < 1) throw ConfigError("time.n_steps must be >= 1");
    if (load.profile_given) {
        load.profile.validate();
        if (std::abs(load.profile.T() - T) > 1e-12 * T) throw ConfigError("load.profile must end at time.T");
    }
    if (macro1 < 1 || macro2 < 1) throw ConfigError("hom.macro must be positive");
    if (!(audit_tol > 0.0) || !(work_tol > 0.0)) throw ConfigError("audit tolerances must be positive");
    if (solver.max_outer < 1) throw ConfigError("solver.max_outer must be >= 1");
    if (solver.stability_samples < 0) throw ConfigError("solver.stability_samples must be >= 0");
    const PhaseMap pm = phase_map();
    if (pm.n_phases() > materials.size())
        throw ConfigError(fmt::format("microstructure uses {} phases, materials define {}", pm.n_phases(),
                                      materials.size()));
    (void)datum();
}

ScenarioConfig parse_config(const std::string& text) {
    ScenarioConfig cfg;
    try {
        const json j = json::parse(text);
        check_keys(j, {"schema", "mesh", "microstructure", "materials", "gamma", "h", "time", "load", "solver", "hom",
                       "seed", "output"},
                   "config");
        if (!j.contains("schema") || j.at("schema") != kConfigSchema)
            throw ConfigError(fmt::format("config must declare \"schema\": \"{}\"", kConfigSchema));

        if (j.contains("mesh")) {
            const json& m = j.at("mesh");
            check_keys(m, {"L", "n", "cells_per_period", "n3"}, "mesh");
            if (m.contains("L")) {
                const auto L = fixed_array<2>(m.at("L"), "mesh.L");
                cfg.mesh.L1 = L[0];
                cfg.mesh.L2 = L[1];
            }
            if (m.contains("n") && m.contains("cells_per_period"))
                throw ConfigError("mesh takes either 'n' or 'cells_per_period', not both");
            if (m.contains("n")) {
                const auto n = m.at("n").get<std::vector<int>>();
                if (n.size() != 2) throw ConfigError("mesh.n needs two integers");
                cfg.mesh.n1 = n[0];
                cfg.mesh.n2 = n[1];
            }
            if (m.contains("cells_per_period")) {
                const auto n = m.at("cells_per_period").get<std::vector<int>>();
                if (n.size() != 2) throw ConfigError("mesh.cells_per_period needs two integers");
                cfg.mesh.by_period = true;
                cfg.mesh.cpp1 = n[0];
                cfg.mesh.cpp2 = n[1];
            }
            cfg.mesh.n3 = value_or(m, "n3", cfg.mesh.n3);
        }

        if (j.contains("microstructure")) {
            const json& m = j.at("microstructure");
            check_keys(m, {"kind", "n_y", "fractions", "offset", "center", "radius", "ids", "file"}, "microstructure");
            cfg.micro.n_y = value_or(m, "n_y", cfg.micro.n_y);
            const std::string kind = value_or<std::string>(m, "kind", "laminate");
            if (kind == "laminate") {
                cfg.micro.generator = PhaseGenerator::laminate(
                    value_or<std::vector<double>>(m, "fractions", {0.5, 0.5}), value_or(m, "offset", 0.0));
            } else if (kind == "checkerboard") {
                cfg.micro.generator = PhaseGenerator::checkerboard();
            } else if (kind == "inclusion") {
                const auto c = m.contains("center") ? fixed_array<2>(m.at("center"), "microstructure.center")
                                                    : std::array<double, 2>{0.5, 0.5};
                cfg.micro.generator = PhaseGenerator::inclusion(c, value_or(m, "radius", 0.25));
            } else if (kind == "raster") {
                if (m.contains("file")) {
                    cfg.micro.raster_file = m.at("file").get<std::string>();
                    cfg.micro.generator = PhaseGenerator::from_raster({});
                } else if (m.contains("ids")) {
                    cfg.micro.generator = PhaseGenerator::from_raster(m.at("ids").get<std::vector<int>>());
                } else {
                    throw ConfigError("raster microstructure needs 'ids' or 'file'");
                }
            } else {
                throw ConfigError(fmt::format("unknown microstructure kind '{}'", kind));
            }
        }

        if (!j.contains("materials")) throw ConfigError("config needs a 'materials' section");
        {
            const json& m = j.at("materials");
            check_keys(m, {"phases", "r_K", "R_K"}, "materials");
            if (!m.contains("phases") || !m.at("phases").is_array())
                throw ConfigError("materials.phases must be an array");
            for (const auto& p : m.at("phases")) {
                check_keys(p, {"two_mu", "c_dev", "k", "r_y"}, "materials.phases[]");
                if (!p.contains("k") || !p.contains("r_y")) throw ConfigError("every phase needs 'k' and 'r_y'");
                if (p.contains("c_dev") == p.contains("two_mu"))
                    throw ConfigError("every phase needs exactly one of 'two_mu' or 'c_dev'");
                if (p.contains("two_mu")) {
                    cfg.materials.phases.push_back(PhaseMaterial::make_isotropic(
                        p.at("two_mu").get<double>(), p.at("k").get<double>(), p.at("r_y").get<double>()));
                } else {
                    const auto rows = p.at("c_dev").get<std::vector<std::vector<double>>>();
                    if (rows.size() != 5) throw ConfigError("c_dev must be 5 x 5");
                    Mat5 C;
                    for (int a = 0; a < 5; ++a) {
                        if (rows[a].size() != 5) throw ConfigError("c_dev must be 5 x 5");
                        for (int b = 0; b < 5; ++b) C(a, b) = rows[a][b];
                    }
                    cfg.materials.phases.push_back(
                        PhaseMaterial::make_anisotropic(C, p.at("k").get<double>(), p.at("r_y").get<double>()));
                }
            }
            cfg.materials.r_K = value_or(m, "r_K", 0.0);
            cfg.materials.R_K = value_or(m, "R_K", 0.0);
            cfg.materials.validate();
        }

        cfg.gamma = value_or(j, "gamma", cfg.gamma);
        if (j.contains("h")) {
            cfg.h = j.at("h").is_array() ? j.at("h").get<std::vector<double>>()
                                         : std::vector<double>{j.at("h").get<double>()};
        }
        if (j.contains("time")) {
            const json& t = j.at("time");
            check_keys(t, {"T", "n_steps"}, "time");
            cfg.T = value_or(t, "T", cfg.T);
            cfg.n_steps = value_or(t, "n_steps", cfg.n_steps);
        }
        if (j.contains("load")) {
            const json& l = j.at("load");
            check_keys(l, {"preset", "amplitude", "w1", "w2", "w3", "profile", "fd_step"}, "load");
            cfg.load.preset = value_or<std::string>(l, "preset", cfg.load.preset);
            cfg.load.amplitude = value_or(l, "amplitude", cfg.load.amplitude);
            cfg.load.fd_step = value_or(l, "fd_step", cfg.load.fd_step);
            if (l.contains("w1")) cfg.load.w1.c = fixed_array<6>(l.at("w1"), "load.w1");
            if (l.contains("w2")) cfg.load.w2.c = fixed_array<6>(l.at("w2"), "load.w2");
            if (l.contains("w3")) cfg.load.w3.c = fixed_array<6>(l.at("w3"), "load.w3");
            if (cfg.load.preset != "custom" && (l.contains("w1") || l.contains("w2") || l.contains("w3")))
                throw ConfigError("load.w1/w2/w3 are only read by the custom preset");
            if (l.contains("profile")) {
                const json& p = l.at("profile");
                check_keys(p, {"t", "v"}, "load.profile");
                cfg.load.profile.t = p.at("t").get<std::vector<double>>();
                cfg.load.profile.v = p.at("v").get<std::vector<double>>();
                cfg.load.profile_given = true;
            }
        }
        if (j.contains("solver")) {
            const json& s = j.at("solver");
            check_keys(s, {"energy_tol", "fixed_point_tol", "max_outer", "stability_samples", "stability_tol", "balance_tol", "audit_tol",
                           "work_tol", "linear_solver", "cg_tol"},
                       "solver");
            cfg.solver.energy_tol = value_or(s, "energy_tol", cfg.solver.energy_tol);
            cfg.solver.fixed_point_tol = value_or(s, "fixed_point_tol", cfg.solver.fixed_point_tol);
            cfg.solver.max_outer = value_or(s, "max_outer", cfg.solver.max_outer);
            cfg.solver.stability_samples = value_or(s, "stability_samples", cfg.solver.stability_samples);
            cfg.solver.stability_tol = value_or(s, "stability_tol", cfg.solver.stability_tol);
            cfg.solver.balance_tol = value_or(s, "balance_tol", cfg.solver.balance_tol);
            cfg.audit_tol = value_or(s, "audit_tol", cfg.audit_tol);
            cfg.work_tol = value_or(s, "work_tol", cfg.work_tol);
            cfg.linear.cg_tol = value_or(s, "cg_tol", cfg.linear.cg_tol);
            const std::string ls = value_or<std::string>(s, "linear_solver", "cholesky");
            if (ls == "cholesky")
                cfg.linear.kind = LinearSolverKind::Cholesky;
            else if (ls == "cg")
                cfg.linear.kind = LinearSolverKind::CG;
            else
                throw ConfigError(fmt::format("unknown linear solver '{}'", ls));
        }
        if (j.contains("hom")) {
            const json& hm = j.at("hom");
            check_keys(hm, {"macro"}, "hom");
            if (hm.contains("macro")) {
                const auto m = hm.at("macro").get<std::vector<int>>();
                if (m.size() != 2) throw ConfigError("hom.macro needs two integers");
                cfg.macro1 = m[0];
                cfg.macro2 = m[1];
            }
        }
        cfg.solver.seed = value_or<std::uint64_t>(j, "seed", cfg.solver.seed);
        cfg.output = value_or<std::string>(j, "output", cfg.output);
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("malformed config: {}", e.what()));
    }
    cfg.validate();
    return cfg;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path));
    std::stringstream ss;
    ss << in.rdbuf();
    ScenarioConfig cfg = parse_config(ss.str());
    if (!cfg.micro.raster_file.empty() && fs::path(cfg.micro.raster_file).is_relative()) {
        cfg.micro.raster_file = (fs::path(path).parent_path() / cfg.micro.raster_file).string();
        cfg.validate();
    }
    return cfg;
}

std::string config_to_json(const ScenarioConfig& cfg) {
    json j;
    j["schema"] = kConfigSchema;
    json mesh;
    mesh["L"] = {cfg.mesh.L1, cfg.mesh.L2};
    if (cfg.mesh.by_period)
        mesh["cells_per_period"] = {cfg.mesh.cpp1, cfg.mesh.cpp2};
    else
        mesh["n"] = {cfg.mesh.n1, cfg.mesh.n2};
    mesh["n3"] = cfg.mesh.n3;
    j["mesh"] = mesh;

    json micro;
    const auto& g = cfg.micro.generator;
    micro["kind"] = kind_name(g.kind);
    micro["n_y"] = cfg.micro.n_y;
    switch (g.kind) {
    case GeneratorKind::Laminate:
        micro["fractions"] = g.fractions;
        micro["offset"] = g.offset;
        break;
    case GeneratorKind::Inclusion:
        micro["center"] = {g.center[0], g.center[1]};
        micro["radius"] = g.radius;
        break;
    case GeneratorKind::Raster:
        if (!cfg.micro.raster_file.empty())
            micro["file"] = cfg.micro.raster_file;
        else
            micro["ids"] = g.raster;
        break;
    case GeneratorKind::Checkerboard: break;
    }
    j["microstructure"] = micro;

    json mats;
    mats["phases"] = json::array();
    for (const auto& p : cfg.materials.phases) {
        json pj;
        if (p.isotropic) {
            pj["two_mu"] = p.two_mu;
        } else {
            std::vector<std::vector<double>> rows(5, std::vector<double>(5));
            for (int a = 0; a < 5; ++a)
                for (int b = 0; b < 5; ++b) rows[a][b] = p.c_dev(a, b);
            pj["c_dev"] = rows;
        }
        pj["k"] = p.k;
        pj["r_y"] = p.r_y;
        mats["phases"].push_back(pj);
    }
    mats["r_K"] = cfg.materials.r_K;
    mats["R_K"] = cfg.materials.R_K;
    j["materials"] = mats;

    j["gamma"] = cfg.gamma;
    j["h"] = cfg.h;
    j["time"] = {{"T", cfg.T}, {"n_steps", cfg.n_steps}};
    json load;
    load["preset"] = cfg.load.preset;
    load["amplitude"] = cfg.load.amplitude;
    load["fd_step"] = cfg.load.fd_step;
    if (cfg.load.preset == "custom") {
        load["w1"] = cfg.load.w1.c;
        load["w2"] = cfg.load.w2.c;
        load["w3"] = cfg.load.w3.c;
    }
    const BoundaryDatum bd = cfg.datum();
    load["profile"] = {{"t", bd.profile.t}, {"v", bd.profile.v}};
    j["load"] = load;
    j["solver"] = {{"energy_tol", cfg.solver.energy_tol},
                   {"fixed_point_tol", cfg.solver.fixed_point_tol},
                   {"max_outer", cfg.solver.max_outer},
                   {"stability_samples", cfg.solver.stability_samples},
                   {"stability_tol", cfg.solver.stability_tol},
                   {"balance_tol", cfg.solver.balance_tol},
                   {"audit_tol", cfg.audit_tol},
                   {"work_tol", cfg.work_tol},
                   {"linear_solver", cfg.linear.kind == LinearSolverKind::CG ? "cg" : "cholesky"},
                   {"cg_tol", cfg.linear.cg_tol}};
    j["hom"] = {{"macro", {cfg.macro1, cfg.macro2}}};
    j["seed"] = cfg.solver.seed;
    j["output"] = cfg.output;
    return j.dump(2);
}

// ---- commands ---------------------------------------------------------------------------------

int cmd_simulate_h(const std::string& config_path, const RunOptions& opt) {
    return guarded([&] {
        const auto limit = thread_limit(opt);
        fs::path out;
        const ScenarioConfig cfg = prepare(config_path, opt, &out);
        if (cfg.h.size() > 1) spdlog::info("simulate-h uses the first entry h = {} of the h list", cfg.h.front());
        const HRun run = run_h(cfg, cfg.h.front());
        write_h_outputs(out, cfg, run, "simulate-h");
        spdlog::info("simulate-h: {} steps, final Q = {:.6e}, D = {:.6e}, audit {}", cfg.n_steps,
                     run.evo.reports.back().elastic_energy, run.evo.states.back().accumulated_dissipation,
                     run.audit_ok ? "passed" : "FAILED");
        return run.audit_ok ? exit_code::ok : exit_code::audit;
    });
}

int cmd_simulate_hom(const std::string& config_path, const RunOptions& opt) {
    return guarded([&] {
        const auto limit = thread_limit(opt);
        fs::path out;
        const ScenarioConfig cfg = prepare(config_path, opt, &out);
        const HomRun run = run_hom(cfg);
        write_hom_outputs(out, cfg, run, "simulate-hom");
        spdlog::info("simulate-hom: {} steps, final Q = {:.6e}, D = {:.6e}, audit {}", cfg.n_steps,
                     run.evo.reports.back().elastic_energy, run.evo.states.back().accumulated_dissipation,
                     run.audit_ok ? "passed" : "FAILED");
        return run.audit_ok ? exit_code::ok : exit_code::audit;
    });
}

int cmd_converge(const std::string& config_path, const RunOptions& opt) {
    return guarded([&] {
        const auto limit = thread_limit(opt);
        fs::path out;
        const ScenarioConfig cfg = prepare(config_path, opt, &out);
        if (cfg.h.size() < 3)
            throw ConfigError(fmt::format("converge needs at least three h values, got {}", cfg.h.size()));
        for (double h : cfg.h) {
            const PlateMesh mesh = cfg.mesh_for(h);
            if (!is_integer_ratio(cfg.eps(h), mesh.dx(), nullptr) || !is_integer_ratio(cfg.eps(h), mesh.dy(), nullptr))
                throw ConfigError(fmt::format("h = {}: mesh cells do not tile the period eps = {}", h, cfg.eps(h)));
        }

        const HomRun hom = run_hom(cfg);
        write_hom_outputs(out / "hom", cfg, hom, "converge/hom");
        const double Qhom = hom.evo.reports.back().elastic_energy;
        const double Dhom = hom.evo.states.back().accumulated_dissipation;

        std::vector<HRun> runs(cfg.h.size());
        auto one = [&](std::size_t i) { runs[i] = run_h(cfg, cfg.h[i]); };
        if (opt.jobs > 1) {
            tbb::parallel_for(std::size_t{0}, runs.size(), one);
        } else {
            for (std::size_t i = 0; i < runs.size(); ++i) one(i);
        }

        auto os = open_out(out / "convergence.csv");
        os << "h,Q_h,D_h,energy_gap,strain_gap,wall_ms\n";
        std::vector<double> egap, sgap;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const HRun& r = runs[i];
            write_h_outputs(out / fmt::format("h_{}", i), cfg, r, "converge/h");
            const double Q = r.evo.reports.back().elastic_energy;
            const double D = r.evo.states.back().accumulated_dissipation;
            const UnfoldedField uh = unfold(r.evo.states.back().e_scaled, r.problem->mesh(), cfg.eps(r.h), cfg.micro.n_y);
            const UnfoldedField ur = sample_two_scale(*hom.problem, hom.evo.states.back().E, uh);
            egap.push_back(std::abs(Q - Qhom));
            sgap.push_back(two_scale_gap(uh, ur));
            os << fmt::format("{},{},{},{},{},{:.1f}\n", fmt_double(r.h), fmt_double(Q), fmt_double(D),
                              fmt_double(egap.back()), fmt_double(sgap.back()), r.wall_ms);
        }
        os << fmt::format("hom,{},{},0,0,{:.1f}\n", fmt_double(Qhom), fmt_double(Dhom), hom.wall_ms);

        bool strain_monotone = true;
        for (std::size_t i = 1; i < sgap.size(); ++i) strain_monotone = strain_monotone && sgap[i] <= sgap[i - 1];
        const double ratio = egap.front() > 0.0 ? egap.back() / egap.front() : (egap.back() > 0.0 ? INFINITY : 0.0);
        json extra;
        extra["energy_gap_ratio"] = ratio;
        extra["strain_gap_non_increasing"] = strain_monotone;
        write_manifest(out, cfg, "converge", extra);
        spdlog::info("converge: energy gap ratio (smallest / largest h) = {:.4f}, strain gap non-increasing: {}", ratio,
                     strain_monotone);
        if (!(ratio <= 1.0)) {
            spdlog::error("energy gap grows from h = {} to h = {}", cfg.h.front(), cfg.h.back());
            return exit_code::audit;
        }
        return exit_code::ok;
    });
}

int cmd_audit(const std::string& run_dir) {
    return guarded([&] {
        const fs::path dir(run_dir);
        const fs::path mpath = dir / "manifest.json";
        if (!fs::exists(mpath)) throw ConfigError(fmt::format("'{}' holds no manifest.json", run_dir));
        std::ifstream in(mpath);
        const json m = json::parse(in);
        const ScenarioConfig cfg = parse_config(m.at("config").dump());
        const std::string command = m.at("command").get<std::string>();
        const CellTensorField sigma = read_stress(dir / "stress.csv");

        AuditRow row;
        row.step = -1;
        if (command == "simulate-h" || command == "converge/h") {
            const double h = m.at("h").get<double>();
            const auto problem = make_h_problem(cfg, h);
            if (sigma.size() != static_cast<std::size_t>(problem->mesh().num_cells()))
                throw ConfigError("stress file does not match the mesh of the run");
            row.rep = check_Kh(*problem, sigma);
        } else if (command == "simulate-hom" || command == "converge/hom") {
            const auto problem = make_hom_problem(cfg);
            if (sigma.size() != static_cast<std::size_t>(problem->num_total_cells()))
                throw ConfigError("stress file does not match the two-scale grid of the run");
            row.rep = check_Khom(*problem, sigma);
        } else {
            throw ConfigError(fmt::format("cannot audit a '{}' directory; audit its h_* or hom subdirectories",
                                          command));
        }
        row.ok = row.rep.admissible(cfg.audit_tol);

        // energy-balance identity recorded by the run
        const double escale = m.value("energy_scale", 0.0);
        std::ifstream st(dir / "states.csv");
        if (!st) throw ConfigError(fmt::format("'{}' holds no states.csv", run_dir));
        std::string line;
        std::getline(st, line);
        while (std::getline(st, line)) {
            const auto cells = split_csv(line);
            if (cells.size() < 7) throw ConfigError(fmt::format("malformed states row '{}'", line));
            row.identity = std::max(row.identity, std::abs(std::stod(cells[6])));
        }
        row.ok = row.ok && row.identity <= cfg.solver.balance_tol * escale;
        write_audit(dir, {row}, "audit_check.csv");
        spdlog::info("audit {}: worst relative stress residual {:.3e}, balance identity {:.3e} -> {}", run_dir,
                     row.rep.worst_relative(), row.identity, row.ok ? "pass" : "fail");
        return row.ok ? exit_code::ok : exit_code::audit;
    });
}

} // namespace plasthin
