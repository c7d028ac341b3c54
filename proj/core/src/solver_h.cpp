#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/core.h>
#include <spdlog/spdlog.h>
#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include "alternating.hpp"
#include "plasthin/errors.hpp"
#include "plasthin/quasistatic_solver.hpp"
#include "plasthin/tensor_kinematics.hpp"

namespace plasthin {

namespace {

CellTensorField prox_all(const HProblem& problem, const CellTensorField& etot, const CellTensorField& q_prev) {
    CellTensorField out(etot.size());
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, etot.size()), [&](const tbb::blocked_range<std::size_t>& r) {
        for (std::size_t c = r.begin(); c != r.end(); ++c)
            out[c] = plastic_update(problem.cell_material(static_cast<int>(c)), etot[c], q_prev[c]);
    });
    return out;
}

double objective(const HProblem& problem, const CellTensorField& etot, const CellTensorField& q,
                 const CellTensorField& q_prev) {
    double s = 0.0;
    for (std::size_t c = 0; c < q.size(); ++c) {
        const auto& m = problem.cell_material(static_cast<int>(c));
        s += quadratic_energy(m, etot[c] - q[c]) + dissipation(m, make_traceless(q[c] - q_prev[c]));
    }
    return s * problem.mesh().cell_volume();
}

CellTensorField difference(const CellTensorField& a, const CellTensorField& b, bool traceless) {
    CellTensorField d(a.size());
    for (std::size_t c = 0; c < a.size(); ++c) d[c] = traceless ? make_traceless(a[c] - b[c]) : a[c] - b[c];
    return d;
}

double pairing(const CellTensorField& a, const CellTensorField& b, double vol) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) s += ddot(a[c], b[c]);
    return s * vol;
}

Sym3 random_deviatoric(std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Sym3 s{nd(rng), nd(rng), 0.0, nd(rng), nd(rng), nd(rng)};
    return dev(s);
}

} // namespace

double constraint_residual(const HProblem& problem, const EvolutionState& s) {
    const CellTensorField etot = problem.strains(s.u);
    double r = 0.0;
    for (std::size_t c = 0; c < etot.size(); ++c) r = std::max(r, norm(etot[c] - s.e_scaled[c] - s.q[c]));
    return r;
}

EvolutionState initial_state_h(const HProblem& problem, const BoundaryDatum& bd) {
    EvolutionState s;
    s.t = 0.0;
    s.u = datum_field(bd, 0.0, problem.mesh());
    s.q.assign(problem.mesh().num_cells(), Sym3{});
    problem.solve_elastic(s.u, s.q);
    s.e_scaled = problem.strains(s.u);
    return s;
}

std::pair<EvolutionState, IncrementReport> incremental_step_h(const HProblem& problem, const EvolutionState& state,
                                                              const BoundaryDatum& bd, double t_next,
                                                              const SolverConfig& cfg) {
    if (!(t_next > state.t)) throw InvalidParameter(fmt::format("t_next = {} must exceed t = {}", t_next, state.t));
    const PlateMesh& mesh = problem.mesh();
    const double vol = mesh.cell_volume();

    EvolutionState s;
    s.t = t_next;
    s.u = state.u;
    const DisplacementField w_prev = datum_field(bd, state.t, mesh);
    const DisplacementField w_next = datum_field(bd, t_next, mesh);
    for (int n = 0; n < mesh.num_nodes(); ++n)
        if (mesh.is_dirichlet(n)) s.u[n] = w_next[n];

    CellTensorField etot;
    detail::AlternatingOps ops;
    ops.solve = [&](const CellTensorField& q) {
        problem.solve_elastic(s.u, q);
        etot = problem.strains(s.u);
    };
    ops.prox = [&] { return prox_all(problem, etot, state.q); };
    ops.objective = [&](const CellTensorField& q) { return objective(problem, etot, q, state.q); };
    auto [q, it] = detail::alternating_minimization(state.q, ops, cfg, t_next, "h-model");

    s.q = std::move(q);
    s.e_scaled = difference(etot, s.q, false);

    const CellTensorField dq = difference(s.q, state.q, true);
    const CellTensorField sig_prev = problem.stress(state.e_scaled);
    const CellTensorField sig_next = problem.stress(s.e_scaled);
    CellTensorField sig_mid(sig_prev.size());
    for (std::size_t c = 0; c < sig_mid.size(); ++c) sig_mid[c] = 0.5 * (sig_prev[c] + sig_next[c]);
    DisplacementField dw(w_next.size());
    for (std::size_t n = 0; n < dw.size(); ++n) dw[n] = w_next[n] - w_prev[n];

    IncrementReport rep;
    rep.t = t_next;
    rep.elastic_energy = problem.elastic_energy(s.e_scaled);
    rep.increment_dissipation = problem.dissipation_energy(dq);
    rep.external_work_increment = pairing(sig_mid, problem.strains(dw), vol);
    rep.time_defect = rep.increment_dissipation - pairing(sig_mid, dq, vol);
    rep.inner_iterations = it;
    s.accumulated_dissipation = state.accumulated_dissipation + rep.increment_dissipation;
    return {std::move(s), rep};
}

EvolutionH run_evolution_h(const HProblem& problem, const BoundaryDatum& bd, int n_steps, const SolverConfig& cfg) {
    if (n_steps < 1) throw InvalidParameter(fmt::format("n_steps must be >= 1, got {}", n_steps));
    bd.profile.validate();
    const double T = bd.profile.T();

    EvolutionH out;
    out.states.push_back(initial_state_h(problem, bd));
    IncrementReport r0;
    r0.elastic_energy = problem.elastic_energy(out.states[0].e_scaled);
    r0.inner_iterations = 1;
    out.reports.push_back(r0);

    for (int k = 1; k <= n_steps; ++k) {
        const double t = k == n_steps ? T : T * static_cast<double>(k) / n_steps;
        auto [s, rep] = incremental_step_h(problem, out.states.back(), bd, t, cfg);
        const IncrementReport& prev = out.reports.back();
        rep.cumulative_work = prev.cumulative_work + rep.external_work_increment;
        rep.cumulative_defect = prev.cumulative_defect + rep.time_defect;
        rep.balance_residual = rep.elastic_energy + s.accumulated_dissipation - r0.elastic_energy - rep.cumulative_work;
        out.states.push_back(std::move(s));
        out.reports.push_back(rep);
    }

    double scale = 0.0;
    for (const auto& r : out.reports) scale = std::max({scale, r.elastic_energy, std::abs(r.cumulative_work)});
    out.energy_scale = scale;

    if (cfg.stability_samples > 0) {
        StabilityOptions opt;
        opt.n_samples = cfg.stability_samples;
        for (std::size_t k = 0; k < out.states.size(); ++k) {
            opt.seed = cfg.seed + 7919 * k;
            out.reports[k].stability_margin = stability_audit(problem, out.states[k], opt);
        }
    }
    return out;
}

double stability_audit(const HProblem& problem, const EvolutionState& state, const StabilityOptions& opt) {
    const PlateMesh& mesh = problem.mesh();
    const int nc = mesh.num_cells();
    const int nn = mesh.num_nodes();
    const double vol = mesh.cell_volume();
    const CellTensorField sigma = problem.stress(state.e_scaled);

    // Q(e + d) + H(dq) - Q(e) = sigma : d + Q(d) + H(dq), d = Lambda_h E du - dq
    auto margin_of = [&](const DisplacementField& du, const CellTensorField& dq) {
        const CellTensorField edu = problem.strains(du);
        double m = 0.0;
        for (int c = 0; c < nc; ++c) {
            const auto& mat = problem.cell_material(c);
            const Sym3 d = edu[c] - dq[c];
            m += ddot(sigma[c], d) + quadratic_energy(mat, d) + dissipation(mat, dq[c]);
        }
        return m * vol;
    };

    double u_scale = 0.0, q_scale = 0.0;
    for (const auto& v : state.u) u_scale = std::max(u_scale, norm(v));
    for (int c = 0; c < nc; ++c) q_scale = std::max({q_scale, norm(state.q[c]), norm(state.e_scaled[c])});
    if (u_scale == 0.0) u_scale = 1.0;
    if (q_scale == 0.0) q_scale = 1.0;

    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> nd;
    std::uniform_int_distribution<int> pick_cell(0, nc - 1);
    double best = std::numeric_limits<double>::infinity();
    DisplacementField du(nn);
    CellTensorField dq(nc);
    const std::size_t n_amp = std::max<std::size_t>(1, opt.amplitudes.size());
    for (int s = 0; s < opt.n_samples; ++s) {
        const double amp = opt.amplitudes.empty() ? 1.0 : opt.amplitudes[static_cast<std::size_t>(s) % n_amp];
        std::fill(du.begin(), du.end(), Vec3{});
        std::fill(dq.begin(), dq.end(), Sym3{});
        const int mode = (s / static_cast<int>(n_amp)) % 3;
        if (mode == 0) {
            // global perturbation of both fields
            for (int n = 0; n < nn; ++n)
                if (!mesh.is_dirichlet(n)) du[n] = (amp * u_scale) * Vec3{nd(rng), nd(rng), nd(rng)};
            for (int c = 0; c < nc; ++c) dq[c] = (amp * q_scale) * random_deviatoric(rng);
        } else if (mode == 1) {
            // plastic strain only, one cell
            dq[pick_cell(rng)] = (amp * q_scale) * random_deviatoric(rng);
        } else {
            // one cell: plastic strain plus the displacement of its free nodes
            const int c = pick_cell(rng);
            dq[c] = (amp * q_scale) * random_deviatoric(rng);
            for (int n : mesh.cell_nodes(c))
                if (!mesh.is_dirichlet(n)) du[n] = (amp * u_scale) * Vec3{nd(rng), nd(rng), nd(rng)};
        }
        best = std::min(best, margin_of(du, dq));
    }

    // competitor from one more alternating sweep started at the state itself
    DisplacementField u1 = state.u;
    problem.solve_elastic(u1, state.q);
    const CellTensorField etot = problem.strains(u1);
    const CellTensorField q1 = prox_all(problem, etot, state.q);
    for (int n = 0; n < nn; ++n) du[n] = u1[n] - state.u[n];
    for (int c = 0; c < nc; ++c) dq[c] = make_traceless(q1[c] - state.q[c]);
    best = std::min(best, margin_of(du, dq));
    return best;
}

} // namespace plasthin
