#include <cmath>

#include "doctest.h"
#include "plasthin/duality_audit.hpp"
#include "plasthin/errors.hpp"
#include "plasthin/tensor_kinematics.hpp"

using namespace plasthin;
using doctest::Approx;

namespace {

MaterialLibrary two_phase() {
    MaterialLibrary lib;
    lib.phases = {PhaseMaterial::make_isotropic(2.0, 3.0, 0.01), PhaseMaterial::make_isotropic(4.0, 5.0, 0.02)};
    lib.validate();
    return lib;
}

PhaseMap laminate(int n_y) { return build_phase_map(PhaseGenerator::laminate({0.5, 0.5}), n_y); }

BoundaryDatum stretch(double amp) {
    BoundaryDatum bd;
    bd.w1 = [amp](double x1, double) { return amp * x1; };
    return bd;
}

BoundaryDatum bend(double amp) {
    BoundaryDatum bd;
    bd.w3 = [amp](double x1, double) { return 0.5 * amp * x1 * x1; };
    return bd;
}

SolverConfig quiet() {
    SolverConfig cfg;
    cfg.stability_samples = 0;
    return cfg;
}

} // namespace

TEST_SUITE("duality_audit") {

TEST_CASE("check_Kh on constant fields") {
    HProblem prob(PlateMesh(0.4, 0.4, 4, 4, 2, 0.1), two_phase(), laminate(8), 0.1);
    const int nc = prob.mesh().num_cells();
    const auto zero = check_Kh(prob, CellTensorField(nc));
    CHECK(zero.div_residual == 0.0);
    CHECK(zero.boundary_residual == 0.0);
    CHECK(zero.yield_violation < 0.0);
    CHECK(zero.admissible(1e-7));

    const double c = 0.3;
    const auto hyd = check_Kh(prob, CellTensorField(nc, c * Sym3::identity()));
    CHECK(hyd.div_residual < 1e-12 * c);
    CHECK(hyd.yield_violation < 0.0);
    CHECK(hyd.boundary_residual == Approx(c).epsilon(1e-12));
    CHECK_FALSE(hyd.admissible(1e-7));
    CHECK_THROWS_AS(check_Kh(prob, CellTensorField(3)), ShapeError);
}

TEST_CASE("converged h states are admissible") {
    HProblem prob(PlateMesh(0.4, 0.4, 4, 4, 2, 0.1), two_phase(), laminate(8), 0.1);
    for (double amp : {1e-4, 0.02}) {
        const EvolutionH ev = run_evolution_h(prob, stretch(amp), 4, quiet());
        for (const auto& s : ev.states) {
            const auto rep = check_Kh(prob, prob.stress(s.e_scaled));
            CHECK(rep.worst_relative() <= 1e-9);
            CHECK(rep.yield_violation <= 1e-8 * 0.01);
        }
    }
}

TEST_CASE("check_Khom on constant fields") {
    HomProblem prob(MacroGrid{0.4, 0.4, 2, 2}, 2, laminate(4), two_phase(), 1.0);
    const int n = prob.num_total_cells();
    const auto zero = check_Khom(prob, CellTensorField(n));
    CHECK(zero.admissible(1e-7));

    const double c = 0.3;
    const auto hyd = check_Khom(prob, CellTensorField(n, c * Sym3::identity()));
    CHECK(hyd.div_residual < 1e-12 * c);
    CHECK(hyd.yield_violation < 0.0);
    CHECK(hyd.moment_residuals[0] < 1e-12 * c);
    CHECK(hyd.moment_residuals[1] < 1e-12 * c);
    CHECK(hyd.boundary_residual > 0.1 * c);
    CHECK(hyd.sigma_i3_residual == Approx(c).epsilon(1e-12));
    CHECK_FALSE(hyd.admissible(1e-7));
}

TEST_CASE("converged hom states are admissible and satisfy the plastic work inequality") {
    HomProblem prob(MacroGrid{0.4, 0.4, 2, 2}, 2, laminate(4), two_phase(), 1.0);
    for (const BoundaryDatum& bd : {stretch(0.02), bend(0.2)}) {
        const EvolutionHom ev = run_evolution_hom(prob, bd, 4, quiet());
        bool plastic = false;
        for (std::size_t k = 0; k < ev.states.size(); ++k) {
            const auto& s = ev.states[k];
            const CellTensorField sig = prob.stress(s.E);
            const auto rep = check_Khom(prob, sig);
            CHECK(rep.worst_relative() <= 1e-8);
            if (k == 0) continue;
            const auto& p = ev.states[k - 1];
            CellTensorField dP(s.P.size()), dE(s.E.size());
            for (std::size_t i = 0; i < dP.size(); ++i) {
                dP[i] = make_traceless(s.P[i] - p.P[i]);
                dE[i] = s.E[i] - p.E[i];
            }
            std::vector<std::array<double, 2>> dub(s.ubar.size());
            for (std::size_t i = 0; i < dub.size(); ++i)
                dub[i] = {s.ubar[i][0] - p.ubar[i][0], s.ubar[i][1] - p.ubar[i][1]};
            std::vector<double> du3(s.u3.size());
            for (std::size_t i = 0; i < du3.size(); ++i) du3[i] = s.u3[i] - p.u3[i];
            const double slack = max_plastic_work_check(prob, sig, dP, dE, dub, du3);
            CHECK(slack >= -1e-8 * ev.energy_scale);
            // the end-of-step stress is aligned with the plastic increment, so the inequality is tight
            CHECK(std::abs(slack) <= 1e-8 * ev.energy_scale);
            plastic = plastic || prob.dissipation_energy(dP) > 0.0;

            // nothing moves: the slack vanishes identically
            const CellTensorField zero(dP.size());
            const std::vector<std::array<double, 2>> zub(dub.size(), {0.0, 0.0});
            const std::vector<double> z3(du3.size(), 0.0);
            CHECK(max_plastic_work_check(prob, sig, zero, zero, zub, z3) == 0.0);
        }
        CHECK(plastic);
    }
}

TEST_CASE("plastic work check rejects inadmissible stress") {
    HomProblem prob(MacroGrid{0.4, 0.4, 2, 2}, 2, laminate(4), two_phase(), 1.0);
    const int n = prob.num_total_cells();
    const CellTensorField sig(n, Sym3::identity());
    const CellTensorField zero(n);
    const std::vector<std::array<double, 2>> zub(prob.grid().num_nodes(), {0.0, 0.0});
    const std::vector<double> z3(prob.grid().num_ext_nodes(), 0.0);
    CHECK_THROWS_AS(max_plastic_work_check(prob, sig, zero, zero, zub, z3), PreconditionError);
}

}
