#include <cmath>
#include <random>

#include "doctest.h"
#include "plasthin/errors.hpp"
#include "plasthin/quasistatic_solver.hpp"
#include "plasthin/tensor_kinematics.hpp"
#include "test_util.hpp"

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

BoundaryDatum stretch(double amp, TimeProfile profile = {}) {
    BoundaryDatum bd;
    bd.w1 = [amp](double x1, double) { return amp * x1; };
    bd.profile = profile;
    return bd;
}

SolverConfig quiet() {
    SolverConfig cfg;
    cfg.stability_samples = 0;
    return cfg;
}

double max_norm(const CellTensorField& f) {
    double m = 0.0;
    for (const auto& s : f) m = std::max(m, norm(s));
    return m;
}

double max_norm(const DisplacementField& f) {
    double m = 0.0;
    for (const auto& v : f) m = std::max(m, norm(v));
    return m;
}

} // namespace

TEST_SUITE("quasistatic_solver") {

TEST_CASE("zero loading gives the zero trajectory") {
    HProblem prob(PlateMesh(0.4, 0.4, 4, 4, 2, 0.1), two_phase(), laminate(8), 0.1);
    SolverConfig cfg;
    cfg.stability_samples = 20;
    const EvolutionH ev = run_evolution_h(prob, BoundaryDatum{}, 3, cfg);
    REQUIRE(ev.states.size() == 4);
    for (std::size_t k = 0; k < ev.states.size(); ++k) {
        CHECK(max_norm(ev.states[k].u) == 0.0);
        CHECK(max_norm(ev.states[k].q) == 0.0);
        const auto& r = ev.reports[k];
        CHECK(r.elastic_energy == 0.0);
        CHECK(r.increment_dissipation == 0.0);
        CHECK(r.external_work_increment == 0.0);
        CHECK(r.balance_residual == 0.0);
        CHECK(r.stability_margin >= 0.0);
    }
}

TEST_CASE("elastic range matches direct elastic solves") {
    HProblem prob(PlateMesh(0.4, 0.4, 4, 4, 2, 0.1), two_phase(), laminate(8), 0.1);
    const BoundaryDatum bd = stretch(1e-4);
    const EvolutionH ev = run_evolution_h(prob, bd, 4, quiet());
    for (std::size_t k = 0; k < ev.states.size(); ++k) {
        const auto& s = ev.states[k];
        CHECK(max_norm(s.q) == 0.0);
        CHECK(s.accumulated_dissipation == 0.0);
        DisplacementField u = datum_field(bd, s.t, prob.mesh());
        prob.solve_elastic(u, CellTensorField(prob.mesh().num_cells()));
        double du = 0.0;
        for (std::size_t n = 0; n < u.size(); ++n) du = std::max(du, norm(u[n] - s.u[n]));
        CHECK(du <= 1e-12 * (1e-4 * 0.4));
        CHECK(ev.reports[k].elastic_energy == Approx(prob.elastic_energy(prob.strains(u))).epsilon(1e-12));
        CHECK(constraint_residual(prob, s) <= 1e-10);
    }
}

TEST_CASE("one-cell column follows the radial return") {
    // all nodes are Dirichlet, so the strain is prescribed: diag(a s, 0, 0) at load factor s
    const double two_mu = 2.0, k = 1.0, r_y = 0.05, a = 0.1;
    MaterialLibrary lib;
    lib.phases = {PhaseMaterial::make_isotropic(two_mu, k, r_y)};
    lib.validate();
    HProblem prob(PlateMesh(1.0, 1.0, 1, 1, 1, 1.0), lib, build_phase_map(PhaseGenerator::laminate({1.0}), 2), 1.0);
    SolverConfig cfg;
    cfg.stability_samples = 200;
    const EvolutionH ev = run_evolution_h(prob, stretch(a), 20, cfg);
    const Sym3 dir = (1.0 / std::sqrt(2.0 / 3.0)) * Sym3::diag(2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0);
    for (std::size_t j = 0; j < ev.states.size(); ++j) {
        const double s = ev.states[j].t;
        const double dev_norm = a * s * std::sqrt(2.0 / 3.0);
        const double plastic = std::max(0.0, dev_norm - r_y / two_mu);
        const Sym3 q_exact = plastic * dir;
        const Sym3 e_exact = Sym3::diag(a * s, 0, 0) - q_exact;
        const double energy = 0.5 * (two_mu * std::pow(dev_norm - plastic, 2) + k * std::pow(a * s, 2));
        CHECK(test::max_abs_diff(ev.states[j].q[0], q_exact) < 1e-12);
        CHECK(test::max_abs_diff(ev.states[j].e_scaled[0], e_exact) < 1e-12);
        CHECK(ev.reports[j].elastic_energy == Approx(energy).epsilon(1e-12));
        CHECK(ev.states[j].accumulated_dissipation == Approx(r_y * plastic).epsilon(1e-12));
        CHECK(ev.reports[j].stability_margin >= -1e-8 * ev.energy_scale);
    }
}

TEST_CASE("hold phase dissipates nothing") {
    HProblem prob(PlateMesh(0.4, 0.4, 4, 4, 2, 0.1), two_phase(), laminate(8), 0.1);
    const BoundaryDatum bd = stretch(0.02, TimeProfile{{0.0, 0.5, 1.0}, {0.0, 1.0, 1.0}});
    const EvolutionH ev = run_evolution_h(prob, bd, 8, quiet());
    CHECK(ev.states[4].accumulated_dissipation > 0.0);
    // the inner solve stops at a relative fixed-point change of 1e-9
    for (int k = 5; k <= 8; ++k) CHECK(ev.reports[k].increment_dissipation <= 1e-8 * ev.energy_scale);
}

TEST_CASE("accepted steps satisfy the invariants") {
    HProblem prob(PlateMesh(0.4, 0.4, 4, 4, 2, 0.1), two_phase(), laminate(8), 0.1);
    SolverConfig cfg;
    cfg.stability_samples = 60;
    const EvolutionH ev = run_evolution_h(prob, stretch(0.02), 6, cfg);
    double prev = 0.0;
    for (std::size_t k = 0; k < ev.states.size(); ++k) {
        const auto& s = ev.states[k];
        CHECK(constraint_residual(prob, s) <= 1e-10);
        for (const auto& q : s.q) CHECK(std::abs(trace(q)) <= 1e-14);
        CHECK(s.accumulated_dissipation >= prev);
        prev = s.accumulated_dissipation;
        CHECK(ev.reports[k].stability_margin >= -1e-8 * ev.energy_scale);
        CHECK(std::abs(ev.reports[k].balance_residual - ev.reports[k].cumulative_defect) <= 1e-10 * ev.energy_scale);
    }
    CHECK(prev > 0.0);
}

TEST_CASE("stability audit detects a non-minimal state") {
    HProblem prob(PlateMesh(0.4, 0.4, 4, 4, 2, 0.1), two_phase(), laminate(8), 0.1);
    const EvolutionH ev = run_evolution_h(prob, stretch(0.02), 4, quiet());
    EvolutionState s = ev.states.back();
    StabilityOptions opt;
    opt.n_samples = 200;
    CHECK(stability_audit(prob, s, opt) >= -1e-8 * ev.energy_scale);

    // displace the free nodes off equilibrium and rebuild the elastic strain
    std::mt19937_64 rng(41);
    for (int n = 0; n < prob.mesh().num_nodes(); ++n)
        if (!prob.mesh().is_dirichlet(n)) s.u[n] += test::random_vec(rng, 1e-4);
    const CellTensorField etot = prob.strains(s.u);
    for (std::size_t c = 0; c < etot.size(); ++c) s.e_scaled[c] = etot[c] - s.q[c];
    CHECK(stability_audit(prob, s, opt) < -1e-8 * ev.energy_scale);
}

TEST_CASE("non-convergence is reported") {
    HProblem prob(PlateMesh(0.4, 0.4, 4, 4, 2, 0.1), two_phase(), laminate(8), 0.1);
    SolverConfig cfg = quiet();
    cfg.max_outer = 1;
    CHECK_THROWS_AS(run_evolution_h(prob, stretch(0.02), 4, cfg), ConvergenceError);
    const EvolutionState s0 = initial_state_h(prob, stretch(0.02));
    CHECK_THROWS_AS(incremental_step_h(prob, s0, stretch(0.02), 0.0, quiet()), InvalidParameter);
}

TEST_CASE("time refinement barely changes the dissipation") {
    HProblem prob(PlateMesh(0.4, 0.4, 4, 4, 2, 0.1), two_phase(), laminate(8), 0.1);
    const double coarse = run_evolution_h(prob, stretch(0.02), 5, quiet()).states.back().accumulated_dissipation;
    const double fine = run_evolution_h(prob, stretch(0.02), 10, quiet()).states.back().accumulated_dissipation;
    CHECK(coarse > 0.0);
    CHECK(std::abs(fine - coarse) < 0.05 * coarse);
}

TEST_CASE("assemble_Etilde_gamma examples") {
    const int ny = 8, n3 = 4;
    auto node = [&](int i, int j, int k) { return (k * ny + j) * ny + i; };
    std::vector<Vec3> mu(ny * ny * (n3 + 1), Vec3{0.3, -0.1, 2.0});
    CHECK(max_norm(assemble_Etilde_gamma(mu, ny, n3, 1.5)) < 1e-14);

    for (int k = 0; k <= n3; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < ny; ++i) mu[node(i, j, k)] = {0, 0, -0.5 + static_cast<double>(k) / n3};
    for (const auto& s : assemble_Etilde_gamma(mu, ny, n3, 2.0)) {
        CHECK(s[Sym3::ZZ] == Approx(0.5).epsilon(1e-13));
        CHECK(std::abs(s[Sym3::XX]) + std::abs(s[Sym3::XZ]) < 1e-14);
    }

    for (int k = 0; k <= n3; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < ny; ++i) mu[node(i, j, k)] = {std::sin(2 * M_PI * i / ny), 0, 0};
    const auto e = assemble_Etilde_gamma(mu, ny, n3, 1.0);
    double mean = 0.0;
    for (int k = 0; k < n3; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < ny; ++i) {
                const double got = e[node(i, j, k)][Sym3::XX];
                // difference quotient of the sampled sinusoid across the cell
                const double dq = ny * (std::sin(2 * M_PI * (i + 1) / ny) - std::sin(2 * M_PI * i / ny));
                CHECK(got == Approx(dq).epsilon(1e-12));
                CHECK(std::abs(got - 2 * M_PI * std::cos(2 * M_PI * (i + 0.5) / ny)) < 0.2);
                mean += got;
            }
    CHECK(std::abs(mean) < 1e-12);
    CHECK_THROWS_AS(assemble_Etilde_gamma(mu, ny, n3, 0.0), InvalidParameter);
    CHECK_THROWS_AS(assemble_Etilde_gamma(std::vector<Vec3>(5), ny, n3, 1.0), ShapeError);
}

TEST_CASE("single-phase plate stiffness equals the plane-stress plate") {
    const double two_mu = 2.0, k = 3.0;
    MaterialLibrary lib;
    lib.phases = {PhaseMaterial::make_isotropic(two_mu, k, 1.0)};
    lib.validate();
    for (int n3 : {2, 4}) {
        HomProblem prob(MacroGrid{1.0, 1.0, 2, 2}, n3, build_phase_map(PhaseGenerator::laminate({1.0}), 4), lib, 1.0);
        // plane stress: lambda* = 2 mu lambda / (lambda + 2 mu), lambda = k - 2 mu / 3
        const double lam = k - two_mu / 3.0;
        const double lam_ps = two_mu * lam / (lam + two_mu);
        Mat6 A = Mat6::Zero();
        const double m2 = second_moment(Layering::uniform(n3));
        for (int b = 0; b < 2; ++b) {
            const int o = 3 * b;
            const double f = b == 0 ? 1.0 : m2;
            A(o, o) = f * (two_mu + lam_ps);
            A(o + 1, o + 1) = f * (two_mu + lam_ps);
            A(o, o + 1) = A(o + 1, o) = f * lam_ps;
            A(o + 2, o + 2) = f * 2.0 * two_mu;
        }
        CHECK((prob.plate_matrix() - A).cwiseAbs().maxCoeff() <= 1e-8 * A.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("hom zero datum and elastic scaling") {
    HomProblem prob(MacroGrid{0.4, 0.4, 2, 2}, 2, laminate(4), two_phase(), 1.0);
    SolverConfig cfg;
    cfg.stability_samples = 10;
    const EvolutionHom z = run_evolution_hom(prob, BoundaryDatum{}, 2, cfg);
    for (std::size_t k = 0; k < z.states.size(); ++k) {
        CHECK(max_norm(z.states[k].E) == 0.0);
        CHECK(max_norm(z.states[k].P) == 0.0);
        CHECK(z.reports[k].elastic_energy == 0.0);
        CHECK(z.reports[k].stability_margin >= 0.0);
    }
    const EvolutionHom a = run_evolution_hom(prob, stretch(1e-4), 1, quiet());
    const EvolutionHom b = run_evolution_hom(prob, stretch(2e-4), 1, quiet());
    CHECK(a.states.back().accumulated_dissipation == 0.0);
    CHECK(b.states.back().accumulated_dissipation == 0.0);
    CHECK(a.reports.back().elastic_energy > 0.0);
    CHECK(b.reports.back().elastic_energy == Approx(4.0 * a.reports.back().elastic_energy).epsilon(1e-10));
}

TEST_CASE("hom plastic run keeps compatibility and balance") {
    HomProblem prob(MacroGrid{0.4, 0.4, 2, 2}, 2, laminate(4), two_phase(), 1.0);
    SolverConfig cfg;
    cfg.stability_samples = 30;
    const EvolutionHom ev = run_evolution_hom(prob, stretch(0.02), 4, cfg);
    CHECK(ev.states.back().accumulated_dissipation > 0.0);
    for (std::size_t k = 0; k < ev.states.size(); ++k) {
        CHECK(prob.compatibility_residual(ev.states[k]) <= 1e-10);
        for (const auto& p : ev.states[k].P) CHECK(std::abs(trace(p)) <= 1e-14);
        CHECK(ev.reports[k].stability_margin >= -1e-8 * ev.energy_scale);
        CHECK(std::abs(ev.reports[k].balance_residual - ev.reports[k].cumulative_defect) <= 1e-10 * ev.energy_scale);
    }
}

TEST_CASE("hom construction errors") {
    CHECK_THROWS_AS(HomProblem(MacroGrid{1.0, 1.0, 2, 2}, 3, laminate(4), two_phase(), 1.0), UnsupportedGrid);
    CHECK_THROWS_AS(HomProblem(MacroGrid{1.0, 1.0, 2, 2}, 2, laminate(4), two_phase(), -1.0), InvalidParameter);
}

}
