#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "plasthin/discretization.hpp"

namespace plasthin {

struct SolverConfig {
    double energy_tol = 1e-10;    ///< sweep stops when the objective drops by less than energy_tol (1 + |J|)
    double fixed_point_tol = 1e-9;  ///< and the plastic update moves by at most this, relative to its size
    int max_outer = 200;
    int stability_samples = 100;  ///< random competitors per accepted step, 0 disables the audit
    double stability_tol = 1e-8;  ///< relative to the energy scale
    double balance_tol = 1e-7;    ///< relative to the energy scale
    std::uint64_t seed = 12345;
};

struct EvolutionState {
    double t = 0.0;
    DisplacementField u;
    CellTensorField q;         ///< deviatoric, Lambda_h p
    CellTensorField e_scaled;  ///< Lambda_h e
    double accumulated_dissipation = 0.0;
};

struct IncrementReport {
    double t = 0.0;
    double elastic_energy = 0.0;
    double increment_dissipation = 0.0;
    double external_work_increment = 0.0;
    double cumulative_work = 0.0;
    /// Q(t_k) + D(0, t_k) - Q(0) - W(0, t_k), raw and signed.
    double balance_residual = 0.0;
    /// Per-step gap H(dq) - (sigma_k + sigma_{k-1})/2 : dq between the implicit dissipation and
    /// trapezoidal work on the plastic increment; its running sum is `cumulative_defect`.
    double time_defect = 0.0;
    double cumulative_defect = 0.0;
    double stability_margin = 0.0;
    int inner_iterations = 0;
};

/// Per-cell constraint residual max |Lambda_h E u - e - q|.
double constraint_residual(const HProblem& problem, const EvolutionState& s);

/// Elastic predictor at t = 0: u = w(0) on the Dirichlet set, q = 0.
EvolutionState initial_state_h(const HProblem& problem, const BoundaryDatum& bd);

/// One implicit increment to t_next by alternating elastic solves and cell-wise plastic updates.
/// The report carries the increment quantities; cumulative fields are filled by run_evolution_h.
std::pair<EvolutionState, IncrementReport> incremental_step_h(const HProblem& problem, const EvolutionState& state,
                                                              const BoundaryDatum& bd, double t_next,
                                                              const SolverConfig& cfg);

struct EvolutionH {
    std::vector<EvolutionState> states;   ///< states[0] at t = 0
    std::vector<IncrementReport> reports; ///< reports[0] describes the initial state
    double energy_scale = 0.0;            ///< peak of Q and of the cumulative work
};

/// Uniform time grid on [0, T] with n_steps increments.
EvolutionH run_evolution_h(const HProblem& problem, const BoundaryDatum& bd, int n_steps, const SolverConfig& cfg);

struct StabilityOptions {
    int n_samples = 100;
    std::vector<double> amplitudes{1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5};
    std::uint64_t seed = 12345;
};

/// min over random admissible competitors of Q(eta) + H(dq) - Q(e); q_prev is the plastic strain the
/// dissipation is measured from (the state's own q for global stability).
double stability_audit(const HProblem& problem, const EvolutionState& state, const StabilityOptions& opt);

// ---------------------------------------------------------------------------------------------
// Two-scale model

/// Scaled symmetric gradient sym [grad_y | (1/gamma) d3] of a corrector stored nodally on the
/// periodic n_y x n_y x (n3 + 1) grid of I x Y; node (i, j, k) at (k n_y + j) n_y + i,
/// cell (i, j, k) at (k n_y + j) n_y + i.
CellTensorField assemble_Etilde_gamma(const std::vector<Vec3>& mu, int n_y, int n3, double gamma);

/// Macro grid of omega with M1 x M2 cells. Deflection nodes carry a ghost ring so that the
/// clamped datum fixes both u3 and its slope on the boundary.
struct MacroGrid {
    double L1 = 1.0, L2 = 1.0;
    int m1 = 1, m2 = 1;

    double dx() const { return L1 / m1; }
    double dy() const { return L2 / m2; }
    int num_cells() const { return m1 * m2; }
    int num_nodes() const { return (m1 + 1) * (m2 + 1); }
    int node(int i, int j) const { return j * (m1 + 1) + i; }
    /// Deflection node (i, j) for i in [-1, m1 + 1], j in [-1, m2 + 1].
    int ext_node(int i, int j) const { return (j + 1) * (m1 + 3) + (i + 1); }
    int num_ext_nodes() const { return (m1 + 3) * (m2 + 3); }
};

struct TwoScaleState {
    double t = 0.0;
    std::vector<std::array<double, 2>> ubar;  ///< macro nodes
    std::vector<double> u3;                   ///< extended deflection nodes
    std::vector<std::vector<Vec3>> mu;        ///< per macro cell, corrector nodes
    CellTensorField E;  ///< macro cell * micro_cells + micro cell
    CellTensorField P;
    double accumulated_dissipation = 0.0;
};

class HomProblem {
public:
    HomProblem(MacroGrid grid, int n3, PhaseMap phases, MaterialLibrary materials, double gamma);
    ~HomProblem();
    HomProblem(const HomProblem&) = delete;
    HomProblem& operator=(const HomProblem&) = delete;

    const MacroGrid& grid() const { return m_grid; }
    int n3() const { return m_n3; }
    int n_y() const { return m_ny; }
    double gamma() const { return m_gamma; }
    const MaterialLibrary& materials() const { return m_materials; }
    const PhaseMap& phase_map() const { return m_phases; }

    int micro_cells() const { return m_ny * m_ny * m_n3; }
    int micro_nodes() const { return m_ny * m_ny * (m_n3 + 1); }
    int micro_cell(int i, int j, int k) const { return (k * m_ny + j) * m_ny + i; }
    int micro_layer(int m) const { return m / (m_ny * m_ny); }
    int micro_phase(int m) const { return m_micro_phase[m]; }
    const PhaseMaterial& micro_material(int m) const { return m_materials[m_micro_phase[m]]; }
    /// Weight of a micro cell per unit macro area: dx3 / n_y^2.
    double micro_weight() const { return 1.0 / (m_n3 * m_ny * m_ny); }
    double layer_mid(int k) const { return static_cast<double>(2 * k + 1 - m_n3) / (2.0 * m_n3); }
    /// 1 / sum_k dx3 x3_k^2 for the uniform layering.
    double bending_normalizer() const { return m_normalizer; }
    int num_total_cells() const { return m_grid.num_cells() * micro_cells(); }

    /// Macro strain coordinates z = (E ubar_11, _22, _12, D2 u3_11, _22, _12) of one macro cell.
    std::array<double, 6> macro_coords(const std::vector<std::array<double, 2>>& ubar,
                                       const std::vector<double>& u3, int c) const;
    /// Kirchhoff-Love strain of layer k for macro coordinates z.
    Sym3 kl_strain(const std::array<double, 6>& z, int k) const;

    /// Corrector strain of one micro cell.
    Sym3 micro_strain(const std::vector<Vec3>& mu, int m) const;
    /// Weak corrector residual sum_m w sigma : Etilde(N_node e_comp) at every corrector node.
    std::vector<Vec3> corrector_residual(const Sym3* sigma) const;
    /// Derivative of sum_c area sum_m w sigma : KL(z_c(U)) with respect to every macro dof.
    /// Layout: 2 * node + a for ubar, then 2 * num_nodes + ext_node for u3.
    std::vector<double> macro_residual(const CellTensorField& sigma) const;
    int num_macro_dofs() const { return 2 * m_grid.num_nodes() + m_grid.num_ext_nodes(); }
    bool macro_dof_free(int d) const { return m_macro_free[d] >= 0; }

    /// Nodal datum values at time t on the macro and extended deflection grids.
    void datum_macro(const BoundaryDatum& bd, double t, std::vector<std::array<double, 2>>& ubar,
                     std::vector<double>& u3) const;

    /// Homogenized membrane-bending stiffness per unit area (6x6 on z, in the Frobenius pairing).
    const Mat6& plate_matrix() const { return m_A; }

    /// Minimizes the quadratic part at fixed P: macro fields, correctors and E, with Dirichlet
    /// values already present in s.ubar / s.u3.
    void solve_elastic(TwoScaleState& s) const;

    double elastic_energy(const CellTensorField& E) const;
    double dissipation_energy(const CellTensorField& dP) const;
    CellTensorField stress(const CellTensorField& E) const;

    /// max |KL(z) + Etilde mu - E - P| over all micro cells.
    double compatibility_residual(const TwoScaleState& s) const;

private:
    struct Impl;
    MacroGrid m_grid;
    int m_n3;
    int m_ny;
    PhaseMap m_phases;
    MaterialLibrary m_materials;
    double m_gamma;
    double m_normalizer = 12.0;
    std::vector<int> m_micro_phase;
    std::vector<int> m_macro_free;
    Mat6 m_A;
    std::unique_ptr<Impl> m_impl;
};

TwoScaleState initial_state_hom(const HomProblem& problem, const BoundaryDatum& bd);

std::pair<TwoScaleState, IncrementReport> incremental_step_hom(const HomProblem& problem, const TwoScaleState& state,
                                                               const BoundaryDatum& bd, double t_next,
                                                               const SolverConfig& cfg);

struct EvolutionHom {
    std::vector<TwoScaleState> states;
    std::vector<IncrementReport> reports;
    double energy_scale = 0.0;
};

EvolutionHom run_evolution_hom(const HomProblem& problem, const BoundaryDatum& bd, int n_steps,
                               const SolverConfig& cfg);

double stability_audit_hom(const HomProblem& problem, const TwoScaleState& state, const StabilityOptions& opt);

/// Sum over macro cells of area * sum_m w (a_m : KL(z_c)) for a cell field a and macro nodal values.
double macro_pairing(const HomProblem& problem, const CellTensorField& a, const std::vector<std::array<double, 2>>& ubar,
                     const std::vector<double>& u3);

} // namespace plasthin
