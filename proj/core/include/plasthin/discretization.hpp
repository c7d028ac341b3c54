#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Sparse>

#include "plasthin/materials.hpp"
#include "plasthin/mesh.hpp"
#include "plasthin/microstructure.hpp"
#include "plasthin/tensor.hpp"

namespace plasthin {

using SpMat = Eigen::SparseMatrix<double>;
using VecX = Eigen::VectorXd;

/// 6x24 matrix taking local nodal values (local node a, xyz interleaved) to the plain
/// components of the symmetrized centroid gradient.
Eigen::Matrix<double, 6, 24> local_strain_matrix(const HexGradient& g);

/// Symmetrized centroid gradient of the trilinear interpolant, no scaling.
CellTensorField assemble_E(const PlateMesh& mesh, const DisplacementField& u);
/// sym [grad' v | (1/h) d3 v] per cell.
CellTensorField assemble_Eh(const PlateMesh& mesh, const DisplacementField& u, double h);
/// lambda_h applied to the unscaled strain: the elastic+plastic strain of the rescaled problem.
CellTensorField scaled_strain(const PlateMesh& mesh, const DisplacementField& u, double h);

/// Piecewise-linear time profile through samples (t_i, v_i), t_0 = 0 < ... < t_n = T.
struct TimeProfile {
    std::vector<double> t{0.0, 1.0};
    std::vector<double> v{0.0, 1.0};

    double T() const { return t.back(); }
    double operator()(double s) const;
    void validate() const;
};

using PlaneField = std::function<double(double, double)>;

/// Quadratic polynomial c0 + c1 x1 + c2 x2 + c3 x1^2 + c4 x1 x2 + c5 x2^2.
struct Quadratic2 {
    std::array<double, 6> c{};
    double operator()(double x1, double x2) const {
        return c[0] + c[1] * x1 + c[2] * x2 + c[3] * x1 * x1 + c[4] * x1 * x2 + c[5] * x2 * x2;
    }
};

/// Scaled Kirchhoff-Love boundary datum profile(t) * (w1 - x3 d1 w3, w2 - x3 d2 w3, w3).
struct BoundaryDatum {
    PlaneField w1 = [](double, double) { return 0.0; };
    PlaneField w2 = [](double, double) { return 0.0; };
    PlaneField w3 = [](double, double) { return 0.0; };
    TimeProfile profile;
    double fd_step = 1e-3;  ///< central-difference step for d_a w3

    double d1_w3(double x1, double x2) const;
    double d2_w3(double x1, double x2) const;
};

Vec3 eval_boundary_datum(const BoundaryDatum& bd, double t, const Vec3& x);

/// Nodal interpolant of the datum at time t on every node of the mesh.
DisplacementField datum_field(const BoundaryDatum& bd, double t, const PlateMesh& mesh);

enum class LinearSolverKind { Cholesky, CG };

struct LinearSolverOptions {
    LinearSolverKind kind = LinearSolverKind::Cholesky;
    double cg_tol = 1e-10;
    int cg_max_iter = 100000;
};

/// Discrete finite-h problem: mesh, per-cell phases at period eps, and the elastic operator
/// of u -> sum_cells vol Q(phase, Lambda_h E u - q) on the free (non-Dirichlet) dofs.
class HProblem {
public:
    HProblem(PlateMesh mesh, MaterialLibrary materials, PhaseMap phases, double eps,
             LinearSolverOptions lin = {});
    ~HProblem();
    HProblem(const HProblem&) = delete;
    HProblem& operator=(const HProblem&) = delete;

    const PlateMesh& mesh() const { return m_mesh; }
    const MaterialLibrary& materials() const { return m_materials; }
    const PhaseMap& phase_map() const { return m_phases; }
    double h() const { return m_mesh.h(); }
    double eps() const { return m_eps; }
    int cell_phase(int c) const { return m_cell_phase[c]; }
    const PhaseMaterial& cell_material(int c) const { return m_materials[m_cell_phase[c]]; }

    int num_free() const { return m_num_free; }
    /// Free-dof index of (node, component), or -1 on the Dirichlet set.
    int free_index(int node, int comp) const { return m_free[3 * node + comp]; }
    const SpMat& operator_matrix() const { return m_K; }

    /// Lambda_h E u on one cell / all cells.
    Sym3 cell_strain(const DisplacementField& u, int c) const;
    CellTensorField strains(const DisplacementField& u) const;

    /// Right-hand side of the free-dof system for plastic strain q and the Dirichlet values in u.
    VecX rhs(const DisplacementField& u, const CellTensorField& q) const;

    /// Overwrites the free dofs of u with the minimizer of the quadratic energy at fixed q.
    void solve_elastic(DisplacementField& u, const CellTensorField& q) const;

    double elastic_energy(const CellTensorField& e) const;
    double dissipation_energy(const CellTensorField& dq) const;
    CellTensorField stress(const CellTensorField& e) const;

    /// r_(node,comp) = sum_cells vol sigma : Lambda_h E(N_node e_comp), for every dof.
    std::vector<Vec3> weak_residual(const CellTensorField& sigma) const;

    /// Local scaled strain operator, strain = B * (24 nodal values in local order, xyz interleaved).
    const Eigen::Matrix<double, 6, 24>& B() const { return m_B; }

private:
    struct Factor;
    PlateMesh m_mesh;
    MaterialLibrary m_materials;
    PhaseMap m_phases;
    double m_eps;
    LinearSolverOptions m_lin;
    std::vector<int> m_cell_phase;
    std::vector<int> m_free;
    int m_num_free = 0;
    Eigen::Matrix<double, 6, 24> m_B;
    std::vector<Mat6> m_M;
    SpMat m_K;
    std::unique_ptr<Factor> m_factor;
};

/// Operator and right-hand side of the elastic Euler-Lagrange system at fixed q and datum w.
struct ElasticSystem {
    SpMat K;
    VecX rhs;
};
ElasticSystem assemble_elastic_system(const HProblem& problem, const CellTensorField& q,
                                      const DisplacementField& w);

} // namespace plasthin
