#include "plasthin/discretization.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <fmt/core.h>
#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include "plasthin/errors.hpp"
#include "plasthin/tensor_kinematics.hpp"

namespace plasthin {

namespace {

std::array<Vec3, 8> gather(const PlateMesh& mesh, const DisplacementField& u, int c) {
    const auto nodes = mesh.cell_nodes(c);
    std::array<Vec3, 8> loc;
    for (int a = 0; a < 8; ++a) loc[a] = u[nodes[a]];
    return loc;
}

void check_field(const PlateMesh& mesh, const DisplacementField& u) {
    if (u.size() != static_cast<std::size_t>(mesh.num_nodes()))
        throw ShapeError(fmt::format("displacement has {} nodes, mesh has {}", u.size(), mesh.num_nodes()));
}

CellTensorField cell_strains(const PlateMesh& mesh, const DisplacementField& u, const HexGradient& g) {
    check_field(mesh, u);
    CellTensorField out(mesh.num_cells());
    tbb::parallel_for(tbb::blocked_range<int>(0, mesh.num_cells()), [&](const tbb::blocked_range<int>& r) {
        for (int c = r.begin(); c != r.end(); ++c) out[c] = g.strain(gather(mesh, u, c));
    });
    return out;
}

Eigen::Matrix<double, 6, 1> to_vec(const Sym3& s) {
    Eigen::Matrix<double, 6, 1> v;
    for (int i = 0; i < 6; ++i) v(i) = s[i];
    return v;
}

} // namespace

Eigen::Matrix<double, 6, 24> local_strain_matrix(const HexGradient& g) {
    Eigen::Matrix<double, 6, 24> B = Eigen::Matrix<double, 6, 24>::Zero();
    for (int a = 0; a < 8; ++a) {
        const auto& d = g.dN[a];
        const int ux = 3 * a, uy = 3 * a + 1, uz = 3 * a + 2;
        B(0, ux) = d[0];
        B(1, uy) = d[1];
        B(2, uz) = d[2];
        B(3, ux) = 0.5 * d[1];
        B(3, uy) = 0.5 * d[0];
        B(4, ux) = 0.5 * d[2];
        B(4, uz) = 0.5 * d[0];
        B(5, uy) = 0.5 * d[2];
        B(5, uz) = 0.5 * d[1];
    }
    return B;
}

CellTensorField assemble_E(const PlateMesh& mesh, const DisplacementField& u) {
    return cell_strains(mesh, u, HexGradient(mesh.dx(), mesh.dy(), mesh.dz()));
}

CellTensorField assemble_Eh(const PlateMesh& mesh, const DisplacementField& u, double h) {
    if (!(h > 0.0)) throw InvalidParameter(fmt::format("assemble_Eh needs h > 0, got {}", h));
    return cell_strains(mesh, u, HexGradient(mesh.dx(), mesh.dy(), mesh.dz(), 1.0 / h));
}

CellTensorField scaled_strain(const PlateMesh& mesh, const DisplacementField& u, double h) {
    CellTensorField e = assemble_E(mesh, u);
    for (auto& s : e) s = lambda_h(s, h);
    return e;
}

void TimeProfile::validate() const {
    if (t.size() < 2 || t.size() != v.size())
        throw ConfigError("time profile needs at least two (t, value) samples of equal length");
    if (t.front() != 0.0) throw ConfigError("time profile must start at t = 0");
    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1])) throw ConfigError("time profile samples must be strictly increasing");
    for (double x : v)
        if (!std::isfinite(x)) throw ConfigError("time profile values must be finite");
}

double TimeProfile::operator()(double s) const {
    const double tol = 1e-12 * std::max(1.0, T());
    if (!(s >= -tol && s <= T() + tol))
        throw RangeError(fmt::format("time {} outside [0, {}]", s, T()));
    s = std::clamp(s, 0.0, T());
    const auto it = std::upper_bound(t.begin(), t.end(), s);
    if (it == t.end()) return v.back();
    const std::size_t i = static_cast<std::size_t>(it - t.begin());
    const double a = (s - t[i - 1]) / (t[i] - t[i - 1]);
    return (1.0 - a) * v[i - 1] + a * v[i];
}

double BoundaryDatum::d1_w3(double x1, double x2) const {
    return (w3(x1 + fd_step, x2) - w3(x1 - fd_step, x2)) / (2.0 * fd_step);
}

double BoundaryDatum::d2_w3(double x1, double x2) const {
    return (w3(x1, x2 + fd_step) - w3(x1, x2 - fd_step)) / (2.0 * fd_step);
}

Vec3 eval_boundary_datum(const BoundaryDatum& bd, double t, const Vec3& x) {
    const double s = bd.profile(t);
    if (s == 0.0) return {};
    return s * Vec3{bd.w1(x[0], x[1]) - x[2] * bd.d1_w3(x[0], x[1]),
                    bd.w2(x[0], x[1]) - x[2] * bd.d2_w3(x[0], x[1]), bd.w3(x[0], x[1])};
}

DisplacementField datum_field(const BoundaryDatum& bd, double t, const PlateMesh& mesh) {
    DisplacementField w(mesh.num_nodes());
    for (int n = 0; n < mesh.num_nodes(); ++n) w[n] = eval_boundary_datum(bd, t, mesh.node_position(n));
    return w;
}

struct HProblem::Factor {
    Eigen::SimplicialLDLT<SpMat> ldlt;
    Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
};

HProblem::HProblem(PlateMesh mesh, MaterialLibrary materials, PhaseMap phases, double eps, LinearSolverOptions lin)
    : m_mesh(std::move(mesh)), m_materials(std::move(materials)), m_phases(std::move(phases)), m_eps(eps),
      m_lin(lin), m_factor(std::make_unique<Factor>()) {
    if (!(eps > 0.0)) throw InvalidParameter(fmt::format("period eps must be positive, got {}", eps));
    if (m_phases.n_phases() > m_materials.size())
        throw ConfigError(fmt::format("phase map uses {} phases, library has {}", m_phases.n_phases(),
                                      m_materials.size()));

    const int nc = m_mesh.num_cells();
    m_cell_phase.resize(nc);
    for (int c = 0; c < nc; ++c) {
        const Vec3 x = m_mesh.cell_center(c);
        m_cell_phase[c] = eps_phase_at(m_phases, x[0], x[1], eps);
    }

    m_free.assign(3 * static_cast<std::size_t>(m_mesh.num_nodes()), -1);
    for (int n = 0; n < m_mesh.num_nodes(); ++n)
        if (!m_mesh.is_dirichlet(n))
            for (int d = 0; d < 3; ++d) m_free[3 * n + d] = m_num_free++;

    m_B = local_strain_matrix(HexGradient(m_mesh.dx(), m_mesh.dy(), m_mesh.dz()));
    const double h = m_mesh.h();
    m_B.row(Sym3::ZZ) /= h * h;
    m_B.row(Sym3::XZ) /= h;
    m_B.row(Sym3::YZ) /= h;
    for (const auto& p : m_materials.phases) m_M.push_back(energy_matrix(p));
    if (m_num_free == 0) return;

    const double vol = m_mesh.cell_volume();
    std::vector<Eigen::Matrix<double, 24, 24>> Ke;
    for (const auto& M : m_M) Ke.push_back(vol * m_B.transpose() * M * m_B);

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(nc) * 576);
    for (int c = 0; c < nc; ++c) {
        const auto nodes = m_mesh.cell_nodes(c);
        const auto& K = Ke[m_cell_phase[c]];
        for (int a = 0; a < 24; ++a) {
            const int ra = m_free[3 * nodes[a / 3] + a % 3];
            if (ra < 0) continue;
            for (int b = 0; b < 24; ++b) {
                const int cb = m_free[3 * nodes[b / 3] + b % 3];
                if (cb >= 0) trip.emplace_back(ra, cb, K(a, b));
            }
        }
    }
    m_K.resize(m_num_free, m_num_free);
    m_K.setFromTriplets(trip.begin(), trip.end());

    if (m_lin.kind == LinearSolverKind::Cholesky) {
        m_factor->ldlt.compute(m_K);
        if (m_factor->ldlt.info() != Eigen::Success)
            throw AssemblyError("elastic operator factorization failed");
        const auto& D = m_factor->ldlt.vectorD();
        if (D.minCoeff() <= 1e-14 * D.maxCoeff())
            throw AssemblyError("elastic operator is singular on the free dofs");
    } else {
        m_factor->cg.setTolerance(m_lin.cg_tol);
        m_factor->cg.setMaxIterations(m_lin.cg_max_iter);
        m_factor->cg.compute(m_K);
        if (m_factor->cg.info() != Eigen::Success) throw AssemblyError("elastic operator preconditioner failed");
    }
}

HProblem::~HProblem() = default;

Sym3 HProblem::cell_strain(const DisplacementField& u, int c) const {
    const auto nodes = m_mesh.cell_nodes(c);
    Eigen::Matrix<double, 24, 1> x;
    for (int a = 0; a < 8; ++a)
        for (int d = 0; d < 3; ++d) x(3 * a + d) = u[nodes[a]][d];
    const Eigen::Matrix<double, 6, 1> s = m_B * x;
    return {s(0), s(1), s(2), s(3), s(4), s(5)};
}

CellTensorField HProblem::strains(const DisplacementField& u) const {
    check_field(m_mesh, u);
    CellTensorField out(m_mesh.num_cells());
    tbb::parallel_for(tbb::blocked_range<int>(0, m_mesh.num_cells()), [&](const tbb::blocked_range<int>& r) {
        for (int c = r.begin(); c != r.end(); ++c) out[c] = cell_strain(u, c);
    });
    return out;
}

VecX HProblem::rhs(const DisplacementField& u, const CellTensorField& q) const {
    check_field(m_mesh, u);
    if (q.size() != static_cast<std::size_t>(m_mesh.num_cells()))
        throw ShapeError(fmt::format("plastic strain has {} cells, mesh has {}", q.size(), m_mesh.num_cells()));
    // r = sum vol B^T M (q - B u_D) where u_D keeps only the Dirichlet values of u
    VecX r = VecX::Zero(m_num_free);
    const double vol = m_mesh.cell_volume();
    for (int c = 0; c < m_mesh.num_cells(); ++c) {
        const auto nodes = m_mesh.cell_nodes(c);
        Eigen::Matrix<double, 24, 1> xd;
        bool any_free = false;
        for (int a = 0; a < 24; ++a) {
            const bool fr = m_free[3 * nodes[a / 3] + a % 3] >= 0;
            any_free = any_free || fr;
            xd(a) = fr ? 0.0 : u[nodes[a / 3]][a % 3];
        }
        if (!any_free) continue;
        const Eigen::Matrix<double, 6, 1> s = to_vec(q[c]) - m_B * xd;
        const Eigen::Matrix<double, 24, 1> f = vol * m_B.transpose() * (m_M[m_cell_phase[c]] * s);
        for (int a = 0; a < 24; ++a) {
            const int ra = m_free[3 * nodes[a / 3] + a % 3];
            if (ra >= 0) r(ra) += f(a);
        }
    }
    return r;
}

void HProblem::solve_elastic(DisplacementField& u, const CellTensorField& q) const {
    if (m_num_free == 0) return;
    const VecX r = rhs(u, q);
    VecX x;
    if (m_lin.kind == LinearSolverKind::Cholesky) {
        x = m_factor->ldlt.solve(r);
        // one refinement step recovers digits lost to the 1/h^4 scaling of the 33 rows
        x += m_factor->ldlt.solve(r - m_K * x);
    } else {
        VecX x0(m_num_free);
        for (int n = 0; n < m_mesh.num_nodes(); ++n)
            for (int d = 0; d < 3; ++d)
                if (m_free[3 * n + d] >= 0) x0(m_free[3 * n + d]) = u[n][d];
        x = m_factor->cg.solveWithGuess(r, x0);
        if (m_factor->cg.info() != Eigen::Success)
            throw ConvergenceError("conjugate gradients did not reach the requested tolerance",
                                   m_factor->cg.error());
    }
    for (int n = 0; n < m_mesh.num_nodes(); ++n)
        for (int d = 0; d < 3; ++d)
            if (m_free[3 * n + d] >= 0) u[n][d] = x(m_free[3 * n + d]);
}

double HProblem::elastic_energy(const CellTensorField& e) const {
    double s = 0.0;
    for (int c = 0; c < m_mesh.num_cells(); ++c) s += quadratic_energy(cell_material(c), e[c]);
    return s * m_mesh.cell_volume();
}

double HProblem::dissipation_energy(const CellTensorField& dq) const {
    double s = 0.0;
    for (int c = 0; c < m_mesh.num_cells(); ++c) s += dissipation(cell_material(c), dq[c]);
    return s * m_mesh.cell_volume();
}

CellTensorField HProblem::stress(const CellTensorField& e) const {
    CellTensorField out(e.size());
    for (std::size_t c = 0; c < e.size(); ++c) out[c] = elasticity_apply(cell_material(static_cast<int>(c)), e[c]);
    return out;
}

std::vector<Vec3> HProblem::weak_residual(const CellTensorField& sigma) const {
    const double vol = m_mesh.cell_volume();
    const double w[6] = {1, 1, 1, 2, 2, 2};
    std::vector<Vec3> r(m_mesh.num_nodes());
    for (int c = 0; c < m_mesh.num_cells(); ++c) {
        const auto nodes = m_mesh.cell_nodes(c);
        Eigen::Matrix<double, 6, 1> s;
        for (int i = 0; i < 6; ++i) s(i) = w[i] * sigma[c][i];
        const Eigen::Matrix<double, 24, 1> f = vol * m_B.transpose() * s;
        for (int a = 0; a < 8; ++a) {
            r[nodes[a]][0] += f(3 * a);
            r[nodes[a]][1] += f(3 * a + 1);
            r[nodes[a]][2] += f(3 * a + 2);
        }
    }
    return r;
}

ElasticSystem assemble_elastic_system(const HProblem& problem, const CellTensorField& q, const DisplacementField& w) {
    if (problem.num_free() == 0) throw AssemblyError("no free dofs: every node lies on the Dirichlet set");
    for (const auto& s : q)
        if (std::abs(trace(s)) > 1e-10 * std::max(1.0, norm(s)))
            throw ConstraintViolation("plastic strain must be deviatoric");
    return {problem.operator_matrix(), problem.rhs(w, q)};
}

} // namespace plasthin
