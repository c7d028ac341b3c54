#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/SparseCholesky>
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

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Local24 = Eigen::Matrix<double, 24, 1>;

Vec6 to_vec(const Sym3& s) {
    Vec6 v;
    for (int i = 0; i < 6; ++i) v(i) = s[i];
    return v;
}

Sym3 from_vec(const Vec6& v) { return {v(0), v(1), v(2), v(3), v(4), v(5)}; }

// Frobenius weights for the plain component vector
const double kW[6] = {1, 1, 1, 2, 2, 2};

std::array<int, 8> periodic_cell_nodes(int m, int ny) {
    const int i = m % ny, j = (m / ny) % ny, k = m / (ny * ny);
    std::array<int, 8> out{};
    for (int c = 0; c < 2; ++c)
        for (int b = 0; b < 2; ++b)
            for (int a = 0; a < 2; ++a)
                out[a + 2 * b + 4 * c] = ((k + c) * ny + (j + b) % ny) * ny + (i + a) % ny;
    return out;
}

Sym3 random_deviatoric(std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Sym3 s{nd(rng), nd(rng), 0.0, nd(rng), nd(rng), nd(rng)};
    return dev(s);
}

} // namespace

CellTensorField assemble_Etilde_gamma(const std::vector<Vec3>& mu, int n_y, int n3, double gamma) {
    if (!(gamma > 0.0)) throw InvalidParameter(fmt::format("gamma must be positive, got {}", gamma));
    if (n_y < 1 || n3 < 1) throw InvalidParameter("corrector grid needs positive resolutions");
    if (mu.size() != static_cast<std::size_t>(n_y) * n_y * (n3 + 1))
        throw ShapeError(fmt::format("corrector has {} nodes, grid needs {}", mu.size(), n_y * n_y * (n3 + 1)));
    const HexGradient g(1.0 / n_y, 1.0 / n_y, 1.0 / n3, 1.0 / gamma);
    const int nc = n_y * n_y * n3;
    CellTensorField out(nc);
    for (int m = 0; m < nc; ++m) {
        const auto nodes = periodic_cell_nodes(m, n_y);
        std::array<Vec3, 8> loc;
        for (int a = 0; a < 8; ++a) loc[a] = mu[nodes[a]];
        out[m] = g.strain(loc);
    }
    return out;
}

struct HomProblem::Impl {
    Eigen::Matrix<double, 6, 24> B;
    std::vector<Mat6> M;
    std::vector<std::array<int, 8>> micro_nodes;
    SpMat Kmu;
    Eigen::SimplicialLDLT<SpMat> corrector;
    std::array<std::vector<Vec3>, 6> mu_basis;
    std::array<CellTensorField, 6> G;
    std::array<CellTensorField, 6> Kbasis;

    // macro: per cell, 24 local dofs and the 6 x 24 map to z
    std::vector<std::array<int, 24>> macro_dofs;
    Eigen::Matrix<double, 6, 24> T;
    int n_free = 0;
    SpMat Kmacro;
    Eigen::SimplicialLDLT<SpMat> macro;
};

HomProblem::HomProblem(MacroGrid grid, int n3, PhaseMap phases, MaterialLibrary materials, double gamma)
    : m_grid(grid), m_n3(n3), m_ny(phases.n_y()), m_phases(std::move(phases)), m_materials(std::move(materials)),
      m_gamma(gamma), m_impl(std::make_unique<Impl>()) {
    if (!(gamma > 0.0)) throw InvalidParameter(fmt::format("gamma must be positive, got {}", gamma));
    if (!(grid.L1 > 0.0) || !(grid.L2 > 0.0) || grid.m1 < 1 || grid.m2 < 1)
        throw InvalidParameter("macro grid needs positive extent and resolution");
    if (n3 < 2 || n3 % 2 != 0) throw UnsupportedGrid(fmt::format("two-scale model needs an even n3 >= 2, got {}", n3));
    if (m_phases.n_phases() > m_materials.size())
        throw ConfigError(fmt::format("phase map uses {} phases, library has {}", m_phases.n_phases(),
                                      m_materials.size()));
    Impl& I = *m_impl;

    m_normalizer = 1.0 / second_moment(Layering::uniform(n3));
    const int nm = micro_cells();
    m_micro_phase.resize(nm);
    I.micro_nodes.resize(nm);
    for (int m = 0; m < nm; ++m) {
        m_micro_phase[m] = m_phases.id(m % m_ny, (m / m_ny) % m_ny);
        I.micro_nodes[m] = periodic_cell_nodes(m, m_ny);
    }
    for (const auto& p : m_materials.phases) I.M.push_back(energy_matrix(p));
    I.B = local_strain_matrix(HexGradient(1.0 / m_ny, 1.0 / m_ny, 1.0 / n3, 1.0 / gamma));

    // periodic corrector operator
    const double w = micro_weight();
    const int ndof = 3 * micro_nodes();
    std::vector<Eigen::Triplet<double>> trip;
    for (int m = 0; m < nm; ++m) {
        const Eigen::Matrix<double, 24, 24> Ke = w * I.B.transpose() * I.M[m_micro_phase[m]] * I.B;
        const auto& nodes = I.micro_nodes[m];
        for (int a = 0; a < 24; ++a)
            for (int b = 0; b < 24; ++b) trip.emplace_back(3 * nodes[a / 3] + a % 3, 3 * nodes[b / 3] + b % 3, Ke(a, b));
    }
    I.Kmu.resize(ndof, ndof);
    I.Kmu.setFromTriplets(trip.begin(), trip.end());
    // Constants and hourglass patterns are zero-energy; right-hand sides are orthogonal to them, so
    // a small shift plus refinement returns the minimal solution up to a null-space component.
    SpMat Kreg = I.Kmu;
    const double shift = 1e-10 * I.Kmu.diagonal().maxCoeff();
    for (int d = 0; d < ndof; ++d) Kreg.coeffRef(d, d) += shift;
    I.corrector.compute(Kreg);
    if (I.corrector.info() != Eigen::Success) throw AssemblyError("corrector factorization failed");

    // cell solutions for unit macro strains
    for (int a = 0; a < 6; ++a) {
        I.Kbasis[a].resize(nm);
        for (int m = 0; m < nm; ++m) {
            std::array<double, 6> z{};
            z[a] = 1.0;
            I.Kbasis[a][m] = kl_strain(z, micro_layer(m));
        }
    }
    auto solve = [&](const CellTensorField& F) {
        VecX b = VecX::Zero(ndof);
        for (int m = 0; m < nm; ++m) {
            const Local24 f = w * I.B.transpose() * (I.M[m_micro_phase[m]] * to_vec(F[m]));
            for (int a = 0; a < 24; ++a) b(3 * I.micro_nodes[m][a / 3] + a % 3) += f(a);
        }
        VecX x = I.corrector.solve(b);
        for (int r = 0; r < 3; ++r) x += I.corrector.solve(b - I.Kmu * x);
        return x;
    };
    for (int a = 0; a < 6; ++a) {
        const VecX x = -solve(I.Kbasis[a]);
        I.mu_basis[a].assign(micro_nodes(), Vec3{});
        for (int n = 0; n < micro_nodes(); ++n) I.mu_basis[a][n] = {x(3 * n), x(3 * n + 1), x(3 * n + 2)};
        I.G[a].resize(nm);
        for (int m = 0; m < nm; ++m) I.G[a][m] = I.Kbasis[a][m] + micro_strain(I.mu_basis[a], m);
    }
    for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b) {
            double s = 0.0;
            for (int m = 0; m < nm; ++m) s += ddot(I.G[a][m], elasticity_apply(micro_material(m), I.G[b][m]));
            m_A(a, b) = w * s;
        }
    m_A = 0.5 * (m_A + m_A.transpose()).eval();

    // macro strain map on one cell: 8 in-plane dofs then a 4 x 4 deflection patch
    const double dX = grid.dx(), dY = grid.dy();
    auto& T = I.T;
    T.setZero();
    const double s1[4] = {-1, 1, -1, 1}, s2[4] = {-1, -1, 1, 1};
    for (int c = 0; c < 4; ++c) {
        T(0, 2 * c) = s1[c] / (2 * dX);
        T(1, 2 * c + 1) = s2[c] / (2 * dY);
        T(2, 2 * c) = 0.5 * s2[c] / (2 * dY);
        T(2, 2 * c + 1) = 0.5 * s1[c] / (2 * dX);
    }
    auto p = [](int a, int b) { return 8 + 4 * b + a; };
    for (int cb = 1; cb <= 2; ++cb)
        for (int ca = 1; ca <= 2; ++ca) {
            T(3, p(ca + 1, cb)) += 0.25 / (dX * dX);
            T(3, p(ca, cb)) -= 0.5 / (dX * dX);
            T(3, p(ca - 1, cb)) += 0.25 / (dX * dX);
            T(4, p(ca, cb + 1)) += 0.25 / (dY * dY);
            T(4, p(ca, cb)) -= 0.5 / (dY * dY);
            T(4, p(ca, cb - 1)) += 0.25 / (dY * dY);
        }
    T(5, p(2, 2)) = 1.0 / (dX * dY);
    T(5, p(2, 1)) = -1.0 / (dX * dY);
    T(5, p(1, 2)) = -1.0 / (dX * dY);
    T(5, p(1, 1)) = 1.0 / (dX * dY);

    const int nM = grid.num_cells();
    const int off3 = 2 * grid.num_nodes();
    I.macro_dofs.resize(nM);
    for (int J = 0; J < grid.m2; ++J)
        for (int Ic = 0; Ic < grid.m1; ++Ic) {
            auto& d = I.macro_dofs[J * grid.m1 + Ic];
            for (int c = 0; c < 4; ++c) {
                const int node = grid.node(Ic + c % 2, J + c / 2);
                d[2 * c] = 2 * node;
                d[2 * c + 1] = 2 * node + 1;
            }
            for (int b = 0; b < 4; ++b)
                for (int a = 0; a < 4; ++a) d[p(a, b)] = off3 + grid.ext_node(Ic - 1 + a, J - 1 + b);
        }

    m_macro_free.assign(num_macro_dofs(), -1);
    for (int j = 1; j < grid.m2; ++j)
        for (int i = 1; i < grid.m1; ++i) {
            m_macro_free[2 * grid.node(i, j)] = I.n_free++;
            m_macro_free[2 * grid.node(i, j) + 1] = I.n_free++;
            m_macro_free[off3 + grid.ext_node(i, j)] = I.n_free++;
        }
    if (I.n_free > 0) {
        const double area = dX * dY;
        const Eigen::Matrix<double, 24, 24> Kc = area * T.transpose() * m_A * T;
        std::vector<Eigen::Triplet<double>> mt;
        for (const auto& d : I.macro_dofs)
            for (int a = 0; a < 24; ++a) {
                const int ra = m_macro_free[d[a]];
                if (ra < 0) continue;
                for (int b = 0; b < 24; ++b) {
                    const int cb = m_macro_free[d[b]];
                    if (cb >= 0) mt.emplace_back(ra, cb, Kc(a, b));
                }
            }
        I.Kmacro.resize(I.n_free, I.n_free);
        I.Kmacro.setFromTriplets(mt.begin(), mt.end());
        I.macro.compute(I.Kmacro);
        if (I.macro.info() != Eigen::Success) throw AssemblyError("macro plate operator factorization failed");
        const auto& D = I.macro.vectorD();
        if (D.minCoeff() <= 1e-14 * D.maxCoeff()) throw AssemblyError("macro plate operator is singular");
    }
}

HomProblem::~HomProblem() = default;

std::array<double, 6> HomProblem::macro_coords(const std::vector<std::array<double, 2>>& ubar,
                                               const std::vector<double>& u3, int c) const {
    const auto& d = m_impl->macro_dofs[c];
    const int off3 = 2 * m_grid.num_nodes();
    Local24 x;
    for (int a = 0; a < 24; ++a) {
        const int g = d[a];
        x(a) = g < off3 ? ubar[g / 2][g % 2] : u3[g - off3];
    }
    const Vec6 z = m_impl->T * x;
    return {z(0), z(1), z(2), z(3), z(4), z(5)};
}

Sym3 HomProblem::kl_strain(const std::array<double, 6>& z, int k) const {
    const double x3 = layer_mid(k);
    return embed(Sym2{z[0] - x3 * z[3], z[1] - x3 * z[4], z[2] - x3 * z[5]});
}

Sym3 HomProblem::micro_strain(const std::vector<Vec3>& mu, int m) const {
    const auto& nodes = m_impl->micro_nodes[m];
    Local24 x;
    for (int a = 0; a < 8; ++a)
        for (int d = 0; d < 3; ++d) x(3 * a + d) = mu[nodes[a]][d];
    return from_vec(m_impl->B * x);
}

std::vector<Vec3> HomProblem::corrector_residual(const Sym3* sigma) const {
    std::vector<Vec3> r(micro_nodes());
    const double w = micro_weight();
    for (int m = 0; m < micro_cells(); ++m) {
        Vec6 s;
        for (int i = 0; i < 6; ++i) s(i) = kW[i] * sigma[m][i];
        const Local24 f = w * m_impl->B.transpose() * s;
        const auto& nodes = m_impl->micro_nodes[m];
        for (int a = 0; a < 8; ++a)
            for (int d = 0; d < 3; ++d) r[nodes[a]][d] += f(3 * a + d);
    }
    return r;
}

std::vector<double> HomProblem::macro_residual(const CellTensorField& sigma) const {
    std::vector<double> r(num_macro_dofs(), 0.0);
    const double area = m_grid.dx() * m_grid.dy();
    const double w = micro_weight();
    const int nm = micro_cells();
    for (int c = 0; c < m_grid.num_cells(); ++c) {
        Vec6 tau = Vec6::Zero();
        for (int a = 0; a < 6; ++a) {
            double s = 0.0;
            for (int m = 0; m < nm; ++m) s += ddot(sigma[static_cast<std::size_t>(c) * nm + m], m_impl->Kbasis[a][m]);
            tau(a) = w * s;
        }
        const Local24 f = area * m_impl->T.transpose() * tau;
        for (int a = 0; a < 24; ++a) r[m_impl->macro_dofs[c][a]] += f(a);
    }
    return r;
}

void HomProblem::datum_macro(const BoundaryDatum& bd, double t, std::vector<std::array<double, 2>>& ubar,
                             std::vector<double>& u3) const {
    const double s = bd.profile(t);
    ubar.assign(m_grid.num_nodes(), {0.0, 0.0});
    u3.assign(m_grid.num_ext_nodes(), 0.0);
    for (int j = 0; j <= m_grid.m2; ++j)
        for (int i = 0; i <= m_grid.m1; ++i) {
            const double x1 = i * m_grid.dx(), x2 = j * m_grid.dy();
            ubar[m_grid.node(i, j)] = {s * bd.w1(x1, x2), s * bd.w2(x1, x2)};
        }
    for (int j = -1; j <= m_grid.m2 + 1; ++j)
        for (int i = -1; i <= m_grid.m1 + 1; ++i)
            u3[m_grid.ext_node(i, j)] = s * bd.w3(i * m_grid.dx(), j * m_grid.dy());
}

void HomProblem::solve_elastic(TwoScaleState& s) const {
    const Impl& I = *m_impl;
    const int nM = m_grid.num_cells();
    const int nm = micro_cells();
    const int ndof = 3 * micro_nodes();
    const double w = micro_weight();
    const double area = m_grid.dx() * m_grid.dy();

    std::vector<std::vector<Vec3>> muP(nM);
    std::vector<Vec6> g(nM);
    std::vector<CellTensorField> F(nM);
    tbb::parallel_for(tbb::blocked_range<int>(0, nM), [&](const tbb::blocked_range<int>& r) {
        for (int c = r.begin(); c != r.end(); ++c) {
            const Sym3* P = s.P.data() + static_cast<std::size_t>(c) * nm;
            VecX b = VecX::Zero(ndof);
            for (int m = 0; m < nm; ++m) {
                const Local24 f = w * I.B.transpose() * (I.M[m_micro_phase[m]] * to_vec(P[m]));
                for (int a = 0; a < 24; ++a) b(3 * I.micro_nodes[m][a / 3] + a % 3) += f(a);
            }
            VecX x = VecX::Zero(ndof);
            if (b.squaredNorm() > 0.0) {
                x = I.corrector.solve(b);
                for (int it = 0; it < 3; ++it) x += I.corrector.solve(b - I.Kmu * x);
            }
            muP[c].assign(micro_nodes(), Vec3{});
            for (int n = 0; n < micro_nodes(); ++n) muP[c][n] = {x(3 * n), x(3 * n + 1), x(3 * n + 2)};
            F[c].resize(nm);
            for (int m = 0; m < nm; ++m) F[c][m] = micro_strain(muP[c], m) - P[m];
            for (int a = 0; a < 6; ++a) {
                double acc = 0.0;
                for (int m = 0; m < nm; ++m) acc += ddot(I.G[a][m], elasticity_apply(micro_material(m), F[c][m]));
                g[c](a) = w * acc;
            }
        }
    });

    if (I.n_free > 0) {
        const int off3 = 2 * m_grid.num_nodes();
        // zero the free dofs so that the cell coordinates below see the Dirichlet part only
        for (int d = 0; d < num_macro_dofs(); ++d)
            if (m_macro_free[d] >= 0) (d < off3 ? s.ubar[d / 2][d % 2] : s.u3[d - off3]) = 0.0;
        VecX rhs = VecX::Zero(I.n_free);
        for (int c = 0; c < nM; ++c) {
            const auto zd = macro_coords(s.ubar, s.u3, c);
            Vec6 zv;
            for (int a = 0; a < 6; ++a) zv(a) = zd[a];
            const Local24 f = -area * I.T.transpose() * (g[c] + m_A * zv);
            for (int a = 0; a < 24; ++a) {
                const int ra = m_macro_free[I.macro_dofs[c][a]];
                if (ra >= 0) rhs(ra) += f(a);
            }
        }
        VecX x = I.macro.solve(rhs);
        x += I.macro.solve(rhs - I.Kmacro * x);
        for (int d = 0; d < num_macro_dofs(); ++d)
            if (m_macro_free[d] >= 0) (d < off3 ? s.ubar[d / 2][d % 2] : s.u3[d - off3]) = x(m_macro_free[d]);
    }

    s.mu.resize(nM);
    s.E.resize(static_cast<std::size_t>(nM) * nm);
    tbb::parallel_for(tbb::blocked_range<int>(0, nM), [&](const tbb::blocked_range<int>& r) {
        for (int c = r.begin(); c != r.end(); ++c) {
            const auto z = macro_coords(s.ubar, s.u3, c);
            std::vector<Vec3> mu = muP[c];
            for (int a = 0; a < 6; ++a)
                for (int n = 0; n < micro_nodes(); ++n) mu[n] += z[a] * I.mu_basis[a][n];
            Vec3 mean;
            for (const auto& v : mu) mean += v;
            mean *= 1.0 / micro_nodes();
            for (auto& v : mu) v -= mean;
            s.mu[c] = std::move(mu);
            for (int m = 0; m < nm; ++m) {
                Sym3 e = F[c][m];
                for (int a = 0; a < 6; ++a) e += z[a] * I.G[a][m];
                s.E[static_cast<std::size_t>(c) * nm + m] = e;
            }
        }
    });
}

double HomProblem::elastic_energy(const CellTensorField& E) const {
    const int nm = micro_cells();
    double s = 0.0;
    for (std::size_t i = 0; i < E.size(); ++i) s += quadratic_energy(micro_material(static_cast<int>(i % nm)), E[i]);
    return s * micro_weight() * m_grid.dx() * m_grid.dy();
}

double HomProblem::dissipation_energy(const CellTensorField& dP) const {
    const int nm = micro_cells();
    double s = 0.0;
    for (std::size_t i = 0; i < dP.size(); ++i) s += dissipation(micro_material(static_cast<int>(i % nm)), dP[i]);
    return s * micro_weight() * m_grid.dx() * m_grid.dy();
}

CellTensorField HomProblem::stress(const CellTensorField& E) const {
    const int nm = micro_cells();
    CellTensorField out(E.size());
    for (std::size_t i = 0; i < E.size(); ++i) out[i] = elasticity_apply(micro_material(static_cast<int>(i % nm)), E[i]);
    return out;
}

double HomProblem::compatibility_residual(const TwoScaleState& s) const {
    const int nm = micro_cells();
    double r = 0.0;
    for (int c = 0; c < m_grid.num_cells(); ++c) {
        const auto z = macro_coords(s.ubar, s.u3, c);
        for (int m = 0; m < nm; ++m) {
            const std::size_t i = static_cast<std::size_t>(c) * nm + m;
            r = std::max(r, norm(kl_strain(z, micro_layer(m)) + micro_strain(s.mu[c], m) - s.E[i] - s.P[i]));
        }
    }
    return r;
}

double macro_pairing(const HomProblem& problem, const CellTensorField& a, const std::vector<std::array<double, 2>>& ubar,
                     const std::vector<double>& u3) {
    const int nm = problem.micro_cells();
    double s = 0.0;
    for (int c = 0; c < problem.grid().num_cells(); ++c) {
        const auto z = problem.macro_coords(ubar, u3, c);
        for (int m = 0; m < nm; ++m)
            s += ddot(a[static_cast<std::size_t>(c) * nm + m], problem.kl_strain(z, problem.micro_layer(m)));
    }
    return s * problem.micro_weight() * problem.grid().dx() * problem.grid().dy();
}

namespace {

CellTensorField prox_hom(const HomProblem& problem, const CellTensorField& etot, const CellTensorField& P_prev) {
    const int nm = problem.micro_cells();
    CellTensorField out(etot.size());
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, etot.size()), [&](const tbb::blocked_range<std::size_t>& r) {
        for (std::size_t i = r.begin(); i != r.end(); ++i)
            out[i] = plastic_update(problem.micro_material(static_cast<int>(i % nm)), etot[i], P_prev[i]);
    });
    return out;
}

double objective_hom(const HomProblem& problem, const CellTensorField& etot, const CellTensorField& P,
                     const CellTensorField& P_prev) {
    const int nm = problem.micro_cells();
    double s = 0.0;
    for (std::size_t i = 0; i < P.size(); ++i) {
        const auto& mat = problem.micro_material(static_cast<int>(i % nm));
        s += quadratic_energy(mat, etot[i] - P[i]) + dissipation(mat, make_traceless(P[i] - P_prev[i]));
    }
    return s * problem.micro_weight() * problem.grid().dx() * problem.grid().dy();
}

void set_macro_dirichlet(const HomProblem& problem, TwoScaleState& s, const std::vector<std::array<double, 2>>& ub,
                         const std::vector<double>& u3) {
    const int off3 = 2 * problem.grid().num_nodes();
    for (int d = 0; d < problem.num_macro_dofs(); ++d)
        if (!problem.macro_dof_free(d)) {
            if (d < off3)
                s.ubar[d / 2][d % 2] = ub[d / 2][d % 2];
            else
                s.u3[d - off3] = u3[d - off3];
        }
}

} // namespace

TwoScaleState initial_state_hom(const HomProblem& problem, const BoundaryDatum& bd) {
    TwoScaleState s;
    problem.datum_macro(bd, 0.0, s.ubar, s.u3);
    s.P.assign(problem.num_total_cells(), Sym3{});
    problem.solve_elastic(s);
    return s;
}

std::pair<TwoScaleState, IncrementReport> incremental_step_hom(const HomProblem& problem, const TwoScaleState& state,
                                                               const BoundaryDatum& bd, double t_next,
                                                               const SolverConfig& cfg) {
    if (!(t_next > state.t)) throw InvalidParameter(fmt::format("t_next = {} must exceed t = {}", t_next, state.t));
    std::vector<std::array<double, 2>> ub_prev, ub_next;
    std::vector<double> u3_prev, u3_next;
    problem.datum_macro(bd, state.t, ub_prev, u3_prev);
    problem.datum_macro(bd, t_next, ub_next, u3_next);

    TwoScaleState s = state;
    s.t = t_next;
    set_macro_dirichlet(problem, s, ub_next, u3_next);

    CellTensorField etot;
    detail::AlternatingOps ops;
    ops.solve = [&](const CellTensorField& P) {
        s.P = P;
        problem.solve_elastic(s);
        etot.resize(s.E.size());
        for (std::size_t i = 0; i < etot.size(); ++i) etot[i] = s.E[i] + s.P[i];
    };
    ops.prox = [&] { return prox_hom(problem, etot, state.P); };
    ops.objective = [&](const CellTensorField& P) { return objective_hom(problem, etot, P, state.P); };
    const int it = detail::alternating_minimization(state.P, ops, cfg, t_next, "two-scale").iterations;

    const std::size_t n = s.P.size();
    CellTensorField dP(n), sig_mid(n);
    const CellTensorField sp = problem.stress(state.E), sn = problem.stress(s.E);
    for (std::size_t i = 0; i < n; ++i) {
        dP[i] = make_traceless(s.P[i] - state.P[i]);
        sig_mid[i] = 0.5 * (sp[i] + sn[i]);
    }
    std::vector<std::array<double, 2>> dub(ub_next.size());
    std::vector<double> du3(u3_next.size());
    for (std::size_t i = 0; i < dub.size(); ++i) dub[i] = {ub_next[i][0] - ub_prev[i][0], ub_next[i][1] - ub_prev[i][1]};
    for (std::size_t i = 0; i < du3.size(); ++i) du3[i] = u3_next[i] - u3_prev[i];

    double sdp = 0.0;
    for (std::size_t i = 0; i < n; ++i) sdp += ddot(sig_mid[i], dP[i]);
    sdp *= problem.micro_weight() * problem.grid().dx() * problem.grid().dy();

    IncrementReport rep;
    rep.t = t_next;
    rep.elastic_energy = problem.elastic_energy(s.E);
    rep.increment_dissipation = problem.dissipation_energy(dP);
    rep.external_work_increment = macro_pairing(problem, sig_mid, dub, du3);
    rep.time_defect = rep.increment_dissipation - sdp;
    rep.inner_iterations = it;
    s.accumulated_dissipation = state.accumulated_dissipation + rep.increment_dissipation;
    return {std::move(s), rep};
}

EvolutionHom run_evolution_hom(const HomProblem& problem, const BoundaryDatum& bd, int n_steps,
                               const SolverConfig& cfg) {
    if (n_steps < 1) throw InvalidParameter(fmt::format("n_steps must be >= 1, got {}", n_steps));
    bd.profile.validate();
    const double T = bd.profile.T();
    EvolutionHom out;
    out.states.push_back(initial_state_hom(problem, bd));
    IncrementReport r0;
    r0.elastic_energy = problem.elastic_energy(out.states[0].E);
    r0.inner_iterations = 1;
    out.reports.push_back(r0);
    for (int k = 1; k <= n_steps; ++k) {
        const double t = k == n_steps ? T : T * static_cast<double>(k) / n_steps;
        auto [s, rep] = incremental_step_hom(problem, out.states.back(), bd, t, cfg);
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
            out.reports[k].stability_margin = stability_audit_hom(problem, out.states[k], opt);
        }
    }
    return out;
}

double stability_audit_hom(const HomProblem& problem, const TwoScaleState& state, const StabilityOptions& opt) {
    const int nM = problem.grid().num_cells();
    const int nm = problem.micro_cells();
    const std::size_t n = state.E.size();
    const CellTensorField sigma = problem.stress(state.E);
    const double wa = problem.micro_weight() * problem.grid().dx() * problem.grid().dy();

    auto margin_of = [&](const std::vector<std::array<double, 2>>& dub, const std::vector<double>& du3,
                         const std::vector<std::vector<Vec3>>& dmu, const CellTensorField& dP) {
        double s = 0.0;
        for (int c = 0; c < nM; ++c) {
            const auto z = problem.macro_coords(dub, du3, c);
            for (int m = 0; m < nm; ++m) {
                const std::size_t i = static_cast<std::size_t>(c) * nm + m;
                const auto& mat = problem.micro_material(m);
                Sym3 d = problem.kl_strain(z, problem.micro_layer(m)) - dP[i];
                if (!dmu.empty()) d += problem.micro_strain(dmu[c], m);
                s += ddot(sigma[i], d) + quadratic_energy(mat, d) + dissipation(mat, dP[i]);
            }
        }
        return s * wa;
    };

    double u_scale = 0.0, q_scale = 0.0, mu_scale = 0.0;
    for (const auto& v : state.ubar) u_scale = std::max({u_scale, std::abs(v[0]), std::abs(v[1])});
    for (double v : state.u3) u_scale = std::max(u_scale, std::abs(v));
    for (const auto& mc : state.mu)
        for (const auto& v : mc) mu_scale = std::max(mu_scale, norm(v));
    for (std::size_t i = 0; i < n; ++i) q_scale = std::max({q_scale, norm(state.P[i]), norm(state.E[i])});
    if (u_scale == 0.0) u_scale = 1.0;
    if (mu_scale == 0.0) mu_scale = u_scale;
    if (q_scale == 0.0) q_scale = 1.0;

    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> nd;
    std::uniform_int_distribution<int> pick(0, static_cast<int>(n) - 1);
    const std::size_t n_amp = std::max<std::size_t>(1, opt.amplitudes.size());
    const int off3 = 2 * problem.grid().num_nodes();
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::array<double, 2>> dub(state.ubar.size());
    std::vector<double> du3(state.u3.size());
    std::vector<std::vector<Vec3>> dmu(nM, std::vector<Vec3>(problem.micro_nodes()));
    CellTensorField dP(n);
    for (int s = 0; s < opt.n_samples; ++s) {
        const double amp = opt.amplitudes.empty() ? 1.0 : opt.amplitudes[static_cast<std::size_t>(s) % n_amp];
        std::fill(dub.begin(), dub.end(), std::array<double, 2>{0.0, 0.0});
        std::fill(du3.begin(), du3.end(), 0.0);
        for (auto& v : dmu) std::fill(v.begin(), v.end(), Vec3{});
        std::fill(dP.begin(), dP.end(), Sym3{});
        const int mode = (s / static_cast<int>(n_amp)) % 3;
        if (mode == 0) {
            for (int d = 0; d < problem.num_macro_dofs(); ++d)
                if (problem.macro_dof_free(d)) (d < off3 ? dub[d / 2][d % 2] : du3[d - off3]) = amp * u_scale * nd(rng);
            for (auto& v : dmu)
                for (auto& x : v) x = (amp * mu_scale) * Vec3{nd(rng), nd(rng), nd(rng)};
            for (auto& p : dP) p = (amp * q_scale) * random_deviatoric(rng);
        } else {
            const int i = pick(rng);
            dP[i] = (amp * q_scale) * random_deviatoric(rng);
            if (mode == 2) {
                const int c = i / nm;
                for (auto& x : dmu[c]) x = (amp * mu_scale) * Vec3{nd(rng), nd(rng), nd(rng)};
            }
        }
        best = std::min(best, margin_of(dub, du3, dmu, dP));
    }

    // one more alternating sweep from the state
    TwoScaleState s1 = state;
    problem.solve_elastic(s1);
    CellTensorField etot(n);
    for (std::size_t i = 0; i < n; ++i) etot[i] = s1.E[i] + s1.P[i];
    const CellTensorField P1 = prox_hom(problem, etot, state.P);
    for (std::size_t i = 0; i < dub.size(); ++i)
        dub[i] = {s1.ubar[i][0] - state.ubar[i][0], s1.ubar[i][1] - state.ubar[i][1]};
    for (std::size_t i = 0; i < du3.size(); ++i) du3[i] = s1.u3[i] - state.u3[i];
    for (int c = 0; c < nM; ++c)
        for (int k = 0; k < problem.micro_nodes(); ++k) dmu[c][k] = s1.mu[c][k] - state.mu[c][k];
    for (std::size_t i = 0; i < n; ++i) dP[i] = make_traceless(P1[i] - state.P[i]);
    best = std::min(best, margin_of(dub, du3, dmu, dP));
    return best;
}

} // namespace plasthin
