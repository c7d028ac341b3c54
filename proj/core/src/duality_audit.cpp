#include "plasthin/duality_audit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/core.h>

#include "plasthin/errors.hpp"
#include "plasthin/tensor_kinematics.hpp"

namespace plasthin {

namespace {

double max_norm(const CellTensorField& s) {
    double m = 0.0;
    for (const auto& x : s) m = std::max(m, norm(x));
    return m;
}

} // namespace

bool AdmissibilityReport::admissible(double rel_tol) const {
    const double lim = rel_tol * scale;
    return div_residual <= lim && boundary_residual <= lim && yield_violation <= lim && sigma_i3_residual <= lim &&
           moment_residuals[0] <= lim && moment_residuals[1] <= lim;
}

double AdmissibilityReport::worst_relative() const {
    const double w = std::max({div_residual, boundary_residual, yield_violation, sigma_i3_residual,
                               moment_residuals[0], moment_residuals[1], 0.0});
    return scale > 0.0 ? w / scale : w;
}

AdmissibilityReport check_Kh(const HProblem& problem, const CellTensorField& sigma) {
    const PlateMesh& mesh = problem.mesh();
    if (sigma.size() != static_cast<std::size_t>(mesh.num_cells()))
        throw ShapeError(fmt::format("stress has {} cells, mesh has {}", sigma.size(), mesh.num_cells()));
    AdmissibilityReport rep;
    rep.scale = max_norm(sigma);
    const auto r = problem.weak_residual(sigma);
    const double h = problem.h();
    const double area = mesh.dx() * mesh.dy();
    for (int n = 0; n < mesh.num_nodes(); ++n) {
        if (mesh.is_dirichlet(n)) continue;
        const double v = std::max({std::abs(r[n][0]) * h / area, std::abs(r[n][1]) * h / area,
                                   std::abs(r[n][2]) * h * h / area});
        double& slot = mesh.on_face(n) ? rep.boundary_residual : rep.div_residual;
        slot = std::max(slot, v);
    }
    rep.yield_violation = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < mesh.num_cells(); ++c)
        rep.yield_violation = std::max(rep.yield_violation, norm(dev(sigma[c])) - problem.cell_material(c).r_y);
    return rep;
}

AdmissibilityReport check_Khom(const HomProblem& problem, const CellTensorField& Sigma) {
    if (Sigma.size() != static_cast<std::size_t>(problem.num_total_cells()))
        throw ShapeError(fmt::format("stress has {} cells, two-scale grid has {}", Sigma.size(),
                                     problem.num_total_cells()));
    AdmissibilityReport rep;
    rep.scale = max_norm(Sigma);
    const int nM = problem.grid().num_cells();
    const int nm = problem.micro_cells();
    const int ny = problem.n_y();
    const double corr_scale = problem.gamma() * ny * ny;
    const int plane = ny * ny;

    rep.yield_violation = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < nM; ++c) {
        const Sym3* S = Sigma.data() + static_cast<std::size_t>(c) * nm;
        const auto r = problem.corrector_residual(S);
        for (int n = 0; n < problem.micro_nodes(); ++n) {
            const int k = n / plane;
            const double v = corr_scale * std::max({std::abs(r[n][0]), std::abs(r[n][1]), std::abs(r[n][2])});
            double& slot = (k == 0 || k == problem.n3()) ? rep.boundary_residual : rep.div_residual;
            slot = std::max(slot, v);
        }
        for (int m = 0; m < nm; ++m)
            rep.yield_violation = std::max(rep.yield_violation, norm(dev(S[m])) - problem.micro_material(m).r_y);
        for (int k = 0; k < problem.n3(); ++k) {
            double a13 = 0.0, a23 = 0.0, a33 = 0.0;
            for (int j = 0; j < ny; ++j)
                for (int i = 0; i < ny; ++i) {
                    const Sym3& s = S[problem.micro_cell(i, j, k)];
                    a13 += s[Sym3::XZ];
                    a23 += s[Sym3::YZ];
                    a33 += s[Sym3::ZZ];
                }
            rep.sigma_i3_residual =
                std::max(rep.sigma_i3_residual, std::max({std::abs(a13), std::abs(a23), std::abs(a33)}) / plane);
        }
    }

    const auto mr = problem.macro_residual(Sigma);
    const MacroGrid& g = problem.grid();
    const double area = g.dx() * g.dy();
    const double spacing = 0.5 * (g.dx() + g.dy());
    const int off3 = 2 * g.num_nodes();
    for (int d = 0; d < problem.num_macro_dofs(); ++d) {
        if (!problem.macro_dof_free(d)) continue;
        if (d < off3)
            rep.moment_residuals[0] = std::max(rep.moment_residuals[0], std::abs(mr[d]) * spacing / area);
        else
            rep.moment_residuals[1] = std::max(rep.moment_residuals[1], std::abs(mr[d]) * problem.bending_normalizer() *
                                                                            spacing * spacing / area);
    }
    return rep;
}

double max_plastic_work_check(const HomProblem& problem, const CellTensorField& Sigma, const CellTensorField& dP,
                              const CellTensorField& dE, const std::vector<std::array<double, 2>>& dubar,
                              const std::vector<double>& du3, double audit_tol) {
    const auto rep = check_Khom(problem, Sigma);
    if (!rep.admissible(audit_tol))
        throw PreconditionError(fmt::format("stress is not admissible at relative tolerance {} (worst {:.3e})",
                                            audit_tol, rep.worst_relative()));
    if (dP.size() != Sigma.size() || dE.size() != Sigma.size())
        throw ShapeError("plastic work check: increment fields do not match the stress grid");
    double sde = 0.0;
    for (std::size_t i = 0; i < Sigma.size(); ++i) sde += ddot(Sigma[i], dE[i]);
    sde *= problem.micro_weight() * problem.grid().dx() * problem.grid().dy();
    return problem.dissipation_energy(dP) - (-sde + macro_pairing(problem, Sigma, dubar, du3));
}

} // namespace plasthin
