#pragma once

#include <array>
#include <vector>

#include "plasthin/quasistatic_solver.hpp"

namespace plasthin {

/// Residuals of a discrete stress field against the admissible set. Weak residuals are rescaled
/// to stress units (the residual of a uniform traction c on a face node reads |c|).
struct AdmissibilityReport {
    double div_residual = 0.0;       ///< interior test nodes (hom: corrector nodes off the faces)
    double boundary_residual = 0.0;  ///< top/bottom face test nodes
    double yield_violation = 0.0;    ///< max over cells of |sigma_dev| - r_y, may be negative
    double sigma_i3_residual = 0.0;  ///< hom only: max |Y-average of Sigma_i3| per layer
    std::array<double, 2> moment_residuals{0.0, 0.0};  ///< hom only: membrane and bending equilibrium
    double work_inequality_slack = 0.0;
    double scale = 0.0;              ///< max Frobenius norm of the stress

    /// Every residual at most rel_tol * scale (yield: at most rel_tol * scale as well).
    bool admissible(double rel_tol) const;
    double worst_relative() const;
};

AdmissibilityReport check_Kh(const HProblem& problem, const CellTensorField& sigma);

AdmissibilityReport check_Khom(const HomProblem& problem, const CellTensorField& Sigma);

/// H^hom(dP) - [ -int Sigma : dE + int sigma_bar : E dw_bar - (1/n) int sigma_hat : D2 dw3 ], with n the
/// discrete bending normalizer. Throws PreconditionError when Sigma fails check_Khom at audit_tol.
double max_plastic_work_check(const HomProblem& problem, const CellTensorField& Sigma, const CellTensorField& dP,
                              const CellTensorField& dE, const std::vector<std::array<double, 2>>& dubar,
                              const std::vector<double>& du3, double audit_tol = 1e-7);

} // namespace plasthin
