#pragma once

// Shared driver for the incremental minimization in both models: elastic solve at fixed plastic
// strain, cell-wise plastic update at fixed displacement, accelerated by a safeguarded Anderson
// mixing of the plastic-strain fixed-point map.

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <string>

#include <Eigen/Dense>
#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "plasthin/discretization.hpp"
#include "plasthin/errors.hpp"
#include "plasthin/materials.hpp"
#include "plasthin/quasistatic_solver.hpp"

namespace plasthin::detail {

struct AlternatingOps {
    /// Elastic minimization at plastic strain q; the operations below then refer to that displacement.
    std::function<void(const CellTensorField& q)> solve;
    /// Cell-wise plastic update at the current displacement.
    std::function<CellTensorField()> prox;
    /// Incremental objective at the current displacement and plastic strain q.
    std::function<double(const CellTensorField& q)> objective;
};

struct AlternatingResult {
    CellTensorField q;  ///< the last solve() was made at this q
    int iterations = 0;
};

inline Eigen::VectorXd flatten(const CellTensorField& a) {
    static const double w = std::sqrt(2.0);
    Eigen::VectorXd v(6 * a.size());
    for (std::size_t c = 0; c < a.size(); ++c)
        for (int i = 0; i < 6; ++i) v[6 * c + i] = (i < 3 ? 1.0 : w) * a[c][i];
    return v;
}

inline CellTensorField unflatten(const Eigen::VectorXd& v) {
    static const double w = 1.0 / std::sqrt(2.0);
    CellTensorField a(v.size() / 6);
    for (std::size_t c = 0; c < a.size(); ++c) {
        for (int i = 0; i < 6; ++i) a[c][i] = (i < 3 ? 1.0 : w) * v[6 * c + i];
        a[c] = make_traceless(a[c]);
    }
    return a;
}

inline AlternatingResult alternating_minimization(CellTensorField q, const AlternatingOps& ops,
                                                  const SolverConfig& cfg, double t, const std::string& label) {
    constexpr int kDepth = 10;
    ops.solve(q);
    double V = ops.objective(q);
    std::deque<Eigen::VectorXd> hist_f, hist_g;
    double last_drop = std::numeric_limits<double>::infinity();

    for (int it = 1; it <= cfg.max_outer; ++it) {
        CellTensorField g = ops.prox();
        const Eigen::VectorXd gv = flatten(g);
        const Eigen::VectorXd fv = gv - flatten(q);
        const double change = fv.lpNorm<Eigen::Infinity>();
        const double scale = std::max(gv.lpNorm<Eigen::Infinity>(), std::numeric_limits<double>::min());
        if (change == 0.0) return {std::move(q), it};
        if (last_drop < cfg.energy_tol * (1.0 + std::abs(V)) && change <= cfg.fixed_point_tol * scale)
            return {std::move(q), it};

        // plain sweep value bound: J(u(q), g) <= V(q)
        const double bound = ops.objective(g);

        CellTensorField next;
        bool mixed = false;
        if (!hist_f.empty()) {
            const int m = static_cast<int>(hist_f.size());
            Eigen::MatrixXd dF(fv.size(), m), dG(gv.size(), m);
            for (int j = 0; j < m; ++j) {
                dF.col(j) = fv - hist_f[j];
                dG.col(j) = gv - hist_g[j];
            }
            const Eigen::VectorXd gamma = dF.colPivHouseholderQr().solve(fv);
            if (gamma.allFinite()) {
                next = unflatten(gv - dG * gamma);
                mixed = true;
            }
        }
        hist_f.push_front(fv);
        hist_g.push_front(gv);
        if (static_cast<int>(hist_f.size()) > kDepth) {
            hist_f.pop_back();
            hist_g.pop_back();
        }

        double Vn = std::numeric_limits<double>::infinity();
        if (mixed) {
            ops.solve(next);
            Vn = ops.objective(next);
            if (!(Vn <= bound)) {
                mixed = false;
                hist_f.clear();
                hist_g.clear();
            }
        }
        if (!mixed) {
            next = std::move(g);
            ops.solve(next);
            Vn = ops.objective(next);
        }
        if (Vn > V + 1e-12 * (1.0 + std::abs(V)))
            throw ConvergenceError(fmt::format("{}: incremental objective increased from {} to {}", label, V, Vn),
                                   Vn - V);
        last_drop = V - Vn;
        spdlog::trace("{} t = {}: sweep {} J = {:.15e} fixed-point change = {:.3e}{}", label, t, it, Vn, change,
                      mixed ? " (mixed)" : "");
        V = Vn;
        q = std::move(next);
    }
    throw ConvergenceError(fmt::format("{}: alternating minimization did not converge in {} sweeps at t = {}", label,
                                       cfg.max_outer, t),
                           last_drop);
}

} // namespace plasthin::detail
