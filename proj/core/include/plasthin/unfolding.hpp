#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "plasthin/mesh.hpp"
#include "plasthin/quasistatic_solver.hpp"

namespace plasthin {

/// Values on (complete eps-cells of omega) x (layers of I) x (n_y x n_y raster of Y).
struct UnfoldedField {
    int n1 = 0, n2 = 0;  ///< complete eps-cells along x1, x2
    int n3 = 0;
    int n_y = 0;
    double eps = 0.0;
    bool scalar = false;       ///< scalar fields live in component 0
    std::vector<Sym3> values;
    double excluded_mass = 0.0;  ///< sum of |f| vol over mesh cells outside the complete eps-cells

    std::size_t index(int c1, int c2, int k, int i, int j) const {
        return ((((static_cast<std::size_t>(c2) * n1 + c1) * n3 + k) * n_y + j) * n_y + i);
    }
    Sym3& at(int c1, int c2, int k, int i, int j) { return values[index(c1, c2, k, i, j)]; }
    const Sym3& at(int c1, int c2, int k, int i, int j) const { return values[index(c1, c2, k, i, j)]; }
    /// Measure of one entry in Omega: eps^2 dx3 / n_y^2.
    double weight() const { return eps * eps / (static_cast<double>(n3) * n_y * n_y); }
    /// sum value * weight, componentwise.
    Sym3 mass() const;
};

/// Piecewise-constant resampling of a cell field onto the unfolded grid. Each eps-cell must cover an
/// integer number m of mesh cells per direction with m | n_y or n_y | m.
UnfoldedField unfold(const CellTensorField& f, const PlateMesh& mesh, double eps, int n_y);
UnfoldedField unfold(const std::vector<double>& f, const PlateMesh& mesh, double eps, int n_y);

/// sum |a - b| weight over the common grid (Frobenius norm for tensors).
double two_scale_gap(const UnfoldedField& a, const UnfoldedField& b);

/// Columns i1, i2, layer, y1, y2, component, value; y at the raster cell center.
void write_csv(const UnfoldedField& f, std::ostream& os);

/// The two-scale field E of a hom state laid out like `like`: every eps-cell takes the values of
/// the macro cell containing its center. Needs matching n3 and n_y.
UnfoldedField sample_two_scale(const HomProblem& problem, const CellTensorField& E, const UnfoldedField& like);

/// Random smooth field on the periodic I x Y corrector grid, a fixed sum of Fourier modes in y
/// times Legendre polynomials in x3; coefficients depend on the seed only, not on n_y or n3.
std::vector<Vec3> random_fourier_field(int n_y, int n3, std::uint64_t seed, int max_mode = 2);

/// sum vol |u_c - mean| / sum vol |Etilde_gamma u| with u_c the cell-centroid value.
double poincare_korn_ratio(const std::vector<Vec3>& u, int n_y, int n3, double gamma);

} // namespace plasthin
