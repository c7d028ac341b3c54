#pragma once

#include <array>
#include <vector>

#include "plasthin/mesh.hpp"
#include "plasthin/tensor.hpp"

namespace plasthin {

/// (a (.) b)_ij = (a_i b_j + a_j b_i) / 2
Sym3 sym_odot(const Vec3& a, const Vec3& b);

/// Deviatoric part, xi - tr(xi)/3 I.
Sym3 dev(const Sym3& xi);

/// Thin-plate strain scaling: i3 entries times 1/h, 33 entry times 1/h^2.
Sym3 lambda_h(const Sym3& xi, double h);
/// Inverse of lambda_h.
Sym3 lambda_h_inv(const Sym3& xi, double h);

/// Kirchhoff-Love displacement u_a = ubar_a - x3 d_a u3, u_3 = u3, sampled at the nodes
/// of `mesh`. `ubar` and `u3` are nodal on the (n1+1) x (n2+1) grid of omega.
/// Nodal slopes of u3 are chosen so that the one-point symmetric gradient of the result
/// has vanishing i3 entries on every cell (they coincide with central differences when
/// u3 is quadratic).
DisplacementField kl_embed(const std::vector<std::array<double, 2>>& ubar, const std::vector<double>& u3,
                           const PlateMesh& mesh);

/// Slopes d_i along a line of samples with spacing dx such that (d_i + d_{i+1})/2 equals the
/// difference quotient on every interval; d_0 is the second-order one-sided estimate.
std::vector<double> interval_compatible_slopes(const std::vector<double>& values, double dx);

/// Thickness moments of a Sym2 cell field. Layout: cell = layer * n_columns + column.
struct MomentTriple {
    std::vector<Sym2> zeroth;  ///< per column: layer average
    std::vector<Sym2> first;   ///< per column: normalized first moment
    std::vector<Sym2> perp;    ///< per cell: remainder
    double normalizer = 12.0;  ///< 1 / sum(x3^2 dx3) of the layering
};

/// Layering of I = (-1/2, 1/2) by uniform layers.
struct Layering {
    std::vector<double> mid;
    std::vector<double> width;

    static Layering uniform(int n3);
};

MomentTriple moments(const std::vector<Sym2>& f, int n_columns, const Layering& layers);
MomentTriple moments(const std::vector<Sym2>& f, const PlateMesh& mesh);

/// sum over layers of w_k x3_k^2; equals 1/12 in the continuum limit.
double second_moment(const Layering& layers);

} // namespace plasthin
