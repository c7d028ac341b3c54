#pragma once

#include <array>
#include <vector>

#include "plasthin/tensor.hpp"

namespace plasthin {

/// Tensor-product hexahedral grid of the rescaled plate omega x (-1/2, 1/2).
/// omega = [0, L1] x [0, L2]; the lateral boundary nodes form the Dirichlet set.
class PlateMesh {
public:
    PlateMesh() = default;
    PlateMesh(double L1, double L2, int n1, int n2, int n3, double h);

    double L1() const { return m_L1; }
    double L2() const { return m_L2; }
    int n1() const { return m_n1; }
    int n2() const { return m_n2; }
    int n3() const { return m_n3; }
    double h() const { return m_h; }

    double dx() const { return m_L1 / m_n1; }
    double dy() const { return m_L2 / m_n2; }
    double dz() const { return 1.0 / m_n3; }
    double cell_volume() const { return dx() * dy() * dz(); }

    int num_nodes() const { return (m_n1 + 1) * (m_n2 + 1) * (m_n3 + 1); }
    int num_cells() const { return m_n1 * m_n2 * m_n3; }
    int num_columns() const { return m_n1 * m_n2; }

    int node(int i, int j, int k) const { return (k * (m_n2 + 1) + j) * (m_n1 + 1) + i; }
    int cell(int i, int j, int k) const { return (k * m_n2 + j) * m_n1 + i; }
    /// (i, j, k) of a node index.
    std::array<int, 3> node_ijk(int n) const;
    std::array<int, 3> cell_ijk(int c) const;

    double x1(int i) const { return i * dx(); }
    double x2(int j) const { return j * dy(); }
    double x3_node(int k) const { return -0.5 + static_cast<double>(k) / m_n3; }
    /// Midpoint of layer k, computed so that symmetric layers give exact negatives.
    double x3_mid(int k) const { return static_cast<double>(2 * k + 1 - m_n3) / (2.0 * m_n3); }

    Vec3 node_position(int n) const;
    Vec3 cell_center(int c) const;

    bool is_dirichlet(int n) const;
    /// Node lies on the top or bottom face x3 = +-1/2.
    bool on_face(int n) const;

    /// The eight nodes of a cell in local order a + 2b + 4c.
    std::array<int, 8> cell_nodes(int c) const;

private:
    double m_L1 = 1.0, m_L2 = 1.0;
    int m_n1 = 1, m_n2 = 1, m_n3 = 2;
    double m_h = 1.0;
};

using DisplacementField = std::vector<Vec3>;
using CellTensorField = std::vector<Sym3>;

/// Centroid gradients of the trilinear shape functions on a box of size d1 x d2 x d3,
/// with the third derivative multiplied by s3.
struct HexGradient {
    std::array<std::array<double, 3>, 8> dN{};

    HexGradient() = default;
    HexGradient(double d1, double d2, double d3, double s3 = 1.0);

    /// Symmetrized centroid gradient of nodal values in local order.
    Sym3 strain(const std::array<Vec3, 8>& u) const;
};

} // namespace plasthin
