#include "plasthin/mesh.hpp"

#include <fmt/core.h>

#include "plasthin/errors.hpp"

namespace plasthin {

PlateMesh::PlateMesh(double L1, double L2, int n1, int n2, int n3, double h)
    : m_L1(L1), m_L2(L2), m_n1(n1), m_n2(n2), m_n3(n3), m_h(h) {
    if (!(L1 > 0.0) || !(L2 > 0.0))
        throw InvalidParameter(fmt::format("plate extent must be positive, got {} x {}", L1, L2));
    if (n1 < 1 || n2 < 1 || n3 < 1)
        throw InvalidParameter(fmt::format("mesh resolution must be positive, got {}x{}x{}", n1, n2, n3));
    // A single layer leaves a zero-energy mode of the one-point operator once
    // interior nodes are free; a 1x1 column has no free node and is allowed.
    if (n3 < 2 && (n1 > 1 || n2 > 1))
        throw InvalidParameter("at least two x3 layers are required when the mesh has free nodes");
    if (!(h > 0.0)) throw InvalidParameter(fmt::format("thickness h must be positive, got {}", h));
}

std::array<int, 3> PlateMesh::node_ijk(int n) const {
    const int i = n % (m_n1 + 1);
    const int r = n / (m_n1 + 1);
    return {i, r % (m_n2 + 1), r / (m_n2 + 1)};
}

std::array<int, 3> PlateMesh::cell_ijk(int c) const {
    const int i = c % m_n1;
    const int r = c / m_n1;
    return {i, r % m_n2, r / m_n2};
}

Vec3 PlateMesh::node_position(int n) const {
    const auto [i, j, k] = node_ijk(n);
    return {x1(i), x2(j), x3_node(k)};
}

Vec3 PlateMesh::cell_center(int c) const {
    const auto [i, j, k] = cell_ijk(c);
    return {(i + 0.5) * dx(), (j + 0.5) * dy(), x3_mid(k)};
}

bool PlateMesh::is_dirichlet(int n) const {
    const auto [i, j, k] = node_ijk(n);
    (void)k;
    return i == 0 || i == m_n1 || j == 0 || j == m_n2;
}

bool PlateMesh::on_face(int n) const {
    const int k = node_ijk(n)[2];
    return k == 0 || k == m_n3;
}

std::array<int, 8> PlateMesh::cell_nodes(int c) const {
    const auto [i, j, k] = cell_ijk(c);
    std::array<int, 8> out{};
    for (int a = 0; a < 8; ++a) out[a] = node(i + (a & 1), j + ((a >> 1) & 1), k + ((a >> 2) & 1));
    return out;
}

HexGradient::HexGradient(double d1, double d2, double d3, double s3) {
    for (int a = 0; a < 8; ++a) {
        const double sa = (a & 1) ? 1.0 : -1.0;
        const double sb = ((a >> 1) & 1) ? 1.0 : -1.0;
        const double sc = ((a >> 2) & 1) ? 1.0 : -1.0;
        dN[a] = {sa / (4.0 * d1), sb / (4.0 * d2), s3 * sc / (4.0 * d3)};
    }
}

Sym3 HexGradient::strain(const std::array<Vec3, 8>& u) const {
    double g[3][3] = {};
    for (int a = 0; a < 8; ++a)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) g[i][j] += u[a][i] * dN[a][j];
    return {g[0][0], g[1][1], g[2][2], 0.5 * (g[0][1] + g[1][0]), 0.5 * (g[0][2] + g[2][0]),
            0.5 * (g[1][2] + g[2][1])};
}

} // namespace plasthin
