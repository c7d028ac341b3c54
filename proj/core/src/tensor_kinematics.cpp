#include "plasthin/tensor_kinematics.hpp"

#include <cmath>

#include <fmt/core.h>

#include "plasthin/errors.hpp"

namespace plasthin {

Sym3 sym_odot(const Vec3& a, const Vec3& b) {
    return {a[0] * b[0],
            a[1] * b[1],
            a[2] * b[2],
            0.5 * (a[0] * b[1] + a[1] * b[0]),
            0.5 * (a[0] * b[2] + a[2] * b[0]),
            0.5 * (a[1] * b[2] + a[2] * b[1])};
}

Sym3 dev(const Sym3& xi) {
    const double m = trace(xi) / 3.0;
    Sym3 out = xi;
    out[0] -= m;
    out[1] -= m;
    out[2] = -(out[0] + out[1]);
    return out;
}

Sym3 lambda_h(const Sym3& xi, double h) {
    if (!(h > 0.0)) throw InvalidParameter(fmt::format("lambda_h needs h > 0, got {}", h));
    Sym3 out = xi;
    out[Sym3::ZZ] /= h * h;
    out[Sym3::XZ] /= h;
    out[Sym3::YZ] /= h;
    return out;
}

Sym3 lambda_h_inv(const Sym3& xi, double h) {
    if (!(h > 0.0)) throw InvalidParameter(fmt::format("lambda_h needs h > 0, got {}", h));
    Sym3 out = xi;
    out[Sym3::ZZ] *= h * h;
    out[Sym3::XZ] *= h;
    out[Sym3::YZ] *= h;
    return out;
}

std::vector<double> interval_compatible_slopes(const std::vector<double>& u, double dx) {
    const std::size_t n = u.size();
    std::vector<double> d(n, 0.0);
    if (n < 2) return d;
    if (n >= 3)
        d[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dx);
    else
        d[0] = (u[1] - u[0]) / dx;
    for (std::size_t i = 0; i + 1 < n; ++i) d[i + 1] = 2.0 * (u[i + 1] - u[i]) / dx - d[i];
    return d;
}

DisplacementField kl_embed(const std::vector<std::array<double, 2>>& ubar, const std::vector<double>& u3,
                           const PlateMesh& mesh) {
    const int m1 = mesh.n1() + 1, m2 = mesh.n2() + 1;
    const std::size_t nplane = static_cast<std::size_t>(m1) * m2;
    if (ubar.size() != nplane || u3.size() != nplane)
        throw ShapeError(fmt::format("kl_embed: expected {} in-plane nodes, got ubar {} / u3 {}", nplane,
                                     ubar.size(), u3.size()));

    std::vector<double> d1(nplane), d2(nplane);
    std::vector<double> line;
    for (int j = 0; j < m2; ++j) {
        line.assign(m1, 0.0);
        for (int i = 0; i < m1; ++i) line[i] = u3[j * m1 + i];
        const auto s = interval_compatible_slopes(line, mesh.dx());
        for (int i = 0; i < m1; ++i) d1[j * m1 + i] = s[i];
    }
    for (int i = 0; i < m1; ++i) {
        line.assign(m2, 0.0);
        for (int j = 0; j < m2; ++j) line[j] = u3[j * m1 + i];
        const auto s = interval_compatible_slopes(line, mesh.dy());
        for (int j = 0; j < m2; ++j) d2[j * m1 + i] = s[j];
    }

    DisplacementField u(mesh.num_nodes());
    for (int k = 0; k <= mesh.n3(); ++k) {
        const double x3 = mesh.x3_node(k);
        for (int j = 0; j < m2; ++j)
            for (int i = 0; i < m1; ++i) {
                const std::size_t p = static_cast<std::size_t>(j) * m1 + i;
                u[mesh.node(i, j, k)] = {ubar[p][0] - x3 * d1[p], ubar[p][1] - x3 * d2[p], u3[p]};
            }
    }
    return u;
}

Layering Layering::uniform(int n3) {
    Layering l;
    for (int k = 0; k < n3; ++k) {
        l.mid.push_back(static_cast<double>(2 * k + 1 - n3) / (2.0 * n3));
        l.width.push_back(1.0 / n3);
    }
    return l;
}

double second_moment(const Layering& layers) {
    double s = 0.0;
    for (std::size_t k = 0; k < layers.mid.size(); ++k) s += layers.width[k] * layers.mid[k] * layers.mid[k];
    return s;
}

MomentTriple moments(const std::vector<Sym2>& f, int n_columns, const Layering& layers) {
    const int n3 = static_cast<int>(layers.mid.size());
    if (n3 < 2 || n3 % 2 != 0)
        throw UnsupportedGrid(fmt::format("moments need an even number of layers, got {}", n3));
    if (layers.width.size() != layers.mid.size()) throw ShapeError("moments: layer arrays differ in length");
    const double w0 = layers.width[0];
    double lo = -0.5;
    for (int k = 0; k < n3; ++k) {
        const double w = layers.width[k];
        if (std::abs(w - w0) > 1e-12 * w0)
            throw UnsupportedGrid("moments need uniform layers");
        if (std::abs(layers.mid[k] - (lo + 0.5 * w)) > 1e-12)
            throw UnsupportedGrid("moments need layers tiling (-1/2, 1/2) in order");
        if (std::abs(layers.mid[k] + layers.mid[n3 - 1 - k]) > 1e-14)
            throw UnsupportedGrid("moments need layers symmetric about x3 = 0");
        lo += w;
    }
    if (std::abs(lo - 0.5) > 1e-12) throw UnsupportedGrid("moments need layers tiling (-1/2, 1/2)");
    if (f.size() != static_cast<std::size_t>(n_columns) * n3)
        throw ShapeError(fmt::format("moments: expected {} cells, got {}", n_columns * n3, f.size()));

    MomentTriple m;
    m.normalizer = 1.0 / second_moment(layers);
    m.zeroth.assign(n_columns, Sym2{});
    m.first.assign(n_columns, Sym2{});
    m.perp.assign(f.size(), Sym2{});
    for (int c = 0; c < n_columns; ++c) {
        Sym2 bar, hat;
        for (int k = 0; k < n3; ++k) {
            const Sym2& v = f[static_cast<std::size_t>(k) * n_columns + c];
            bar += layers.width[k] * v;
            hat += (layers.width[k] * layers.mid[k]) * v;
        }
        hat *= m.normalizer;
        m.zeroth[c] = bar;
        m.first[c] = hat;
        for (int k = 0; k < n3; ++k) {
            const std::size_t idx = static_cast<std::size_t>(k) * n_columns + c;
            m.perp[idx] = f[idx] - bar - layers.mid[k] * hat;
        }
    }
    return m;
}

MomentTriple moments(const std::vector<Sym2>& f, const PlateMesh& mesh) {
    return moments(f, mesh.num_columns(), Layering::uniform(mesh.n3()));
}

} // namespace plasthin
