#include "plasthin/unfolding.hpp"

#include <cmath>
#include <random>

#include <fmt/core.h>

#include "plasthin/errors.hpp"

namespace plasthin {

namespace {

const double kPi = 3.14159265358979323846;

// mesh-cell range [first, first + count) feeding raster cell i of eps-cell c along one axis
struct AxisMap {
    int m = 0;  // mesh cells per eps-cell
    int n_y = 0;
    int first(int c, int i) const { return m >= n_y ? c * m + i * (m / n_y) : c * m + i / (n_y / m); }
    int count() const { return m >= n_y ? m / n_y : 1; }
};

AxisMap axis_map(double eps, double d, int n_y, const char* axis) {
    const double ratio = eps / d;
    const int m = static_cast<int>(std::lround(ratio));
    if (m < 1 || std::abs(ratio - m) > 1e-9 * std::max(1.0, ratio))
        throw ConfigError(fmt::format("eps = {} is not an integer multiple of the {} spacing {}", eps, axis, d));
    if (!(m % n_y == 0 || n_y % m == 0))
        throw ConfigError(fmt::format("{} mesh cells per eps-cell along {} and raster {} are not nested", m, axis, n_y));
    return {m, n_y};
}

template <class Get, class Abs>
UnfoldedField unfold_impl(int n_values, const PlateMesh& mesh, double eps, int n_y, bool scalar, Get get, Abs absval) {
    if (!(eps > 0.0)) throw InvalidParameter(fmt::format("eps must be positive, got {}", eps));
    if (n_y < 1) throw InvalidParameter("raster resolution must be positive");
    if (n_values != mesh.num_cells())
        throw ShapeError(fmt::format("field has {} cells, mesh has {}", n_values, mesh.num_cells()));
    const AxisMap ax = axis_map(eps, mesh.dx(), n_y, "x1");
    const AxisMap ay = axis_map(eps, mesh.dy(), n_y, "x2");

    UnfoldedField u;
    u.n1 = mesh.n1() / ax.m;
    u.n2 = mesh.n2() / ay.m;
    u.n3 = mesh.n3();
    u.n_y = n_y;
    u.eps = eps;
    u.scalar = scalar;
    u.values.assign(static_cast<std::size_t>(u.n1) * u.n2 * u.n3 * n_y * n_y, Sym3{});
    const double inv = 1.0 / (ax.count() * ay.count());
    for (int c2 = 0; c2 < u.n2; ++c2)
        for (int c1 = 0; c1 < u.n1; ++c1)
            for (int k = 0; k < u.n3; ++k)
                for (int j = 0; j < n_y; ++j)
                    for (int i = 0; i < n_y; ++i) {
                        Sym3 acc;
                        for (int b = 0; b < ay.count(); ++b)
                            for (int a = 0; a < ax.count(); ++a)
                                acc += get(mesh.cell(ax.first(c1, i) + a, ay.first(c2, j) + b, k));
                        u.at(c1, c2, k, i, j) = inv * acc;
                    }
    const int cov1 = u.n1 * ax.m, cov2 = u.n2 * ay.m;
    for (int k = 0; k < mesh.n3(); ++k)
        for (int j = 0; j < mesh.n2(); ++j)
            for (int i = 0; i < mesh.n1(); ++i)
                if (i >= cov1 || j >= cov2) u.excluded_mass += absval(mesh.cell(i, j, k)) * mesh.cell_volume();
    return u;
}

} // namespace

Sym3 UnfoldedField::mass() const {
    Sym3 s;
    for (const auto& v : values) s += v;
    return weight() * s;
}

UnfoldedField unfold(const CellTensorField& f, const PlateMesh& mesh, double eps, int n_y) {
    return unfold_impl(
        static_cast<int>(f.size()), mesh, eps, n_y, false, [&](int c) { return f[c]; },
        [&](int c) { return norm(f[c]); });
}

UnfoldedField unfold(const std::vector<double>& f, const PlateMesh& mesh, double eps, int n_y) {
    return unfold_impl(
        static_cast<int>(f.size()), mesh, eps, n_y, true,
        [&](int c) {
            Sym3 s;
            s[0] = f[c];
            return s;
        },
        [&](int c) { return std::abs(f[c]); });
}

double two_scale_gap(const UnfoldedField& a, const UnfoldedField& b) {
    if (a.n1 != b.n1 || a.n2 != b.n2 || a.n3 != b.n3 || a.n_y != b.n_y || a.scalar != b.scalar ||
        a.values.size() != b.values.size() || std::abs(a.eps - b.eps) > 1e-12 * a.eps)
        throw ShapeError("two_scale_gap: unfolded grids differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        s += a.scalar ? std::abs(a.values[i][0] - b.values[i][0]) : norm(a.values[i] - b.values[i]);
    return s * a.weight();
}

void write_csv(const UnfoldedField& f, std::ostream& os) {
    static const char* names[6] = {"11", "22", "33", "12", "13", "23"};
    os << "i1,i2,layer,y1,y2,component,value\n";
    const int ncomp = f.scalar ? 1 : 6;
    for (int c2 = 0; c2 < f.n2; ++c2)
        for (int c1 = 0; c1 < f.n1; ++c1)
            for (int k = 0; k < f.n3; ++k)
                for (int j = 0; j < f.n_y; ++j)
                    for (int i = 0; i < f.n_y; ++i)
                        for (int q = 0; q < ncomp; ++q)
                            os << fmt::format("{},{},{},{:.17g},{:.17g},{},{:.17g}\n", c1, c2, k, (i + 0.5) / f.n_y,
                                              (j + 0.5) / f.n_y, f.scalar ? "s" : names[q], f.at(c1, c2, k, i, j)[q]);
}

UnfoldedField sample_two_scale(const HomProblem& problem, const CellTensorField& E, const UnfoldedField& like) {
    if (like.n3 != problem.n3() || like.n_y != problem.n_y())
        throw ShapeError("sample_two_scale: layer count or raster resolution differs from the two-scale grid");
    if (E.size() != static_cast<std::size_t>(problem.num_total_cells()))
        throw ShapeError("sample_two_scale: field does not live on the two-scale grid");
    UnfoldedField out = like;
    out.excluded_mass = 0.0;
    const MacroGrid& g = problem.grid();
    const int nm = problem.micro_cells();
    for (int c2 = 0; c2 < like.n2; ++c2)
        for (int c1 = 0; c1 < like.n1; ++c1) {
            const double x1 = (c1 + 0.5) * like.eps, x2 = (c2 + 0.5) * like.eps;
            const int I = std::clamp(static_cast<int>(std::floor(x1 / g.dx())), 0, g.m1 - 1);
            const int J = std::clamp(static_cast<int>(std::floor(x2 / g.dy())), 0, g.m2 - 1);
            const std::size_t base = static_cast<std::size_t>(J * g.m1 + I) * nm;
            for (int k = 0; k < like.n3; ++k)
                for (int j = 0; j < like.n_y; ++j)
                    for (int i = 0; i < like.n_y; ++i) out.at(c1, c2, k, i, j) = E[base + problem.micro_cell(i, j, k)];
        }
    return out;
}

std::vector<Vec3> random_fourier_field(int n_y, int n3, std::uint64_t seed, int max_mode) {
    if (n_y < 1 || n3 < 1) throw InvalidParameter("random_fourier_field needs positive resolutions");
    struct Mode {
        int k1, k2, deg, comp;
        double a, b;
    };
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<Mode> modes;
    for (int comp = 0; comp < 3; ++comp)
        for (int k1 = -max_mode; k1 <= max_mode; ++k1)
            for (int k2 = -max_mode; k2 <= max_mode; ++k2)
                for (int deg = 0; deg <= 2; ++deg) {
                    const double decay = 1.0 / (1.0 + k1 * k1 + k2 * k2 + deg * deg);
                    modes.push_back({k1, k2, deg, comp, decay * nd(rng), decay * nd(rng)});
                }
    std::vector<Vec3> u(static_cast<std::size_t>(n_y) * n_y * (n3 + 1));
    for (int k = 0; k <= n3; ++k) {
        const double x3 = -0.5 + static_cast<double>(k) / n3;
        const double leg[3] = {1.0, 2.0 * x3, 0.5 * (3.0 * 4.0 * x3 * x3 - 1.0)};
        for (int j = 0; j < n_y; ++j)
            for (int i = 0; i < n_y; ++i) {
                const double y1 = static_cast<double>(i) / n_y, y2 = static_cast<double>(j) / n_y;
                Vec3 v;
                for (const auto& md : modes) {
                    const double ph = 2.0 * kPi * (md.k1 * y1 + md.k2 * y2);
                    v[md.comp] += leg[md.deg] * (md.a * std::cos(ph) + md.b * std::sin(ph));
                }
                u[(static_cast<std::size_t>(k) * n_y + j) * n_y + i] = v;
            }
    }
    return u;
}

double poincare_korn_ratio(const std::vector<Vec3>& u, int n_y, int n3, double gamma) {
    const CellTensorField e = assemble_Etilde_gamma(u, n_y, n3, gamma);
    const int nc = n_y * n_y * n3;
    std::vector<Vec3> cen(nc);
    Vec3 mean;
    for (int m = 0; m < nc; ++m) {
        const int i = m % n_y, j = (m / n_y) % n_y, k = m / (n_y * n_y);
        Vec3 acc;
        for (int c = 0; c < 2; ++c)
            for (int b = 0; b < 2; ++b)
                for (int a = 0; a < 2; ++a)
                    acc += u[(static_cast<std::size_t>(k + c) * n_y + (j + b) % n_y) * n_y + (i + a) % n_y];
        cen[m] = 0.125 * acc;
        mean += cen[m];
    }
    mean *= 1.0 / nc;
    double num = 0.0, den = 0.0;
    for (int m = 0; m < nc; ++m) {
        num += norm(cen[m] - mean);
        den += norm(e[m]);
    }
    if (den == 0.0) throw InvalidParameter("poincare_korn_ratio: field has zero symmetric gradient");
    return num / den;
}

} // namespace plasthin
