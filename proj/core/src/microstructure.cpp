#include "plasthin/microstructure.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <fmt/core.h>

#include "plasthin/errors.hpp"

namespace plasthin {

PhaseGenerator PhaseGenerator::laminate(std::vector<double> fractions, double offset) {
    PhaseGenerator g;
    g.kind = GeneratorKind::Laminate;
    g.fractions = std::move(fractions);
    g.offset = offset;
    return g;
}

PhaseGenerator PhaseGenerator::checkerboard() {
    PhaseGenerator g;
    g.kind = GeneratorKind::Checkerboard;
    return g;
}

PhaseGenerator PhaseGenerator::inclusion(std::array<double, 2> center, double radius) {
    PhaseGenerator g;
    g.kind = GeneratorKind::Inclusion;
    g.center = center;
    g.radius = radius;
    return g;
}

PhaseGenerator PhaseGenerator::from_raster(std::vector<int> ids) {
    PhaseGenerator g;
    g.kind = GeneratorKind::Raster;
    g.raster = std::move(ids);
    return g;
}

PhaseMap::PhaseMap(int n_y, std::vector<int> ids, GeneratorKind kind)
    : m_n(n_y), m_ids(std::move(ids)), m_kind(kind) {
    if (n_y < 2) throw ConfigError(fmt::format("phase map resolution must be >= 2, got {}", n_y));
    if (m_ids.size() != static_cast<std::size_t>(n_y) * n_y)
        throw ConfigError(fmt::format("phase map needs {} cells, got {}", n_y * n_y, m_ids.size()));
    std::set<int> present(m_ids.begin(), m_ids.end());
    if (*present.begin() != 0 || *present.rbegin() != static_cast<int>(present.size()) - 1)
        throw ConfigError("phase ids must form a contiguous range starting at 0");
    m_n_phases = static_cast<int>(present.size());
}

double PhaseMap::volume_fraction(int p) const {
    const auto c = std::count(m_ids.begin(), m_ids.end(), p);
    return static_cast<double>(c) / static_cast<double>(m_ids.size());
}

namespace {

double frac(double y) {
    double f = y - std::floor(y);
    if (f >= 1.0) f = 0.0;
    return f;
}

int raster_index(double y, int n) {
    int i = static_cast<int>(std::floor(frac(y) * n));
    return std::clamp(i, 0, n - 1);
}

} // namespace

PhaseMap build_phase_map(const PhaseGenerator& gen, int n_y) {
    if (n_y < 2) throw ConfigError(fmt::format("phase map resolution must be >= 2, got {}", n_y));
    std::vector<int> ids(static_cast<std::size_t>(n_y) * n_y, 0);
    switch (gen.kind) {
    case GeneratorKind::Laminate: {
        if (gen.fractions.empty()) throw ConfigError("laminate needs at least one fraction");
        for (double f : gen.fractions)
            if (!(f > 0.0)) throw ConfigError("laminate fractions must be positive");
        const double sum = std::accumulate(gen.fractions.begin(), gen.fractions.end(), 0.0);
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError(fmt::format("laminate fractions sum to {}, not 1", sum));
        std::vector<double> cum;
        double acc = 0.0;
        for (double f : gen.fractions) cum.push_back(acc += f);
        for (int i = 0; i < n_y; ++i) {
            const double yc = frac((i + 0.5) / n_y - gen.offset);
            int p = 0;
            while (p + 1 < static_cast<int>(cum.size()) && yc >= cum[p]) ++p;
            for (int j = 0; j < n_y; ++j) ids[static_cast<std::size_t>(j) * n_y + i] = p;
        }
        break;
    }
    case GeneratorKind::Checkerboard:
        if (n_y % 2 != 0) throw ConfigError("checkerboard needs an even resolution");
        for (int j = 0; j < n_y; ++j)
            for (int i = 0; i < n_y; ++i)
                ids[static_cast<std::size_t>(j) * n_y + i] = ((2 * i) / n_y + (2 * j) / n_y) % 2;
        break;
    case GeneratorKind::Inclusion: {
        if (!(gen.radius > 0.0) || gen.radius >= 0.5)
            throw ConfigError(fmt::format("inclusion radius must lie in (0, 1/2), got {}", gen.radius));
        for (int j = 0; j < n_y; ++j)
            for (int i = 0; i < n_y; ++i) {
                double d1 = (i + 0.5) / n_y - gen.center[0];
                double d2 = (j + 0.5) / n_y - gen.center[1];
                d1 -= std::round(d1);
                d2 -= std::round(d2);
                ids[static_cast<std::size_t>(j) * n_y + i] = (d1 * d1 + d2 * d2 < gen.radius * gen.radius) ? 1 : 0;
            }
        break;
    }
    case GeneratorKind::Raster:
        if (gen.raster.size() != ids.size())
            throw ConfigError(fmt::format("raster has {} cells, resolution {} needs {}", gen.raster.size(), n_y,
                                          ids.size()));
        ids = gen.raster;
        break;
    }
    return PhaseMap(n_y, std::move(ids), gen.kind);
}

PhaseMap read_raster(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open raster file '{}'", path));
    int n = 0;
    if (!(in >> n) || n < 2) throw ConfigError(fmt::format("raster file '{}': bad resolution line", path));
    std::vector<int> ids(static_cast<std::size_t>(n) * n);
    for (auto& v : ids)
        if (!(in >> v)) throw ConfigError(fmt::format("raster file '{}': expected {} integers", path, n * n));
    std::string extra;
    if (in >> extra) throw ConfigError(fmt::format("raster file '{}': trailing data", path));
    return PhaseMap(n, std::move(ids), GeneratorKind::Raster);
}

int phase_at(const PhaseMap& pm, double y1, double y2) {
    const int n = pm.n_y();
    return pm.id(raster_index(y1, n), raster_index(y2, n));
}

int eps_phase_at(const PhaseMap& pm, double x1, double x2, double eps) {
    if (!(eps > 0.0)) throw InvalidParameter(fmt::format("period eps must be positive, got {}", eps));
    return phase_at(pm, x1 / eps, x2 / eps);
}

InterfaceSet interfaces(const PhaseMap& pm) {
    InterfaceSet out;
    const int n = pm.n_y();
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const int a = pm.id(i, j);
            for (int axis = 0; axis < 2; ++axis) {
                const int in = axis == 0 ? (i + 1) % n : i;
                const int jn = axis == 0 ? j : (j + 1) % n;
                const int b = pm.id(in, jn);
                if (a == b) continue;
                Facet f;
                f.axis = axis;
                f.position = static_cast<double>((axis == 0 ? i : j) + 1) / n;
                if (f.position >= 1.0) f.position -= 1.0;
                f.phase_i = std::min(a, b);
                f.phase_j = std::max(a, b);
                // the lower cell (i, j) sits on the negative side of the facet
                const bool lower_is_i = a < b;
                f.cell_i = lower_is_i ? std::array<int, 2>{i, j} : std::array<int, 2>{in, jn};
                f.cell_j = lower_is_i ? std::array<int, 2>{in, jn} : std::array<int, 2>{i, j};
                const double s = lower_is_i ? -1.0 : 1.0;
                f.normal = axis == 0 ? Vec3{s, 0.0, 0.0} : Vec3{0.0, s, 0.0};
                out.push_back(f);
            }
        }
    return out;
}

} // namespace plasthin
