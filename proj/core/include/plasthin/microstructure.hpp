#pragma once

#include <array>
#include <string>
#include <vector>

#include "plasthin/tensor.hpp"

namespace plasthin {

enum class GeneratorKind { Laminate, Checkerboard, Inclusion, Raster };

struct PhaseGenerator {
    GeneratorKind kind = GeneratorKind::Laminate;
    std::vector<double> fractions{0.5, 0.5};  ///< laminate: stripe widths along y1
    double offset = 0.0;                      ///< laminate: shift of the stripe pattern along y1
    std::array<double, 2> center{0.5, 0.5};   ///< inclusion
    double radius = 0.25;                     ///< inclusion
    std::vector<int> raster;                  ///< custom raster, row-major (row = y2 index)

    static PhaseGenerator laminate(std::vector<double> fractions, double offset = 0.0);
    static PhaseGenerator checkerboard();
    static PhaseGenerator inclusion(std::array<double, 2> center, double radius);
    static PhaseGenerator from_raster(std::vector<int> ids);
};

/// Raster of the periodicity cell Y = [0,1)^2. Cell (i, j) covers
/// [i/N, (i+1)/N) x [j/N, (j+1)/N) and is stored at index j*N + i.
class PhaseMap {
public:
    PhaseMap() = default;
    PhaseMap(int n_y, std::vector<int> ids, GeneratorKind kind);

    int n_y() const { return m_n; }
    int n_phases() const { return m_n_phases; }
    GeneratorKind generator() const { return m_kind; }
    int id(int i, int j) const { return m_ids[static_cast<std::size_t>(j) * m_n + i]; }
    const std::vector<int>& ids() const { return m_ids; }
    /// Fraction of cells carrying phase p.
    double volume_fraction(int p) const;

private:
    int m_n = 0;
    int m_n_phases = 0;
    std::vector<int> m_ids;
    GeneratorKind m_kind = GeneratorKind::Raster;
};

PhaseMap build_phase_map(const PhaseGenerator& gen, int n_y);

/// Reads "N" then N rows of N integers; row r holds y2 index r.
PhaseMap read_raster(const std::string& path);

/// Phase of the raster cell containing y mod 1.
int phase_at(const PhaseMap& pm, double y1, double y2);
/// phase_at(x / eps).
int eps_phase_at(const PhaseMap& pm, double x1, double x2, double eps);

struct Facet {
    std::array<int, 2> cell_i{};  ///< raster cell on the phase-i side
    std::array<int, 2> cell_j{};  ///< raster cell on the phase-j side
    Vec3 normal;                  ///< unit normal pointing from the j side to the i side
    int phase_i = 0;              ///< smaller phase id
    int phase_j = 0;
    int axis = 0;                 ///< 0: facet on a line y1 = const, 1: y2 = const
    double position = 0.0;        ///< that constant, in [0, 1)
};

using InterfaceSet = std::vector<Facet>;

InterfaceSet interfaces(const PhaseMap& pm);

} // namespace plasthin
