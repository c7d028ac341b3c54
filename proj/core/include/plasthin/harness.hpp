#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "plasthin/discretization.hpp"
#include "plasthin/materials.hpp"
#include "plasthin/microstructure.hpp"
#include "plasthin/quasistatic_solver.hpp"

namespace plasthin {

inline constexpr const char* kConfigSchema = "plasthin/1";

struct MeshSpec {
    double L1 = 1.0, L2 = 1.0;
    bool by_period = false;   ///< resolution given per period instead of absolute
    int n1 = 8, n2 = 8;       ///< absolute resolution
    int cpp1 = 0, cpp2 = 0;   ///< mesh cells per period
    int n3 = 4;
};

struct MicroSpec {
    PhaseGenerator generator;
    int n_y = 8;
    std::string raster_file;  ///< optional; overrides the generator
};

struct LoadSpec {
    std::string preset = "stretch";  ///< zero | stretch | shear | bend | custom
    double amplitude = 1e-3;
    Quadratic2 w1, w2, w3;           ///< used by the custom preset
    TimeProfile profile;             ///< defaults to the ramp 0 -> 1 on [0, T]
    bool profile_given = false;
    double fd_step = 1e-3;
};

struct ScenarioConfig {
    MeshSpec mesh;
    MicroSpec micro;
    MaterialLibrary materials;
    double gamma = 1.0;
    std::vector<double> h{0.1};
    double T = 1.0;
    int n_steps = 10;
    LoadSpec load;
    SolverConfig solver;
    LinearSolverOptions linear;
    double audit_tol = 1e-7;  ///< relative, stress admissibility
    double work_tol = 1e-8;   ///< relative to the energy scale, plastic work slack
    int macro1 = 4, macro2 = 4;
    std::string output = "plasthin_out";

    double eps(double h) const { return h / gamma; }
    PlateMesh mesh_for(double h) const;
    PhaseMap phase_map() const;
    BoundaryDatum datum() const;
    MacroGrid macro_grid() const;
    /// Throws ConfigError when the scenario is inconsistent.
    void validate() const;
};

ScenarioConfig parse_config(const std::string& json_text);
ScenarioConfig load_config(const std::string& path);
/// Fully resolved configuration, defaults included, in the input schema.
std::string config_to_json(const ScenarioConfig& cfg);

struct RunOptions {
    std::string out_dir;                 ///< overrides the config's output directory when set
    std::optional<std::uint64_t> seed;   ///< overrides the config's seed when set
    int jobs = 1;
};

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int other = 1;
inline constexpr int config = 2;
inline constexpr int convergence = 3;
inline constexpr int audit = 4;
} // namespace exit_code

int cmd_simulate_h(const std::string& config_path, const RunOptions& opt);
int cmd_simulate_hom(const std::string& config_path, const RunOptions& opt);
int cmd_converge(const std::string& config_path, const RunOptions& opt);
int cmd_audit(const std::string& run_dir);

} // namespace plasthin
