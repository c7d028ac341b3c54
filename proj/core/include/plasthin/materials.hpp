#pragma once

#include <vector>

#include <Eigen/Dense>

#include "plasthin/tensor.hpp"

namespace plasthin {

using Mat5 = Eigen::Matrix<double, 5, 5>;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Coordinates of a traceless tensor in a fixed Frobenius-orthonormal basis of M_dev.
Vec5 dev_coords(const Sym3& xi);
Sym3 from_dev_coords(const Vec5& x);

/// Forces tr = 0 by resetting the 33 entry.
Sym3 make_traceless(Sym3 xi);

enum class YieldKind { VonMises };

struct PhaseMaterial {
    bool isotropic = true;
    double two_mu = 2.0;        ///< deviatoric stiffness, isotropic case
    Mat5 c_dev = Mat5::Zero();  ///< deviatoric stiffness on the dev basis, anisotropic case
    double k = 1.0;             ///< bulk modulus
    YieldKind yield = YieldKind::VonMises;
    double r_y = 1.0;           ///< von Mises radius

    static PhaseMaterial make_isotropic(double two_mu, double k, double r_y);
    static PhaseMaterial make_anisotropic(const Mat5& c_dev, double k, double r_y);

    /// Deviatoric stiffness as a 5x5 matrix in both cases.
    Mat5 dev_matrix() const;
    /// Declared coercivity constants r_c |xi|^2 <= Q(xi) <= R_c |xi|^2.
    double r_c() const;
    double R_c() const;
    void validate() const;
};

struct MaterialLibrary {
    std::vector<PhaseMaterial> phases;
    double r_K = 0.0;  ///< declared global lower bound of the yield radii
    double R_K = 0.0;  ///< declared global upper bound

    const PhaseMaterial& operator[](int p) const { return phases.at(static_cast<std::size_t>(p)); }
    int size() const { return static_cast<int>(phases.size()); }
    /// Fills r_K / R_K from the phases when they are unset and checks every phase.
    void validate();
};

Sym3 elasticity_apply(const PhaseMaterial& m, const Sym3& xi);
double quadratic_energy(const PhaseMaterial& m, const Sym3& xi);
/// Matrix M with Q(xi) = s^T M s / 2 for the plain component vector s of xi.
Mat6 energy_matrix(const PhaseMaterial& m);

/// Support function of the yield set at a traceless q.
double dissipation(const PhaseMaterial& m, const Sym3& q);

/// inf { H_i(a_i (.) nu) + H_j(-a_j (.) nu) : a = a_i - a_j, a_i, a_j orthogonal to nu },
/// minimized numerically in the tangent plane to coordinate tolerance `tol`.
double interface_dissipation(const PhaseMaterial& mi, const PhaseMaterial& mj, const Vec3& a, const Vec3& nu,
                             double tol = 1e-10);

/// argmin over traceless p of Q(strain_total - p) + H(p - p_prev).
Sym3 plastic_update(const PhaseMaterial& m, const Sym3& strain_total, const Sym3& p_prev);

bool in_yield_set(const PhaseMaterial& m, const Sym3& sigma_dev);

} // namespace plasthin
