#include "plasthin/materials.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <fmt/core.h>

#include "plasthin/errors.hpp"
#include "plasthin/tensor_kinematics.hpp"

namespace plasthin {

namespace {

const double kS2 = std::sqrt(2.0);
const double kS6 = std::sqrt(6.0);

// Golden-section minimization of a convex function on [lo, hi].
double golden_min(const std::function<double(double)>& f, double lo, double hi, double tol, double* fmin) {
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    const double x = 0.5 * (a + b);
    const double fx = f(x);
    // the end points of the bracket can beat the midpoint at a kink on the boundary
    double best = x, fbest = fx;
    for (double e : {lo, hi}) {
        const double fe = f(e);
        if (fe < fbest) {
            best = e;
            fbest = fe;
        }
    }
    if (fmin) *fmin = fbest;
    return best;
}

} // namespace

Vec5 dev_coords(const Sym3& xi) {
    Vec5 x;
    x(0) = (xi[0] - xi[1]) / kS2;
    x(1) = (xi[0] + xi[1] - 2.0 * xi[2]) / kS6;
    x(2) = kS2 * xi[3];
    x(3) = kS2 * xi[4];
    x(4) = kS2 * xi[5];
    return x;
}

Sym3 from_dev_coords(const Vec5& x) {
    Sym3 s;
    s[0] = x(0) / kS2 + x(1) / kS6;
    s[1] = -x(0) / kS2 + x(1) / kS6;
    s[2] = -2.0 * x(1) / kS6;
    s[3] = x(2) / kS2;
    s[4] = x(3) / kS2;
    s[5] = x(4) / kS2;
    return make_traceless(s);
}

Sym3 make_traceless(Sym3 xi) {
    xi[2] = -(xi[0] + xi[1]);
    return xi;
}

PhaseMaterial PhaseMaterial::make_isotropic(double two_mu, double k, double r_y) {
    PhaseMaterial m;
    m.isotropic = true;
    m.two_mu = two_mu;
    m.k = k;
    m.r_y = r_y;
    m.validate();
    return m;
}

PhaseMaterial PhaseMaterial::make_anisotropic(const Mat5& c_dev, double k, double r_y) {
    PhaseMaterial m;
    m.isotropic = false;
    m.c_dev = c_dev;
    m.k = k;
    m.r_y = r_y;
    m.validate();
    return m;
}

Mat5 PhaseMaterial::dev_matrix() const {
    if (isotropic) return two_mu * Mat5::Identity();
    return c_dev;
}

double PhaseMaterial::r_c() const {
    if (isotropic) return 0.5 * std::min(two_mu, 3.0 * k);
    Eigen::SelfAdjointEigenSolver<Mat5> es(c_dev);
    return 0.5 * std::min(es.eigenvalues().minCoeff(), 3.0 * k);
}

double PhaseMaterial::R_c() const {
    if (isotropic) return 0.5 * std::max(two_mu, 3.0 * k);
    Eigen::SelfAdjointEigenSolver<Mat5> es(c_dev);
    return 0.5 * std::max(es.eigenvalues().maxCoeff(), 3.0 * k);
}

void PhaseMaterial::validate() const {
    if (!(k > 0.0)) throw ConfigError(fmt::format("bulk modulus must be positive, got {}", k));
    if (!(r_y > 0.0)) throw ConfigError(fmt::format("yield radius must be positive, got {}", r_y));
    if (isotropic) {
        if (!(two_mu > 0.0)) throw ConfigError(fmt::format("2 mu_dev must be positive, got {}", two_mu));
        return;
    }
    if (!c_dev.isApprox(c_dev.transpose(), 1e-12)) throw ConfigError("c_dev must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat5> es(c_dev);
    if (!(es.eigenvalues().minCoeff() > 0.0)) throw ConfigError("c_dev must be positive definite");
}

void MaterialLibrary::validate() {
    if (phases.empty()) throw ConfigError("material library is empty");
    double lo = phases[0].r_y, hi = phases[0].r_y;
    for (const auto& p : phases) {
        p.validate();
        lo = std::min(lo, p.r_y);
        hi = std::max(hi, p.r_y);
    }
    if (r_K <= 0.0) r_K = lo;
    if (R_K <= 0.0) R_K = hi;
    if (r_K > lo * (1.0 + 1e-12) || R_K < hi * (1.0 - 1e-12))
        throw ConfigError(fmt::format("yield radii [{}, {}] fall outside the declared bounds [{}, {}]", lo, hi, r_K,
                                      R_K));
}

Sym3 elasticity_apply(const PhaseMaterial& m, const Sym3& xi) {
    const double tr = trace(xi);
    Sym3 d = dev(xi);
    Sym3 out = m.isotropic ? m.two_mu * d : from_dev_coords(m.c_dev * dev_coords(d));
    out[0] += m.k * tr;
    out[1] += m.k * tr;
    out[2] += m.k * tr;
    return out;
}

double quadratic_energy(const PhaseMaterial& m, const Sym3& xi) { return 0.5 * ddot(elasticity_apply(m, xi), xi); }

Mat6 energy_matrix(const PhaseMaterial& m) {
    Mat6 M;
    const double w[6] = {1, 1, 1, 2, 2, 2};
    for (int b = 0; b < 6; ++b) {
        Sym3 e;
        e[b] = 1.0;
        const Sym3 c = elasticity_apply(m, e);
        for (int a = 0; a < 6; ++a) M(a, b) = w[a] * c[a];
    }
    return 0.5 * (M + M.transpose());
}

double dissipation(const PhaseMaterial& m, const Sym3& q) {
    const double n = norm(q);
    if (std::abs(trace(q)) > 1e-10 * n)
        throw ConstraintViolation(fmt::format("dissipation needs a traceless argument, tr = {}", trace(q)));
    switch (m.yield) {
    case YieldKind::VonMises:
        return m.r_y * n;
    }
    return 0.0;
}

double interface_dissipation(const PhaseMaterial& mi, const PhaseMaterial& mj, const Vec3& a, const Vec3& nu,
                             double tol) {
    const double nn = norm(nu);
    if (std::abs(nn - 1.0) > 1e-10) throw ConstraintViolation("interface normal must have unit length");
    const double na = norm(a);
    if (std::abs(dot(a, nu)) > 1e-10 * std::max(1.0, na))
        throw ConstraintViolation("interface jump must be tangent to the interface");
    if (na == 0.0) return 0.0;

    // orthonormal basis (t1, t2) of the tangent plane; a = na t1 up to its roundoff normal part
    Vec3 t1 = (1.0 / na) * a;
    t1 = t1 - dot(t1, nu) * nu;
    t1 = (1.0 / norm(t1)) * t1;
    Vec3 t2{nu[1] * t1[2] - nu[2] * t1[1], nu[2] * t1[0] - nu[0] * t1[2], nu[0] * t1[1] - nu[1] * t1[0]};
    auto cost = [&](double s, double t) {
        const Vec3 ai = s * t1 + t * t2;
        const Vec3 aj = (s - na) * t1 + t * t2;
        return dissipation(mi, sym_odot(ai, nu)) + dissipation(mj, sym_odot(-1.0 * aj, nu));
    };
    // any minimizer beats the trivial split a_i = a, so |a_i| stays below R/r |a|
    const double ratio = std::max(mi.r_y, mj.r_y) / std::min(mi.r_y, mj.r_y);
    const double box = (ratio + 1.0) * na;
    const double ctol = std::max(tol, 1e-14 * na);
    auto inner = [&](double s) {
        double f = 0.0;
        golden_min([&](double t) { return cost(s, t); }, -box, box, ctol, &f);
        return f;
    };
    double best = 0.0;
    golden_min(inner, -box, box, ctol, &best);
    return std::min({best, cost(0.0, 0.0), cost(na, 0.0)});
}

Sym3 plastic_update(const PhaseMaterial& m, const Sym3& strain_total, const Sym3& p_prev) {
    if (m.isotropic) {
        const Sym3 s = m.two_mu * dev(strain_total - p_prev);
        const double ns = norm(s);
        if (ns <= m.r_y) return make_traceless(p_prev);
        return make_traceless(p_prev + ((1.0 - m.r_y / ns) / m.two_mu) * s);
    }
    // Anisotropic: with A = c_dev and z = dev coords of strain - p_prev, the increment d solves
    // (A + s I) d = A z with s |d| = r_y; s |d(s)| increases in s, so bisect on s.
    const Vec5 z = dev_coords(dev(strain_total)) - dev_coords(p_prev);
    const Mat5& A = m.c_dev;
    const Vec5 Az = A * z;
    if (Az.norm() <= m.r_y) return make_traceless(p_prev);
    Eigen::SelfAdjointEigenSolver<Mat5> es(A);
    const Vec5 lam = es.eigenvalues();
    const Vec5 c = es.eigenvectors().transpose() * Az;
    auto phi = [&](double s) {
        double acc = 0.0;
        for (int i = 0; i < 5; ++i) {
            const double di = c(i) / (lam(i) + s);
            acc += di * di;
        }
        return s * std::sqrt(acc);
    };
    double lo = 0.0, hi = lam.maxCoeff();
    while (phi(hi) < m.r_y) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (phi(mid) < m.r_y ? lo : hi) = mid;
    }
    const double s = 0.5 * (lo + hi);
    Vec5 d_eig;
    for (int i = 0; i < 5; ++i) d_eig(i) = c(i) / (lam(i) + s);
    const Vec5 d = es.eigenvectors() * d_eig;
    return make_traceless(p_prev + from_dev_coords(d));
}

bool in_yield_set(const PhaseMaterial& m, const Sym3& sigma_dev) { return norm(sigma_dev) <= m.r_y + 1e-10; }

} // namespace plasthin
