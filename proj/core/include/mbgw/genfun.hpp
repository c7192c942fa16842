#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "mbgw/model.hpp"

namespace mbgw {

using Vec = std::vector<double>;

struct GenFunOptions {
    double ode_rtol = 1e-10;
    double ode_atol = 1e-12;
    int max_derivative_order = 8;
    double initial_step = 1e-3;
    double explosion_guard = 1e8;  // |state| beyond this is treated as blow-up
};

// Evaluation ray s(x) = base + x*dir. In theta mode base = e^{-theta},
// w = max base and dir = base / w, so the j-th x-derivative at 0 is
// E[N^{[j]} e^{-theta.Z}] / w^j. Point masses use base 0, dir 1.
struct Ray {
    Vec base;
    Vec dir;
    double w = 1.0;
    static Ray from_theta(const Vec& theta);
    static Ray from_s(double s, int d);  // theta = -log(s) * 1, valid at s = 0
};

// Taylor data of F_t along a ray: coef[m][n] = (1/n!) d^n/dx^n F_{t,m}(base + x dir) at x = 0.
struct TaylorData {
    std::vector<Vec> coef;
    double scaled_moment(int m, int j) const;  // j! coef[m][j]
};

class GenFunEngine {
public:
    explicit GenFunEngine(const ModelSpec& spec, GenFunOptions opt = {});

    const ModelSpec& spec() const { return spec_; }
    const GenFunOptions& options() const { return opt_; }
    int d() const { return spec_.d; }

    Vec F(double t, const Vec& s) const;
    double pgf_F(double t, int r, const Vec& s) const;
    double laplace_Z(double t, int m, const Vec& theta) const;

    TaylorData taylor(double t, const Ray& ray, int J) const;
    // E_m[N_t^{[j]} e^{-theta.Z_t}]
    double discounted_factorial_moment(double t, int m, int j, const Vec& theta) const;
    // Cross-check: Richardson-extrapolated central difference (step 1e-3) of the
    // order j-1 ray derivative, so that order j is tied to the order below it.
    double discounted_factorial_moment_fd(double t, int m, int j, const Vec& theta, double h = 1e-3) const;

    Eigen::MatrixXd jacobian(double t, const Vec& s) const;
    // E_r[Z_t^{(i)} prod_m s_m^{Z_t^{(m)} - delta_{im}}]
    double pgf_partial(double t, int r, int i, const Vec& s) const;

    // P_r(N_t = n) for n = 0..nmax from the Taylor ODE at base 0.
    Vec point_masses(double t, int r, int nmax) const;
    // 1 - sum_{n<k} P(N_t = n) using the uniformization oracle (truncation
    // raised until the cap mass is negligible), cross-checked with point_masses.
    double survival_ge_k(double t, int r, int k) const;

    // Right-hand sides, exposed for tables and tests.
    void rhs_F(const Vec& y, Vec& dy) const;
    void rhs_taylor(const Vec& c, Vec& dc, int J) const;
    void rhs_jacobian(const Vec& y, Vec& dy) const;  // y = [F (d), J (d*d row-major)]

    std::size_t cache_size() const;
    void clear_cache() const;

private:
    Vec integrate(Vec y0, double t, int kind, int J) const;

    ModelSpec spec_;
    GenFunOptions opt_;
    int max_count_ = 0;

    using Key = std::tuple<int, int, std::vector<long long>>;
    mutable std::mutex mu_;
    mutable std::map<Key, Vec> cache_;
    Vec cached(int kind, int J, double t, const Vec& a, const Vec& b, const std::function<Vec()>& compute) const;
};

// Dense solution over u in [0, T] along one ray: F_m(u), scaled moments
// D_{j,m}(u) = E_m[N_u^{[j]} e^{-theta.Z_u}] / w^j for j <= J and, optionally,
// the Jacobian of F_u at the ray base. Values come from cubic Hermite
// interpolation on a uniform grid whose nodes are exact ODE outputs.
class Trajectory {
public:
    Trajectory(const GenFunEngine& eng, double T, const Ray& ray, int J, int grid = 512, bool with_jacobian = false);

    double T() const { return T_; }
    int J() const { return J_; }
    const Ray& ray() const { return ray_; }
    double F(double u, int m) const;
    double D(double u, int j, int m) const;
    double dD(double u, int j, int m) const;  // derivative in u
    Eigen::MatrixXd jacobian(double u) const;
    // E_r[Z_t^{(i)} prod F_m(T-t)^{Z^{(m)}-delta_{im}}] for all (r,i), via J(T) J(T-t)^{-1}
    Eigen::MatrixXd mixed(double t) const;
    // Same over elapsed time b-a, discounted by F(T-b): rows start type, columns marked type.
    Eigen::MatrixXd mixed_between(double a, double b) const;

private:
    double interp(const std::vector<Vec>& val, const std::vector<Vec>& der, double u, int idx) const;
    double interp_der(const std::vector<Vec>& val, const std::vector<Vec>& der, double u, int idx) const;

    double T_;
    Ray ray_;
    int J_;
    int d_;
    int grid_;
    double h_;
    std::vector<Vec> tay_, tay_der_;  // per node: coef layout m*(J+1)+n
    std::vector<Vec> jac_, jac_der_;  // per node: [F, J]
    bool has_jac_;
};

}  // namespace mbgw
