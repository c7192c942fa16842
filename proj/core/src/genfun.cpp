#include "mbgw/genfun.hpp"

#include <algorithm>
#include <cmath>

#include <boost/numeric/odeint.hpp>

#include "mbgw/combinat.hpp"
#include "mbgw/verify.hpp"

namespace mbgw {

namespace odeint = boost::numeric::odeint;
using Stepper = odeint::runge_kutta_dopri5<Vec>;

namespace {
enum Kind { kF = 0, kTaylor = 1, kJac = 2 };

long long quantise(double x) { return std::llround(x * 1e12); }

// a <- a * b truncated to n+1 terms
void series_mul(const double* a, const double* b, double* out, int J) {
    for (int n = 0; n <= J; ++n) {
        double s = 0.0;
        for (int i = 0; i <= n; ++i) s += a[i] * b[n - i];
        out[n] = s;
    }
}
}  // namespace

Ray Ray::from_theta(const Vec& theta) {
    Ray r;
    r.base.resize(theta.size());
    for (std::size_t m = 0; m < theta.size(); ++m) {
        if (theta[m] < 0.0) throw ValidationError("theta must be non-negative");
        r.base[m] = std::exp(-theta[m]);
    }
    r.w = *std::max_element(r.base.begin(), r.base.end());
    r.dir.resize(theta.size());
    for (std::size_t m = 0; m < theta.size(); ++m) r.dir[m] = r.base[m] / r.w;
    return r;
}

Ray Ray::from_s(double s, int d) {
    Ray r;
    r.base.assign(d, s);
    r.dir.assign(d, 1.0);
    r.w = s;
    return r;
}

double TaylorData::scaled_moment(int m, int j) const {
    double f = 1.0;
    for (int i = 2; i <= j; ++i) f *= i;
    return f * coef[m][j];
}

GenFunEngine::GenFunEngine(const ModelSpec& spec, GenFunOptions opt) : spec_(spec), opt_(opt) {
    if (!(opt_.ode_rtol > 0.0) || !(opt_.ode_atol > 0.0)) throw ValidationError("solver tolerances must be positive");
    for (const auto& law : spec_.offspring)
        for (const auto& a : law.atoms)
            for (int c : a.counts) max_count_ = std::max(max_count_, c);
}

void GenFunEngine::rhs_F(const Vec& y, Vec& dy) const {
    for (int m = 0; m < spec_.d; ++m) dy[m] = spec_.alpha[m] * (pgf_offspring(spec_, m, y) - y[m]);
}

void GenFunEngine::rhs_taylor(const Vec& c, Vec& dc, int J) const {
    const int d = spec_.d;
    const int L = J + 1;
    // powers[j][e] = (y_j)^e as truncated series
    thread_local std::vector<double> pw;
    pw.assign(static_cast<std::size_t>(d) * (max_count_ + 1) * L, 0.0);
    auto P = [&](int j, int e) { return pw.data() + (static_cast<std::size_t>(j) * (max_count_ + 1) + e) * L; };
    for (int j = 0; j < d; ++j) {
        P(j, 0)[0] = 1.0;
        for (int e = 1; e <= max_count_; ++e) series_mul(P(j, e - 1), c.data() + j * L, P(j, e), J);
    }
    thread_local std::vector<double> acc, tmp, f;
    acc.resize(L);
    tmp.resize(L);
    f.resize(L);
    for (int m = 0; m < d; ++m) {
        std::fill(f.begin(), f.end(), 0.0);
        for (const auto& a : spec_.offspring[m].atoms) {
            std::fill(acc.begin(), acc.end(), 0.0);
            acc[0] = 1.0;
            for (int j = 0; j < d; ++j) {
                if (a.counts[j] == 0) continue;
                series_mul(acc.data(), P(j, a.counts[j]), tmp.data(), J);
                std::swap(acc, tmp);
            }
            for (int n = 0; n < L; ++n) f[n] += a.p * acc[n];
        }
        for (int n = 0; n < L; ++n) dc[m * L + n] = spec_.alpha[m] * (f[n] - c[m * L + n]);
    }
}

void GenFunEngine::rhs_jacobian(const Vec& y, Vec& dy) const {
    const int d = spec_.d;
    Vec F(y.begin(), y.begin() + d);
    for (int m = 0; m < d; ++m) {
        dy[m] = spec_.alpha[m] * (pgf_offspring(spec_, m, F) - F[m]);
        Vec g = pgf_offspring_grad(spec_, m, F);
        for (int c = 0; c < d; ++c) {
            double s = -y[d + m * d + c];
            for (int j = 0; j < d; ++j) s += g[j] * y[d + j * d + c];
            dy[d + m * d + c] = spec_.alpha[m] * s;
        }
    }
}

Vec GenFunEngine::integrate(Vec y, double t, int kind, int J) const {
    if (t < 0.0) throw ValidationError("time must be non-negative");
    if (t == 0.0) return y;
    auto sys = [&](const Vec& x, Vec& dx, double) {
        if (kind == kF)
            rhs_F(x, dx);
        else if (kind == kTaylor)
            rhs_taylor(x, dx, J);
        else
            rhs_jacobian(x, dx);
    };
    const double guard = opt_.explosion_guard;
    auto obs = [&](const Vec& x, double tt) {
        for (double v : x)
            if (!std::isfinite(v) || std::abs(v) > guard)
                throw NumericError("generating-function ODE blew up at t=" + std::to_string(tt) +
                                   " (explosion guard)");
    };
    try {
        auto ctrl = odeint::make_controlled<Stepper>(opt_.ode_atol, opt_.ode_rtol);
        odeint::integrate_adaptive(ctrl, sys, y, 0.0, t, std::min(opt_.initial_step, t), obs);
    } catch (const NumericError&) {
        throw;
    } catch (const std::exception& e) {
        throw NumericError(std::string("ODE solver failed: ") + e.what());
    }
    return y;
}

Vec GenFunEngine::cached(int kind, int J, double t, const Vec& a, const Vec& b,
                         const std::function<Vec()>& compute) const {
    std::vector<long long> q;
    q.reserve(1 + a.size() + b.size());
    q.push_back(quantise(t));
    for (double x : a) q.push_back(quantise(x));
    for (double x : b) q.push_back(quantise(x));
    Key key{kind, J, std::move(q)};
    {
        std::lock_guard<std::mutex> lk(mu_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    Vec v = compute();
    std::lock_guard<std::mutex> lk(mu_);
    return cache_.emplace(std::move(key), std::move(v)).first->second;
}

std::size_t GenFunEngine::cache_size() const {
    std::lock_guard<std::mutex> lk(mu_);
    return cache_.size();
}

void GenFunEngine::clear_cache() const {
    std::lock_guard<std::mutex> lk(mu_);
    cache_.clear();
}

Vec GenFunEngine::F(double t, const Vec& s) const {
    if (static_cast<int>(s.size()) != spec_.d) throw ValidationError("s must have d entries");
    Vec out = cached(kF, 0, t, s, {}, [&] { return integrate(s, t, kF, 0); });
    bool unit = std::all_of(s.begin(), s.end(), [](double x) { return x >= 0.0 && x <= 1.0; });
    if (unit) {
        for (double& v : out) {
            if (v > 1.0 + 10 * opt_.ode_atol || v < -10 * opt_.ode_atol)
                throw NumericError("pgf overshoot beyond solver tolerance");
            v = std::clamp(v, 0.0, 1.0);
        }
    }
    return out;
}

double GenFunEngine::pgf_F(double t, int r, const Vec& s) const { return F(t, s).at(r); }

double GenFunEngine::laplace_Z(double t, int m, const Vec& theta) const {
    Vec s(theta.size());
    for (std::size_t j = 0; j < theta.size(); ++j) {
        if (theta[j] < 0.0) throw ValidationError("theta must be non-negative");
        s[j] = std::exp(-theta[j]);
    }
    return pgf_F(t, m, s);
}

TaylorData GenFunEngine::taylor(double t, const Ray& ray, int J) const {
    if (J > opt_.max_derivative_order)
        throw ValidationError("derivative order " + std::to_string(J) + " exceeds configured maximum");
    const int d = spec_.d;
    const int L = J + 1;
    Vec flat = cached(kTaylor, J, t, ray.base, ray.dir, [&] {
        Vec c(static_cast<std::size_t>(d) * L, 0.0);
        for (int m = 0; m < d; ++m) {
            c[m * L] = ray.base[m];
            if (J >= 1) c[m * L + 1] = ray.dir[m];
        }
        return integrate(c, t, kTaylor, J);
    });
    TaylorData out;
    out.coef.resize(d);
    for (int m = 0; m < d; ++m) out.coef[m].assign(flat.begin() + m * L, flat.begin() + (m + 1) * L);
    return out;
}

double GenFunEngine::discounted_factorial_moment(double t, int m, int j, const Vec& theta) const {
    Ray ray = Ray::from_theta(theta);
    TaylorData td = taylor(t, ray, std::max(j, 1));
    return td.scaled_moment(m, j) * std::pow(ray.w, j);
}

double GenFunEngine::discounted_factorial_moment_fd(double t, int m, int j, const Vec& theta, double h) const {
    if (j == 0) return laplace_Z(t, m, theta);
    Ray ray = Ray::from_theta(theta);
    // g(x) = (j-1)-th derivative of H at x, H(x) = F_{t,m}(x e^{-theta})
    auto g = [&](double x) {
        Ray r2;
        r2.base.resize(ray.base.size());
        r2.dir.resize(ray.base.size());
        for (std::size_t q = 0; q < ray.base.size(); ++q) {
            r2.base[q] = x * ray.base[q];
            r2.dir[q] = ray.base[q];
        }
        r2.w = 1.0;
        double f = 1.0;
        for (int i = 2; i <= j - 1; ++i) f *= i;
        Vec c(static_cast<std::size_t>(spec_.d) * j, 0.0);
        for (int q = 0; q < spec_.d; ++q) {
            c[q * j] = r2.base[q];
            if (j >= 2) c[q * j + 1] = r2.dir[q];
        }
        Vec out = integrate(c, t, kTaylor, j - 1);
        return f * out[m * j + (j - 1)];
    };
    auto central = [&](double step) { return (g(1.0 + step) - g(1.0 - step)) / (2.0 * step); };
    double d1 = central(h), d2 = central(h / 2.0);
    return (4.0 * d2 - d1) / 3.0;
}

Eigen::MatrixXd GenFunEngine::jacobian(double t, const Vec& s) const {
    const int d = spec_.d;
    Vec y0(d + d * d, 0.0);
    for (int m = 0; m < d; ++m) {
        y0[m] = s[m];
        y0[d + m * d + m] = 1.0;
    }
    Vec y = cached(kJac, 0, t, s, {}, [&] { return integrate(y0, t, kJac, 0); });
    Eigen::MatrixXd Jm(d, d);
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) Jm(a, b) = y[d + a * d + b];
    return Jm;
}

double GenFunEngine::pgf_partial(double t, int r, int i, const Vec& s) const {
    for (double x : s)
        if (!(x > 0.0) || x > 1.0) throw ValidationError("pgf_partial requires s in (0,1]^d");
    return jacobian(t, s)(r, i);
}

Vec GenFunEngine::point_masses(double t, int r, int nmax) const {
    Ray ray = Ray::from_s(0.0, spec_.d);
    TaylorData td;
    if (nmax > opt_.max_derivative_order) {
        GenFunOptions wide = opt_;
        wide.max_derivative_order = nmax;
        GenFunEngine eng(spec_, wide);
        td = eng.taylor(t, ray, nmax);
    } else {
        td = taylor(t, ray, nmax);
    }
    return td.coef[r];
}

double GenFunEngine::survival_ge_k(double t, int r, int k) const {
    if (k < 1) throw ValidationError("k must be >= 1");
    OracleResult best;
    bool ok = false;
    for (int nmax = std::max(20 * k, 40); nmax <= 4000; nmax *= 2) {
        try {
            best = oracle_uniformization(spec_, t, r, OracleFunctional::point_masses(k - 1), nmax);
        } catch (const ValidationError&) {
            break;  // state budget exceeded
        }
        ok = true;
        if (best.truncation_bound < 1e-14) break;
    }
    if (!ok) throw NumericError("survival_ge_k: uniformization oracle infeasible for this model");
    double below = 0.0;
    for (double p : best.values) below += p;
    return 1.0 - below;
}

// ---------------------------------------------------------------- Trajectory

Trajectory::Trajectory(const GenFunEngine& eng, double T, const Ray& ray, int J, int grid, bool with_jacobian)
    : T_(T), ray_(ray), J_(J), d_(eng.d()), grid_(grid), h_(T / grid), has_jac_(with_jacobian) {
    if (!(T > 0.0)) throw ValidationError("trajectory horizon must be positive");
    const int L = J + 1;
    const auto& opt = eng.options();
    std::vector<double> times(grid + 1);
    for (int n = 0; n <= grid; ++n) times[n] = n * h_;
    times[grid] = T;

    auto run = [&](Vec y0, auto&& rhs, std::vector<Vec>& vals, std::vector<Vec>& ders) {
        vals.clear();
        ders.clear();
        auto sys = [&](const Vec& x, Vec& dx, double) { rhs(x, dx); };
        auto obs = [&](const Vec& x, double) {
            for (double v : x)
                if (!std::isfinite(v) || std::abs(v) > opt.explosion_guard)
                    throw NumericError("trajectory ODE blew up");
            vals.push_back(x);
            Vec dx(x.size());
            rhs(x, dx);
            ders.push_back(std::move(dx));
        };
        try {
            auto ctrl = odeint::make_controlled<Stepper>(opt.ode_atol, opt.ode_rtol);
            odeint::integrate_times(ctrl, sys, y0, times.begin(), times.end(), std::min(1e-3, h_), obs);
        } catch (const NumericError&) {
            throw;
        } catch (const std::exception& e) {
            throw NumericError(std::string("ODE solver failed: ") + e.what());
        }
        if (static_cast<int>(vals.size()) != grid + 1) throw NumericError("trajectory output incomplete");
    };

    Vec c(static_cast<std::size_t>(d_) * L, 0.0);
    for (int m = 0; m < d_; ++m) {
        c[m * L] = ray.base[m];
        if (J >= 1) c[m * L + 1] = ray.dir[m];
    }
    run(c, [&](const Vec& x, Vec& dx) { eng.rhs_taylor(x, dx, J); }, tay_, tay_der_);
    if (has_jac_) {
        Vec y0(d_ + d_ * d_, 0.0);
        for (int m = 0; m < d_; ++m) {
            y0[m] = ray.base[m];
            y0[d_ + m * d_ + m] = 1.0;
        }
        run(y0, [&](const Vec& x, Vec& dx) { eng.rhs_jacobian(x, dx); }, jac_, jac_der_);
    }
}

double Trajectory::interp(const std::vector<Vec>& val, const std::vector<Vec>& der, double u, int idx) const {
    u = std::clamp(u, 0.0, T_);
    int n = std::min(static_cast<int>(u / h_), grid_ - 1);
    double u0 = n * h_;
    double hh = (n + 1 == grid_ ? T_ : (n + 1) * h_) - u0;
    double s = (u - u0) / hh;
    double s2 = s * s, s3 = s2 * s;
    double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    return h00 * val[n][idx] + h10 * hh * der[n][idx] + h01 * val[n + 1][idx] + h11 * hh * der[n + 1][idx];
}

double Trajectory::interp_der(const std::vector<Vec>& val, const std::vector<Vec>& der, double u, int idx) const {
    u = std::clamp(u, 0.0, T_);
    int n = std::min(static_cast<int>(u / h_), grid_ - 1);
    double u0 = n * h_;
    double hh = (n + 1 == grid_ ? T_ : (n + 1) * h_) - u0;
    double s = (u - u0) / hh;
    double s2 = s * s;
    double d00 = 6 * s2 - 6 * s, d10 = 3 * s2 - 4 * s + 1, d01 = -6 * s2 + 6 * s, d11 = 3 * s2 - 2 * s;
    return (d00 * val[n][idx] + d01 * val[n + 1][idx]) / hh + d10 * der[n][idx] + d11 * der[n + 1][idx];
}

double Trajectory::F(double u, int m) const { return interp(tay_, tay_der_, u, m * (J_ + 1)); }

double Trajectory::D(double u, int j, int m) const {
    if (j > J_) throw ValidationError("trajectory order exceeded");
    double f = 1.0;
    for (int i = 2; i <= j; ++i) f *= i;
    return f * interp(tay_, tay_der_, u, m * (J_ + 1) + j);
}

double Trajectory::dD(double u, int j, int m) const {
    double f = 1.0;
    for (int i = 2; i <= j; ++i) f *= i;
    return f * interp_der(tay_, tay_der_, u, m * (J_ + 1) + j);
}

Eigen::MatrixXd Trajectory::jacobian(double u) const {
    if (!has_jac_) throw ValidationError("trajectory built without Jacobian");
    Eigen::MatrixXd Jm(d_, d_);
    for (int a = 0; a < d_; ++a)
        for (int b = 0; b < d_; ++b) Jm(a, b) = interp(jac_, jac_der_, u, d_ + a * d_ + b);
    return Jm;
}

Eigen::MatrixXd Trajectory::mixed(double t) const { return mixed_between(0.0, t); }

Eigen::MatrixXd Trajectory::mixed_between(double a, double b) const {
    // J_{b-a}(F_{T-b}(base)) = J_{T-a}(base) J_{T-b}(base)^{-1}
    Eigen::MatrixXd Ja = jacobian(T_ - a);
    Eigen::MatrixXd Jb = jacobian(T_ - b);
    return Ja * Jb.inverse();
}

}  // namespace mbgw
