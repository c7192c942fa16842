#include "mbgw/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace mbgw {

int OffspringLaw::max_total() const {
    int best = 0;
    for (const auto& a : atoms) {
        int s = 0;
        for (int c : a.counts) s += c;
        best = std::max(best, s);
    }
    return best;
}

double OffspringLaw::prob(const Counts& l) const {
    for (const auto& a : atoms)
        if (a.counts == l) return a.p;
    return 0.0;
}

void ModelSpec::check_structure() const {
    if (d < 1) throw ValidationError("d must be >= 1");
    if (static_cast<int>(alpha.size()) != d) throw ValidationError("alpha must have d entries");
    for (int m = 0; m < d; ++m)
        if (!(alpha[m] > 0.0) || !std::isfinite(alpha[m]))
            throw ValidationError("alpha[" + std::to_string(m + 1) + "] must be positive and finite");
    if (static_cast<int>(offspring.size()) != d)
        throw ValidationError("offspring must list one law per type");
    for (int m = 0; m < d; ++m) {
        const auto& law = offspring[m];
        if (law.atoms.empty())
            throw ValidationError("offspring law of type " + std::to_string(m + 1) + " is empty");
        std::set<Counts> seen;
        double sum = 0.0;
        for (const auto& a : law.atoms) {
            if (static_cast<int>(a.counts.size()) != d)
                throw ValidationError("offspring counts must have d entries (type " + std::to_string(m + 1) + ")");
            for (int c : a.counts)
                if (c < 0) throw ValidationError("negative offspring count (type " + std::to_string(m + 1) + ")");
            if (!std::isfinite(a.p) || a.p < 0.0 || a.p > 1.0)
                throw ValidationError("probability outside [0,1] (type " + std::to_string(m + 1) + ")");
            if (!seen.insert(a.counts).second)
                throw ValidationError("duplicate counts vector (type " + std::to_string(m + 1) + ")");
            sum += a.p;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw ValidationError("probabilities of type " + std::to_string(m + 1) + " sum to " +
                                  std::to_string(sum));
    }
    if (static_cast<int>(xi.size()) != d) throw ValidationError("xi must have d entries");
    double xs = 0.0;
    for (double x : xi) {
        if (!(x > 0.0) || !std::isfinite(x)) throw ValidationError("xi entries must be positive");
        xs += x;
    }
    if (std::abs(xs - 1.0) > 1e-12) throw ValidationError("xi must sum to 1");
}

std::string ModelSpec::hash() const {
    // FNV-1a over a canonical rendering; stable across platforms.
    std::string s = std::to_string(d);
    char buf[40];
    auto put = [&](double x) {
        std::snprintf(buf, sizeof buf, "|%a", x);
        s += buf;
    };
    for (double a : alpha) put(a);
    for (const auto& law : offspring)
        for (const auto& a : law.atoms) {
            s += ";";
            for (int c : a.counts) s += std::to_string(c) + ",";
            put(a.p);
        }
    s += xi_perron ? "perron" : "";
    for (double x : xi) put(x);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

const char* to_string(Classification c) {
    switch (c) {
        case Classification::subcritical: return "subcritical";
        case Classification::critical: return "critical";
        case Classification::supercritical: return "supercritical";
    }
    return "?";
}

const char* to_string(SavitsStatus s) {
    switch (s) {
        case SavitsStatus::holds: return "holds";
        case SavitsStatus::fails: return "fails";
        case SavitsStatus::not_applicable: return "not_applicable";
    }
    return "?";
}

bool strongly_connected(const Eigen::MatrixXd& adj) {
    const int n = static_cast<int>(adj.rows());
    auto reach = [&](bool forward) {
        std::vector<char> seen(n, 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int v = 0; v < n; ++v) {
                double w = forward ? adj(u, v) : adj(v, u);
                if (w > 0.0 && !seen[v]) {
                    seen[v] = 1;
                    stack.push_back(v);
                }
            }
        }
        return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
    };
    return reach(true) && reach(false);
}

MeanMatrixData mean_matrix(const ModelSpec& spec) {
    const int d = spec.d;
    MeanMatrixData out;
    out.M = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < d; ++i)
        for (const auto& a : spec.offspring[i].atoms)
            for (int j = 0; j < d; ++j) out.M(i, j) += a.counts[j] * a.p;
    Eigen::VectorXd al = Eigen::Map<const Eigen::VectorXd>(spec.alpha.data(), d);
    out.C = al.asDiagonal() * (out.M - Eigen::MatrixXd::Identity(d, d));

    // Power iteration on the non-negative shift C + sI.
    const double shift = al.maxCoeff() + 1.0;
    Eigen::MatrixXd A = out.C + shift * Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd x = Eigen::VectorXd::Constant(d, 1.0 / d);
    double lam = 0.0;
    for (int it = 0; it < 20000; ++it) {
        Eigen::VectorXd y = A * x;
        double nl = y.sum();
        y /= nl;
        double diff = (y - x).cwiseAbs().maxCoeff();
        x = y;
        lam = nl;
        if (diff < 1e-15) break;
    }
    double rho = lam - shift;

    // Inverse iteration refinement.
    for (int it = 0; it < 6; ++it) {
        double mu = rho + 1e-9 * (1.0 + std::abs(rho));
        Eigen::MatrixXd B = out.C - mu * Eigen::MatrixXd::Identity(d, d);
        Eigen::VectorXd y = B.partialPivLu().solve(x);
        if (!y.allFinite() || y.sum() == 0.0) break;
        y /= y.sum();
        x = y;
        Eigen::VectorXd cx = out.C * x;
        rho = x.dot(cx) / x.dot(x);
    }
    for (int j = 0; j < d; ++j)
        if (x(j) < 0.0 && x(j) > -1e-14) x(j) = 0.0;
    out.rho = rho;
    out.xi_perron = x / x.sum();
    if (std::abs(rho) <= 1e-12)
        out.classification = Classification::critical;
    else
        out.classification = rho < 0 ? Classification::subcritical : Classification::supercritical;
    out.reducible = !strongly_connected(out.M);
    if (out.reducible) out.note = "non-unique eigenvector possible";
    return out;
}

double pgf_offspring(const ModelSpec& spec, int i, const std::vector<double>& r) {
    double f = 0.0;
    for (const auto& a : spec.offspring[i].atoms) {
        double term = a.p;
        for (int j = 0; j < spec.d; ++j)
            if (a.counts[j]) term *= std::pow(r[j], a.counts[j]);
        f += term;
    }
    return f;
}

std::vector<double> pgf_offspring_grad(const ModelSpec& spec, int i, const std::vector<double>& r) {
    std::vector<double> g(spec.d, 0.0);
    for (const auto& a : spec.offspring[i].atoms) {
        for (int j = 0; j < spec.d; ++j) {
            if (a.counts[j] == 0) continue;
            double term = a.p * a.counts[j] * std::pow(r[j], a.counts[j] - 1);
            for (int m = 0; m < spec.d; ++m)
                if (m != j && a.counts[m]) term *= std::pow(r[m], a.counts[m]);
            g[j] += term;
        }
    }
    return g;
}

SavitsResult savits_integral(const std::function<double(double)>& fbar, double quad_tol, double delta) {
    using boost::math::quadrature::gauss_kronrod;
    SavitsResult res;
    auto integrand = [&](double s) { return 1.0 / (s - fbar(s)); };
    const double a = 1.0 - delta;
    for (int i = 0; i <= 64; ++i) {
        double s = a + delta * i / 64.0 * (1.0 - 1e-15);
        if (s - fbar(s) <= 0.0 && s < 1.0) {
            res.integral = res.status = SavitsStatus::fails;
            res.value = std::numeric_limits<double>::infinity();
            res.note = "integrand singular inside the interval";
            return res;
        }
    }
    // Tail integrals up to 1-eps for shrinking eps; divergence shows as non-vanishing increments.
    double prev = 0.0, cur = 0.0;
    for (int e = 2; e <= 12; e += 2) {
        double eps = std::pow(10.0, -e);
        prev = cur;
        cur = gauss_kronrod<double, 31>::integrate(integrand, a, 1.0 - eps, 12, 1e-12);
    }
    if (!std::isfinite(cur) || std::abs(cur - prev) > quad_tol * std::max(1.0, std::abs(cur))) {
        res.integral = SavitsStatus::fails;
        res.value = std::numeric_limits<double>::infinity();
    } else {
        res.integral = SavitsStatus::holds;
        res.value = cur;
    }
    res.status = res.integral;
    return res;
}

SavitsResult savits_check(const ModelSpec& spec, double quad_tol) {
    // Fbar(s) = max_m sum_{n>=2} P(|L_m| = n) s^n
    auto fbar = [&](double s) {
        double best = 0.0;
        for (const auto& law : spec.offspring) {
            double v = 0.0;
            for (const auto& a : law.atoms) {
                int n = 0;
                for (int c : a.counts) n += c;
                if (n >= 2) v += a.p * std::pow(s, n);
            }
            best = std::max(best, v);
        }
        return best;
    };
    SavitsResult res = savits_integral(fbar, quad_tol);
    res.status = SavitsStatus::not_applicable;
    res.note = std::string("finite support, so the mean is finite and the process is conservative; ") +
               "the integral condition itself " +
               (res.integral == SavitsStatus::holds ? "holds" : "fails");
    return res;
}

ValidationReport validate_model(const ModelSpec& spec) {
    spec.check_structure();
    ValidationReport rep;
    for (const auto& law : spec.offspring) {
        double s = 0.0;
        for (const auto& a : law.atoms) s += a.p;
        rep.prob_sums.push_back(s);
        rep.prob_sum_ok.push_back(std::abs(s - 1.0) <= 1e-12);
    }
    for (const auto& law : spec.offspring)
        for (const auto& a : law.atoms) {
            int n = 0;
            for (int c : a.counts) n += c;
            if (a.p > 0.0 && n != 1) rep.non_simple = true;
        }
    MeanMatrixData mm = mean_matrix(spec);
    rep.irreducible = !mm.reducible;
    rep.finite_mean = true;
    rep.savits = savits_check(spec);
    rep.conservative = rep.finite_mean;
    if (!rep.non_simple) rep.warnings.push_back("model is simple: every individual has exactly one child");
    if (!rep.irreducible) rep.warnings.push_back("model is reducible: laws are evaluated but not guaranteed");
    return rep;
}

void resolve_xi(ModelSpec& spec) {
    if (!spec.xi_perron) return;
    MeanMatrixData mm = mean_matrix(spec);
    spec.xi.assign(mm.xi_perron.data(), mm.xi_perron.data() + spec.d);
    for (double& x : spec.xi)
        if (x <= 0.0) throw ValidationError("Perron vector has a zero entry; give xi explicitly");
}

}  // namespace mbgw
