#include "mbgw/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

namespace mbgw {

// ------------------------------------------------------------------ oracle

OracleFunctional OracleFunctional::laplace(Vec theta) {
    OracleFunctional f;
    f.kind = Kind::laplace;
    f.theta = std::move(theta);
    return f;
}

OracleFunctional OracleFunctional::factorial(int j, Vec theta) {
    OracleFunctional f;
    f.kind = Kind::factorial;
    f.j = j;
    f.theta = std::move(theta);
    return f;
}

OracleFunctional OracleFunctional::point_masses(int n) {
    OracleFunctional f;
    f.kind = Kind::point_masses;
    f.n = n;
    return f;
}

namespace {

struct StateSpace {
    int d = 0, N = 0;
    std::vector<Counts> states;
    std::unordered_map<std::uint64_t, int> index;
    std::uint64_t key(const Counts& z) const {
        std::uint64_t k = 0;
        for (int m = 0; m < d; ++m) k = k * static_cast<std::uint64_t>(N + 1) + static_cast<std::uint64_t>(z[m]);
        return k;
    }
};

StateSpace build_states(int d, int N, long budget) {
    // C(N + d, d) states
    double count = 1.0;
    for (int i = 1; i <= d; ++i) count = count * (N + i) / i;
    if (count > static_cast<double>(budget)) throw ValidationError("oracle state budget exceeded");
    if (std::pow(N + 1.0, d) > 1.8e19) throw ValidationError("oracle state encoding overflow");
    StateSpace S;
    S.d = d;
    S.N = N;
    Counts z(d, 0);
    std::function<void(int, int)> rec = [&](int m, int left) {
        if (m == d) {
            S.index.emplace(S.key(z), static_cast<int>(S.states.size()));
            S.states.push_back(z);
            return;
        }
        for (int c = 0; c <= left; ++c) {
            z[m] = c;
            rec(m + 1, left - c);
        }
        z[m] = 0;
    };
    rec(0, N);
    return S;
}

}  // namespace

OracleDistribution oracle_distribution(const ModelSpec& spec, double T, int r, const OracleConfig& cfg) {
    spec.check_structure();
    if (!(T >= 0.0)) throw ValidationError("oracle horizon must be non-negative");
    if (r < 0 || r >= spec.d) throw ValidationError("root type out of range");
    if (cfg.N_max < 1) throw ValidationError("N_max must be >= 1");
    const int d = spec.d;
    StateSpace S = build_states(d, cfg.N_max, cfg.state_budget);
    const int ns = static_cast<int>(S.states.size());
    const int cap = ns;
    double amax = *std::max_element(spec.alpha.begin(), spec.alpha.end());
    const double lam = amax * cfg.N_max;

    // Off-diagonal jump probabilities P = I + Q / Lambda in CSR form.
    std::vector<int> rowp{0}, col;
    std::vector<double> val, diag(ns, 1.0);
    for (int s = 0; s < ns; ++s) {
        const Counts& z = S.states[s];
        for (int m = 0; m < d; ++m) {
            if (z[m] == 0) continue;
            double rate = spec.alpha[m] * z[m];
            diag[s] -= rate / lam;
            for (const auto& a : spec.offspring[m].atoms) {
                if (a.p == 0.0) continue;
                Counts y = z;
                y[m] -= 1;
                int tot = 0;
                for (int q = 0; q < d; ++q) tot += (y[q] += a.counts[q]);
                col.push_back(tot > cfg.N_max ? cap : S.index.at(S.key(y)));
                val.push_back(rate * a.p / lam);
            }
        }
        rowp.push_back(static_cast<int>(col.size()));
    }

    Counts z0(d, 0);
    z0[r] = 1;
    Vec v(ns + 1, 0.0);
    v[S.index.at(S.key(z0))] = 1.0;
    double dropped = 0.0;
    if (T > 0.0 && lam > 0.0) {
        int nsub = std::max(1, static_cast<int>(std::ceil(lam * T / cfg.max_lambda_step)));
        double a = lam * T / nsub;
        Vec term(ns + 1), next(ns + 1), acc(ns + 1);
        for (int sub = 0; sub < nsub; ++sub) {
            term = v;
            double w = std::exp(-a);
            double cum = w;
            for (int i = 0; i <= ns; ++i) acc[i] = w * term[i];
            // Poisson tail after term n is at most w a / (n + 1 - a) once n + 1 > a.
            double tail = 1.0;
            for (int n = 1; n <= a || tail > cfg.series_tol; ++n) {
                std::fill(next.begin(), next.end(), 0.0);
                for (int s = 0; s < ns; ++s) {
                    double x = term[s];
                    if (x == 0.0) continue;
                    next[s] += diag[s] * x;
                    for (int e = rowp[s]; e < rowp[s + 1]; ++e) next[col[e]] += val[e] * x;
                }
                next[cap] += term[cap];
                std::swap(term, next);
                w *= a / n;
                cum += w;
                for (int i = 0; i <= ns; ++i) acc[i] += w * term[i];
                if (n + 1 > a) tail = w * a / (n + 1 - a);
                if (n > 100000) throw NumericError("uniformization series did not converge");
            }
            dropped += std::max(tail, 1.0 - cum);
            v = acc;
        }
    }

    OracleDistribution dist;
    dist.cap_mass = v[cap];
    dist.dropped = dropped;
    v.pop_back();
    dist.prob = std::move(v);
    dist.states = std::move(S.states);
    return dist;
}

OracleResult oracle_evaluate(const OracleDistribution& dist, const OracleFunctional& f, const OracleConfig& cfg) {
    const int ns = static_cast<int>(dist.states.size());
    const int d = ns ? static_cast<int>(dist.states[0].size()) : 0;
    if (f.kind != OracleFunctional::Kind::point_masses && static_cast<int>(f.theta.size()) != d)
        throw ValidationError("theta must have d entries");
    const Vec& v = dist.prob;
    OracleResult res;
    res.cap_mass = dist.cap_mass;
    double bad = res.cap_mass + dist.dropped;
    using K = OracleFunctional::Kind;
    if (f.kind == K::point_masses) {
        res.values.assign(f.n + 1, 0.0);
        for (int s = 0; s < ns; ++s) {
            int tot = 0;
            for (int c : dist.states[s]) tot += c;
            if (tot <= f.n) res.values[tot] += v[s];
        }
        res.truncation_bound = bad;
    } else {
        const int j = f.kind == K::laplace ? 0 : f.j;
        double sum = 0.0;
        for (int s = 0; s < ns; ++s) {
            int tot = 0;
            double td = 0.0;
            for (int m = 0; m < d; ++m) {
                tot += dist.states[s][m];
                td += f.theta[m] * dist.states[s][m];
            }
            sum += v[s] * falling_factorial_d(tot, j) * std::exp(-td);
        }
        res.values = {sum};
        // sup of N^[j] e^{-theta_min N} bounds the functional on the lost mass.
        double tmin = *std::min_element(f.theta.begin(), f.theta.end());
        double fmax = 1.0;
        if (j > 0) {
            if (tmin <= 0.0) {
                fmax = std::numeric_limits<double>::infinity();
            } else {
                for (int n = j; n < j + 100000; ++n) {
                    double x = falling_factorial_d(n, j) * std::exp(-tmin * n);
                    fmax = std::max(fmax, x);
                    if (n > j / tmin + 10 && x < fmax * 1e-3) break;
                }
            }
        }
        res.truncation_bound = bad == 0.0 ? 0.0 : bad * fmax;
    }
    res.reliable = res.truncation_bound <= cfg.tolerance;
    return res;
}

OracleResult oracle_uniformization(const ModelSpec& spec, double T, int r, const OracleFunctional& f,
                                   const OracleConfig& cfg) {
    return oracle_evaluate(oracle_distribution(spec, T, r, cfg), f, cfg);
}

OracleResult oracle_uniformization(const ModelSpec& spec, double T, int r, const OracleFunctional& f, int N_max) {
    OracleConfig cfg;
    cfg.N_max = N_max;
    return oracle_uniformization(spec, T, r, f, cfg);
}

// -------------------------------------------------------------- statistics

void Welford::add(double x) {
    ++n_;
    double delta = x - mean_;
    mean_ += delta / n_;
    m2_ += delta * (x - mean_);
}

void Welford::merge(const Welford& o) {
    if (o.n_ == 0) return;
    long n = n_ + o.n_;
    double delta = o.mean_ - mean_;
    mean_ += delta * o.n_ / n;
    m2_ += o.m2_ + delta * delta * static_cast<double>(n_) * o.n_ / n;
    n_ = n;
}

Estimate Welford::estimate(std::uint64_t seed) const {
    Estimate e;
    e.mean = mean_;
    e.n = n_;
    e.std_error = n_ > 1 ? std::sqrt(variance() / n_) : 0.0;
    e.seed = seed;
    return e;
}

double ks_pvalue(double D, long n) {
    if (n <= 0) return 1.0;
    double sn = std::sqrt(static_cast<double>(n));
    double lam = (sn + 0.12 + 0.11 / sn) * D;
    if (lam < 0.2) return 1.0;
    double sum = 0.0;
    for (int j = 1; j <= 200; ++j) {
        double term = std::exp(-2.0 * j * j * lam * lam);
        sum += (j % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-18) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_uniform(std::vector<double> u) {
    std::sort(u.begin(), u.end());
    KsResult res;
    res.n = static_cast<long>(u.size());
    const double n = static_cast<double>(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        double x = std::clamp(u[i], 0.0, 1.0);
        res.D = std::max({res.D, (i + 1) / n - x, x - i / n});
    }
    res.p_value = ks_pvalue(res.D, res.n);
    return res;
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    KsResult res;
    std::size_t i = 0, j = 0;
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    while (i < a.size() && j < b.size()) {
        double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        res.D = std::max(res.D, std::abs(i / na - j / nb));
    }
    res.n = static_cast<long>(std::llround(na * nb / std::max(1.0, na + nb)));
    res.p_value = ks_pvalue(res.D, res.n);
    return res;
}

double bonferroni_z(int ncells, double alpha) {
    boost::math::normal nd;
    return boost::math::quantile(boost::math::complement(nd, alpha / (2.0 * std::max(ncells, 1))));
}

ComparisonReport mc_compare(const std::vector<std::string>& labels, const std::vector<double>& expected,
                            const std::vector<long>& counts, long n, double z_crit) {
    if (labels.size() != expected.size() || expected.size() != counts.size())
        throw ValidationError("mc_compare: mismatched bin vectors");
    if (n <= 0) throw ValidationError("mc_compare: no replicates");
    ComparisonReport rep;
    rep.n = n;
    int active = 0;
    for (double p : expected) active += p > 0.0;
    rep.z_crit = z_crit > 0.0 ? z_crit : bonferroni_z(std::max(active, 1));
    double psum = 0.0;
    long csum = 0;
    int used = 0;
    for (std::size_t b = 0; b < expected.size(); ++b) {
        BinResult br;
        br.label = labels[b];
        br.expected = expected[b];
        br.observed = static_cast<double>(counts[b]) / n;
        if (!(expected[b] > 0.0)) {
            br.excluded = true;
            br.pass = counts[b] == 0;
            if (!br.pass) rep.pass = false;
            rep.note += "bin '" + labels[b] + "' has zero expected probability; excluded. ";
            rep.bins.push_back(br);
            continue;
        }
        br.se = std::sqrt(expected[b] * (1.0 - expected[b]) / n);
        br.z = (br.observed - br.expected) / br.se;
        br.pass = std::abs(br.z) <= rep.z_crit;
        if (!br.pass) rep.pass = false;
        double e = n * expected[b];
        rep.chi2 += (counts[b] - e) * (counts[b] - e) / e;
        psum += expected[b];
        csum += counts[b];
        ++used;
        rep.bins.push_back(br);
    }
    double rest = 1.0 - psum;
    if (rest > 1e-12) {
        double e = n * rest;
        double c = static_cast<double>(n - csum);
        rep.chi2 += (c - e) * (c - e) / e;
        ++used;
    }
    rep.dof = std::max(used - 1, 1);
    boost::math::chi_squared cs(rep.dof);
    rep.chi2_p = boost::math::cdf(boost::math::complement(cs, rep.chi2));
    return rep;
}

double spine_rank_pit(const MarkedRun& run, Rng& rng) {
    std::vector<int> alive = run.log.alive_sorted(run.log.T);
    auto it = std::find(alive.begin(), alive.end(), run.holder.at(0));
    if (it == alive.end()) throw ValidationError("mark 1 is not alive at T");
    double R = static_cast<double>(it - alive.begin());
    return (R + uniform01(rng)) / static_cast<double>(alive.size());
}

UniformityReport uniformity_test_spines(const std::vector<double>& pits, bool distinct_always, double level) {
    UniformityReport rep;
    rep.runs = static_cast<long>(pits.size());
    rep.ks = ks_uniform(pits);
    rep.distinct_always = distinct_always;
    rep.pass = distinct_always && rep.ks.p_value > level;
    return rep;
}

ReweightReport importance_reweight_check(const GenFunEngine& eng, int r, int k, double T, const Vec& theta,
                                         const std::function<bool(const MarkedRun&)>& event, long n,
                                         std::uint64_t seed, int workers) {
    const ModelSpec& spec = eng.spec();
    QSimulator sim(eng, r, k, T, theta);
    const double norm = eng.discounted_factorial_moment(T, r, k, theta);
    const unsigned w = workers > 0 ? workers : default_workers();
    const long chunks = std::min<long>(n, 256);
    struct Acc {
        Welford q, ref;
        double sw = 0.0, sw2 = 0.0;
    };
    auto parts = parallel_map<Acc>(static_cast<std::size_t>(chunks), w, [&](std::size_t c) {
        Acc a;
        for (long i = static_cast<long>(c); i < n; i += chunks) {
            QRun q = sim.run(replicate_seed(seed, 2 * i));
            a.q.add(event(q) ? 1.0 : 0.0);
            MarkedRun ref = simulate_reference(spec, r, k, T, replicate_seed(seed, 2 * i + 1));
            double z = spine_weight(spec, ref, theta).zeta_numerator / norm;
            a.ref.add(z > 0.0 && event(ref) ? z : 0.0);
            a.sw += z;
            a.sw2 += z * z;
        }
        return a;
    });
    Acc tot;
    for (auto& p : parts) {
        tot.q.merge(p.q);
        tot.ref.merge(p.ref);
        tot.sw += p.sw;
        tot.sw2 += p.sw2;
    }
    ReweightReport rep;
    rep.q_direct = tot.q.estimate(seed);
    rep.q_reweighted = tot.ref.estimate(seed);
    rep.ess = tot.sw2 > 0.0 ? tot.sw * tot.sw / tot.sw2 : 0.0;
    rep.inconclusive = rep.ess < 100.0;
    double se = std::hypot(rep.q_direct.std_error, rep.q_reweighted.std_error);
    double diff = rep.q_direct.mean - rep.q_reweighted.mean;
    rep.z = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    rep.pass = !rep.inconclusive && std::abs(rep.z) <= 3.0;
    return rep;
}

// ------------------------------------------------------------- fixtures

namespace {
ModelSpec make_spec(std::vector<double> alpha, std::vector<std::vector<std::pair<Counts, double>>> laws) {
    ModelSpec s;
    s.d = static_cast<int>(alpha.size());
    s.alpha = std::move(alpha);
    for (auto& law : laws) {
        OffspringLaw L;
        for (auto& [c, p] : law) L.atoms.push_back(Atom{c, p});
        s.offspring.push_back(std::move(L));
    }
    s.xi_perron = true;
    resolve_xi(s);
    s.check_structure();
    return s;
}
}  // namespace

ModelSpec fixture_two_type() {
    return make_spec({1.0, 1.3}, {{{{0, 0}, 0.25}, {{1, 1}, 0.4}, {{2, 1}, 0.2}, {{0, 3}, 0.15}},
                                  {{{0, 0}, 0.3}, {{2, 0}, 0.3}, {{1, 2}, 0.25}, {{1, 0}, 0.15}}});
}

ModelSpec fixture_subcritical() {
    return make_spec({1.0, 1.0}, {{{{0, 0}, 0.5}, {{1, 1}, 0.3}, {{0, 2}, 0.2}},
                                  {{{0, 0}, 0.6}, {{2, 0}, 0.2}, {{1, 1}, 0.2}}});
}

ModelSpec fixture_critical() {
    return make_spec({1.0, 1.0}, {{{{0, 0}, 0.5}, {{0, 2}, 0.5}}, {{{0, 0}, 0.5}, {{2, 0}, 0.5}}});
}

ModelSpec fixture_binary_fission(double alpha) {
    ModelSpec s = make_spec({alpha}, {{{{2}, 1.0}}});
    return s;
}

ModelSpec fixture_single_type() { return make_spec({1.0}, {{{{0}, 0.3}, {{2}, 0.5}, {{3}, 0.2}}}); }

ModelSpec fixture_pure_death(double alpha) { return make_spec({alpha}, {{{{0}, 1.0}}}); }

}  // namespace mbgw
