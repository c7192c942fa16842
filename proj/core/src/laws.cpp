#include "mbgw/laws.hpp"

#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace mbgw {

DirectTerms::DirectTerms(const GenFunEngine& eng, double T, Ray ray, int J)
    : eng_(eng), T_(T), ray_(std::move(ray)), J_(std::max(J, 1)) {
    if (!(T > 0.0)) throw ValidationError("horizon must be positive");
}

double DirectTerms::F(double u, int m) const { return eng_.taylor(u, ray_, J_).coef[m][0]; }

double DirectTerms::D(double u, int j, int m) const { return eng_.taylor(u, ray_, J_).scaled_moment(m, j); }

Eigen::MatrixXd DirectTerms::mixed_between(double a, double b) const {
    Vec s(eng_.d());
    for (int m = 0; m < eng_.d(); ++m) s[m] = F(T_ - b, m);
    return eng_.jacobian(b - a, s);
}

TableTerms::TableTerms(const GenFunEngine& eng, double T, Ray ray, int J, int grid)
    : traj_(eng, T, ray, std::max(J, 1), grid, true) {}

namespace {

void check_time(const QContext& ctx, double t) {
    if (!(t > 0.0) || !(t < ctx.T())) throw ValidationError("time must lie in (0, T)");
}

double denominator(const QContext& ctx, int k) {
    double den = ctx.terms->D(ctx.T(), k, ctx.r);
    if (!(den > 0.0)) throw NumericError("normaliser E_r[N_T^[k] e^{-theta.Z_T}] vanishes");
    return den;
}

// alpha_i p_i(l) l^[g] prod_m F_m(u)^{l_m - g_m}; zero outside the support.
double offspring_factor(const QContext& ctx, int i, const Counts& l, const std::vector<int>& g, double u) {
    const ModelSpec& s = ctx.s();
    double p = s.offspring[i].prob(l);
    if (p == 0.0) return 0.0;
    double v = s.alpha[i] * p;
    for (int m = 0; m < s.d; ++m) {
        if (g[m] > l[m]) return 0.0;
        v *= falling_factorial_d(l[m], g[m]) * std::pow(ctx.terms->F(u, m), l[m] - g[m]);
    }
    return v;
}

double blocks_factor(const QContext& ctx, const ColouredPartition& P, double u) {
    double v = 1.0;
    for (const auto& b : P.blocks()) v *= ctx.terms->D(u, static_cast<int>(b.members.size()), b.colour);
    return v;
}

double profile_blocks_factor(const QContext& ctx, const BlockSizeProfile& prof, double u) {
    double v = 1.0;
    for (std::size_t m = 0; m < prof.sizes.size(); ++m)
        for (int a : prof.sizes[m]) v *= ctx.terms->D(u, a, static_cast<int>(m));
    return v;
}

}  // namespace

std::pair<double, double> q_no_split_tail(const QContext& ctx, int k, double t, int i) {
    check_time(ctx, t);
    const double T = ctx.T();
    const int r = ctx.r;
    double den = denominator(ctx, k);
    double first = ctx.terms->D(T - t, k, r) / den * std::exp(-ctx.s().alpha[r] * t);
    double second = ctx.terms->D(T - t, k, i) * ctx.terms->mixed(t)(r, i) / den;
    return {first, second};
}

double q_first_birth_offspring(const QContext& ctx, double t, int i, const Counts& l) {
    check_time(ctx, t);
    const ModelSpec& s = ctx.s();
    const double u = ctx.T() - t;
    auto weight = [&](const Counts& c, double p) {
        double v = c[i] * p;
        for (int m = 0; m < s.d; ++m) v *= std::pow(ctx.terms->F(u, m), c[m]);
        return v;
    };
    double den = 0.0;
    for (const auto& a : s.offspring[ctx.r].atoms) den += weight(a.counts, a.p);
    if (!(den > 0.0)) throw NumericError("conditioning event null: type cannot be produced in one step");
    if (static_cast<int>(l.size()) != s.d) throw ValidationError("offspring vector must have d entries");
    return weight(l, s.offspring[ctx.r].prob(l)) / den;
}

double q_birth_off_spine_joint(const QContext& ctx, int k, double t, int i, const std::optional<Counts>& l) {
    check_time(ctx, t);
    const ModelSpec& s = ctx.s();
    const int r = ctx.r;
    const double u = ctx.T() - t;
    auto weight = [&](const Counts& c, double p) {
        if (c[i] == 0) return 0.0;
        double v = c[i] * p;
        for (int m = 0; m < s.d; ++m) v *= std::pow(ctx.terms->F(u, m), c[m] - (m == i ? 1 : 0));
        return v;
    };
    double w = 0.0;
    if (l) {
        w = weight(*l, s.offspring[r].prob(*l));
    } else {
        for (const auto& a : s.offspring[r].atoms) w += weight(a.counts, a.p);
    }
    return s.alpha[r] * std::exp(-s.alpha[r] * t) * w * ctx.terms->D(u, k, i) / denominator(ctx, k);
}

double q_birth_off_spine_density(const QContext& ctx, int k, double t, int i, const std::optional<Counts>& l) {
    double tail = q_no_split_tail(ctx, k, t, i).second;
    if (!(tail > 0.0)) throw NumericError("conditioning event null: Q(c = i, tau_1 > t) vanishes");
    return q_birth_off_spine_joint(ctx, k, t, i, l) / tail;
}

double q_first_event_split_density(const QContext& ctx, int k, double t) {
    check_time(ctx, t);
    if (k < 2) return 0.0;
    const ModelSpec& s = ctx.s();
    const int r = ctx.r;
    const double u = ctx.T() - t;
    double total = 0.0;
    for (const auto& a : s.offspring[r].atoms) {
        if (a.p == 0.0) continue;
        for (const auto& prof : enumerate_profiles(k, a.counts)) {
            auto g = prof.g();
            int nb = 0;
            for (int x : g) nb += x;
            if (nb < 2) continue;
            double count = count_partitions_with_profile(k, prof).convert_to<double>();
            total += count * offspring_factor(ctx, r, a.counts, g, u) * profile_blocks_factor(ctx, prof, u);
        }
    }
    return std::exp(-s.alpha[r] * t) * total / denominator(ctx, k);
}

double q_first_split_density(const QContext& ctx, int k, double t, const ColouredPartition& P, const Counts& l,
                             int i) {
    check_time(ctx, t);
    if (k < 2) throw ValidationError("first split needs k >= 2");
    if (P.num_marks() != k || P.members().back() != k) throw ValidationError("P must partition [k]");
    if (P.num_blocks() < 2) throw ValidationError("a split needs at least two blocks");
    const double u = ctx.T() - t;
    double v = offspring_factor(ctx, i, l, P.g(ctx.s().d), u);
    if (v == 0.0) return 0.0;
    return v * ctx.terms->mixed(t)(ctx.r, i) * blocks_factor(ctx, P, u) / denominator(ctx, k);
}

double q_first_split_profile_density(const QContext& ctx, int k, double t, const BlockSizeProfile& profile,
                                     const Counts& l, int i) {
    check_time(ctx, t);
    if (profile.total() != k) throw ValidationError("profile must cover k marks");
    const double u = ctx.T() - t;
    double v = offspring_factor(ctx, i, l, profile.g(), u);
    if (v == 0.0) return 0.0;
    double count = count_partitions_with_profile(k, profile).convert_to<double>();
    return count * v * ctx.terms->mixed(t)(ctx.r, i) * profile_blocks_factor(ctx, profile, u) /
           denominator(ctx, k);
}

namespace {

void check_record_context(const QContext& ctx, const SplitRecord& rec) {
    rec.check(ctx.s().d, false);
    if (rec.root_type != ctx.r) throw ValidationError("record root type differs from context");
    if (std::abs(rec.T - ctx.T()) > 1e-12 * std::max(1.0, ctx.T()))
        throw ValidationError("record horizon differs from context");
}

double block_product_unchecked(const QContext& ctx, const SplitRecord& rec) {
    const double T = ctx.T();
    // A block created at time a: refined later (mixed term) or left intact (its moment).
    auto block_term = [&](const std::vector<int>& blk, int colour, double a) {
        if (blk.size() == 1) return ctx.terms->D(T - a, 1, colour);
        int h = rec.split_of_block(blk);
        if (h < 0) return ctx.terms->D(T - a, static_cast<int>(blk.size()), colour);
        return ctx.terms->mixed_between(a, rec.splits[h].t)(colour, rec.splits[h].parent_type);
    };
    std::vector<int> all(rec.k);
    for (int q = 0; q < rec.k; ++q) all[q] = q + 1;
    double v = block_term(all, ctx.r, 0.0);
    for (const auto& sp : rec.splits)
        for (const auto& b : sp.P.blocks()) v *= block_term(b.members, b.colour, sp.t);
    return v;
}

}  // namespace

double q_joint_split_block_product(const QContext& ctx, const SplitRecord& rec) {
    check_record_context(ctx, rec);
    return block_product_unchecked(ctx, rec);
}

double q_joint_split_numerator_scaled(const QContext& ctx, const SplitRecord& rec) {
    check_record_context(ctx, rec);
    const double T = ctx.T();
    double v = 1.0;
    for (const auto& sp : rec.splits) {
        v *= offspring_factor(ctx, sp.parent_type, sp.l, sp.P.g(ctx.s().d), T - sp.t);
        if (v == 0.0) return 0.0;
    }
    return v * block_product_unchecked(ctx, rec);
}

double q_joint_split_density(const QContext& ctx, const SplitRecord& rec) {
    double num = q_joint_split_numerator_scaled(ctx, rec);
    if (rec.k == 1) return rec.n() == 0 ? 1.0 : 0.0;
    return num / denominator(ctx, rec.k);
}

namespace {

DensityValue beta_integral(const std::function<double(double)>& inner, int k, double surv, const QuadratureSpec& q) {
    if (!(surv > 0.0)) throw NumericError("P(N_T >= k) vanishes");
    double fact = 1.0;
    for (int i = 2; i < k; ++i) fact *= i;
    auto f = [&](double s) { return std::pow(1.0 - s, k - 1) * inner(s); };
    double err = 0.0;
    double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, 1.0, q.max_depth, q.rel_tol,
                                                                               &err);
    if (!std::isfinite(v)) throw NumericError("Beta integral is not finite");
    double scale = 1.0 / (fact * surv);
    if (err > 10.0 * std::max(q.rel_tol * std::abs(v), 1e-15))
        throw NumericError("Beta integral did not converge within the panel budget (error estimate " +
                           std::to_string(err * scale) + ")");
    return {v * scale, err * scale};
}

}  // namespace

DensityValue punif_joint_split_density(const GenFunEngine& eng, double T, int r, const SplitRecord& rec,
                                       const QuadratureSpec& q, double survival) {
    rec.check(eng.d(), false);
    if (rec.k == 1) return {rec.n() == 0 ? 1.0 : 0.0, 0.0};
    double surv = survival >= 0.0 ? survival : eng.survival_ge_k(T, r, rec.k);
    auto inner = [&](double s) {
        DirectTerms terms(eng, T, Ray::from_s(s, eng.d()), rec.k);
        QContext ctx{&eng.spec(), &terms, r};
        return q_joint_split_numerator_scaled(ctx, rec);
    };
    return beta_integral(inner, rec.k, surv, q);
}

DensityValue punif_beta_mass(const GenFunEngine& eng, double T, int r, int k, const QuadratureSpec& q,
                             double survival) {
    if (k < 1) throw ValidationError("k must be >= 1");
    double surv = survival >= 0.0 ? survival : eng.survival_ge_k(T, r, k);
    auto inner = [&](double s) { return eng.taylor(T, Ray::from_s(s, eng.d()), k).scaled_moment(r, k); };
    return beta_integral(inner, k, surv, q);
}
}  // namespace mbgw
