#include "mbgw/spinesim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace mbgw {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// Offspring counts per type of a dead node, read from its contiguous children.
Counts child_counts(const EventLog& log, int v, int d) {
    Counts l(d, 0);
    const Node& n = log.nodes[v];
    for (int c = 0; c < n.num_children; ++c) l[log.nodes[n.first_child + c].type]++;
    return l;
}

int child_offset(const Counts& l, int m) { return std::accumulate(l.begin(), l.begin() + m, 0); }
}  // namespace

bool MarkedRun::marks_alive() const {
    for (int v : holder)
        if (v < 0 || !log.alive_at(v, log.T)) return false;
    return true;
}

bool MarkedRun::marks_distinct() const {
    std::set<int> s(holder.begin(), holder.end());
    return static_cast<int>(s.size()) == k;
}

MarkedRun replay_marks(const ModelSpec& spec, const EventLog& log, int k, Rng& rng) {
    MarkedRun run;
    run.log = log;
    run.k = k;
    run.holder.assign(k, 0);
    std::vector<int> ev_of(log.nodes.size(), -1);
    for (std::size_t e = 0; e < log.events.size(); ++e) ev_of[log.events[e].parent] = static_cast<int>(e);
    std::map<int, MarkMove> moves;
    for (int h = 1; h <= k; ++h) {
        int v = 0;
        while (ev_of[v] >= 0) {
            Counts l = child_counts(log, v, spec.d);
            if (log.nodes[v].num_children == 0) break;  // the mark dies with a childless particle
            double tot = 0.0;
            for (int m = 0; m < spec.d; ++m) tot += l[m] * spec.xi[m];
            double u = uniform01(rng) * tot;
            int m = 0;
            for (; m < spec.d - 1; ++m) {
                if (u < l[m] * spec.xi[m]) break;
                u -= l[m] * spec.xi[m];
            }
            while (l[m] == 0) m = (m + spec.d - 1) % spec.d;
            std::uniform_int_distribution<int> pick(0, l[m] - 1);
            int idx = child_offset(l, m) + pick(rng);
            auto& mv = moves[ev_of[v]];
            mv.event = ev_of[v];
            mv.moves.emplace_back(h, idx + 1);
            v = log.nodes[v].first_child + idx;
        }
        run.holder[h - 1] = v;
    }
    for (auto& [e, mv] : moves) run.moves.push_back(std::move(mv));
    return run;
}

MarkedRun simulate_reference(const ModelSpec& spec, int root_type, int k, double T, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    EventLog log = simulate(spec, root_type, T, rng);
    log.seed = seed;
    return replay_marks(spec, log, k, rng);
}

double mark_path_probability(const ModelSpec& spec, const EventLog& log, int leaf) {
    double p = 1.0;
    for (int v = leaf; log.nodes[v].parent >= 0; v = log.nodes[v].parent) {
        int w = log.nodes[v].parent;
        Counts l = child_counts(log, w, spec.d);
        double lx = 0.0;
        for (int m = 0; m < spec.d; ++m) lx += l[m] * spec.xi[m];
        p *= spec.xi[log.nodes[v].type] / lx;
    }
    return p;
}

SpineWeight spine_weight(const ModelSpec& spec, const MarkedRun& run, const Vec& theta) {
    SpineWeight w;
    w.per_mark.resize(run.k);
    for (int h = 0; h < run.k; ++h) w.per_mark[h] = 1.0 / mark_path_probability(spec, run.log, run.holder[h]);
    if (!run.marks_alive() || !run.marks_distinct()) return w;
    w.value = 1.0;
    for (double f : w.per_mark) w.value *= f;
    double tz = 0.0;
    for (int v : run.log.alive_sorted(run.log.T)) tz += theta.at(run.log.nodes[v].type);
    w.zeta_numerator = w.value * std::exp(-tz);
    return w;
}

SplitRecord QRun::record(int root_type, double T) const {
    SplitRecord rec;
    rec.k = k;
    rec.root_type = root_type;
    rec.T = T;
    for (const auto& e : spine_events) {
        if (!e.is_split()) continue;
        rec.splits.push_back(SplitEvent{e.t, e.parent_type, e.l, e.P, e.parent_block});
    }
    return rec;
}

QSimulator::QSimulator(const GenFunEngine& eng, int root_type, int k, double T, const Vec& theta, QSimOptions opt)
    : eng_(eng),
      spec_(eng.spec()),
      r_(root_type),
      k_(k),
      T_(T),
      theta_(theta),
      opt_(opt),
      traj_(eng, T, Ray::from_theta(theta), std::max(k, 1), opt.grid, false),
      spec_hash_(spec_.hash()) {
    if (root_type < 0 || root_type >= spec_.d) throw ValidationError("root type out of range");
    if (k < 0) throw ValidationError("k must be >= 0");
    const int d = spec_.d;
    patterns_.assign(d, std::vector<std::vector<Pattern>>(k + 1));
    for (int i = 0; i < d; ++i)
        for (int h = 1; h <= k; ++h)
            for (const auto& a : spec_.offspring[i].atoms) {
                if (a.p == 0.0) continue;
                for (auto& prof : enumerate_profiles(h, a.counts)) {
                    Pattern pt;
                    pt.l = a.counts;
                    pt.p = a.p;
                    pt.g = prof.g();
                    BigInt mult = count_partitions_with_profile(h, prof) * vector_falling(a.counts, pt.g);
                    pt.multiplicity = mult.convert_to<double>();
                    pt.profile = std::move(prof);
                    patterns_[i][h].push_back(std::move(pt));
                }
            }
    majorant_.assign(d, 0.0);
    for (int i = 0; i < d; ++i) {
        for (int n = 0; n <= 256; ++n) majorant_[i] = std::max(majorant_[i], unmarked_rate(i, T * n / 256.0));
        majorant_[i] *= 1.05;
    }
}

double QSimulator::unmarked_rate(int i, double t) const {
    const double u = T_ - t;
    Vec F(spec_.d);
    for (int m = 0; m < spec_.d; ++m) F[m] = traj_.F(u, m);
    return spec_.alpha[i] * pgf_offspring(spec_, i, F) / F[i];
}

double QSimulator::pattern_weight(const Pattern& pt, int i, double u) const {
    (void)i;
    double v = pt.multiplicity * pt.p;
    for (int m = 0; m < spec_.d; ++m) {
        if (pt.l[m] > pt.g[m]) v *= std::pow(traj_.F(u, m), pt.l[m] - pt.g[m]);
        for (int a : pt.profile.sizes[m]) v *= traj_.D(u, a, m);
    }
    return v;
}

double QSimulator::marked_rate(int i, int h, double t) const {
    const double u = T_ - t;
    double s = 0.0;
    for (const auto& pt : patterns_[i][h]) s += pattern_weight(pt, i, u);
    return spec_.alpha[i] * s / traj_.D(u, h, i);
}

// Survival of a marked particle born at t0: e^{-alpha (t - t0)} D_h(T-t) / D_h(T-t0).
double QSimulator::sample_marked_time(int i, int h, double t0, Rng& rng) const {
    const double a = spec_.alpha[i];
    const double d0 = traj_.D(T_ - t0, h, i);
    if (!(d0 > 0.0)) throw NumericError("marked particle with vanishing size-biased mass");
    auto logS = [&](double t) {
        double dv = traj_.D(T_ - t, h, i);
        if (!(dv > 0.0)) return -kInf;
        return -a * (t - t0) + std::log(dv / d0);
    };
    const double target = std::log(uniform01(rng));
    if (logS(T_) > target) return kInf;
    double lo = t0, hi = T_;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, T_); ++it) {
        double mid = 0.5 * (lo + hi);
        (logS(mid) > target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

QRun QSimulator::run(std::uint64_t seed) const {
    Rng rng = make_rng(seed);
    QRun out = run(rng);
    out.log.seed = seed;
    return out;
}

QRun QSimulator::run(Rng& rng) const {
    const int d = spec_.d;
    QRun out;
    out.k = k_;
    out.holder.assign(k_, 0);
    EventLog& log = out.log;
    log.T = T_;
    log.root_type = r_;
    log.d = d;
    log.spec_hash = spec_hash_;
    log.nodes.push_back(Node{-1, 0, r_, 0.0, kInf, -1, 0});

    struct Marked {
        int node;
        std::vector<int> marks;
        double next;
    };
    std::vector<Marked> marked;
    std::vector<std::vector<int>> unmarked(d);
    std::vector<int> pos;
    auto add_unmarked = [&](int id) {
        if (opt_.marked_only) return;
        if (static_cast<int>(pos.size()) <= id) pos.resize(id + 1, -1);
        int m = log.nodes[id].type;
        pos[id] = static_cast<int>(unmarked[m].size());
        unmarked[m].push_back(id);
    };
    auto remove_unmarked = [&](int id) {
        auto& v = unmarked[log.nodes[id].type];
        int p = pos[id];
        v[p] = v.back();
        pos[v[p]] = p;
        v.pop_back();
    };
    auto add_marked = [&](int id, std::vector<int> marks, double t0) {
        int h = static_cast<int>(marks.size());
        double nt = sample_marked_time(log.nodes[id].type, h, t0, rng);
        marked.push_back(Marked{id, std::move(marks), nt});
    };

    if (k_ > 0) {
        std::vector<int> all(k_);
        std::iota(all.begin(), all.end(), 1);
        add_marked(0, all, 0.0);
    } else {
        add_unmarked(0);
    }

    std::exponential_distribution<double> expo(1.0);
    double t = 0.0;
    long nevents = 0;
    int nsplits = 0;
    std::vector<double> wts;
    for (;;) {
        int me = -1;
        double tm = kInf;
        for (std::size_t e = 0; e < marked.size(); ++e)
            if (marked[e].next < tm) {
                tm = marked[e].next;
                me = static_cast<int>(e);
            }
        double lam = 0.0;
        for (int m = 0; m < d; ++m) lam += majorant_[m] * unmarked[m].size();
        double tp = lam > 0.0 ? t + expo(rng) / lam : kInf;
        if (std::min(tm, tp) >= T_) break;
        if (++nevents > opt_.event_cap) throw CapReached("event cap reached in spine simulation", std::move(log));

        if (tp < tm) {
            t = tp;
            double u = uniform01(rng) * lam;
            int m = 0;
            for (; m < d - 1; ++m) {
                double w = majorant_[m] * unmarked[m].size();
                if (u < w) break;
                u -= w;
            }
            while (unmarked[m].empty()) m = (m + 1) % d;
            double rate = unmarked_rate(m, t);
            if (rate > majorant_[m]) throw NumericError("thinning majorant violated; refine the grid");
            if (uniform01(rng) * majorant_[m] >= rate) continue;
            const auto& set = unmarked[m];
            int victim = set[std::min<std::size_t>(static_cast<std::size_t>(uniform01(rng) * set.size()),
                                                   set.size() - 1)];
            // Offspring law tilted by prod F_j(T-t)^{l_j}.
            const auto& atoms = spec_.offspring[m].atoms;
            wts.assign(atoms.size(), 0.0);
            double tot = 0.0;
            for (std::size_t a = 0; a < atoms.size(); ++a) {
                double w = atoms[a].p;
                for (int j = 0; j < d; ++j) w *= std::pow(traj_.F(T_ - t, j), atoms[a].counts[j]);
                wts[a] = w;
                tot += w;
            }
            double v = uniform01(rng) * tot;
            std::size_t a = 0;
            for (; a + 1 < atoms.size(); ++a) {
                if (v < wts[a]) break;
                v -= wts[a];
            }
            while (wts[a] == 0.0) a = (a + atoms.size() - 1) % atoms.size();
            remove_unmarked(victim);
            int first = log.add_event(t, victim, atoms[a].counts);
            for (int c = 0; c < log.nodes[victim].num_children; ++c) add_unmarked(first + c);
            continue;
        }

        t = tm;
        Marked cur = std::move(marked[me]);
        marked[me] = std::move(marked.back());
        marked.pop_back();
        const int i = log.nodes[cur.node].type;
        const int h = static_cast<int>(cur.marks.size());
        const auto& pats = patterns_[i][h];
        const double u = T_ - t;
        wts.assign(pats.size(), 0.0);
        double tot = 0.0;
        for (std::size_t q = 0; q < pats.size(); ++q) tot += (wts[q] = pattern_weight(pats[q], i, u));
        if (!(tot > 0.0)) throw NumericError("no admissible branching pattern for a marked particle");
        double v = uniform01(rng) * tot;
        std::size_t q = 0;
        for (; q + 1 < pats.size(); ++q) {
            if (v < wts[q]) break;
            v -= wts[q];
        }
        while (wts[q] == 0.0) q = (q + pats.size() - 1) % pats.size();
        const Pattern& pt = pats[q];

        // Step 4: uniform labelled partition with the pattern's profile, then
        // an injective uniform choice of carrying children within each type.
        std::vector<int> shuffled = cur.marks;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        int first = log.add_event(t, cur.node, pt.l);
        SpineEvent se;
        se.t = t;
        se.parent_type = i;
        se.l = pt.l;
        se.parent_block = cur.marks;
        MarkMove mv;
        mv.event = static_cast<int>(log.events.size()) - 1;
        std::vector<Block> blocks;
        std::vector<char> carries(pt.l.empty() ? 0 : std::accumulate(pt.l.begin(), pt.l.end(), 0), 0);
        std::size_t cursor = 0;
        for (int m = 0; m < d; ++m) {
            const auto& sizes = pt.profile.sizes[m];
            if (sizes.empty()) continue;
            std::vector<int> kids(pt.l[m]);
            std::iota(kids.begin(), kids.end(), 0);
            if (!opt_.rigged_first_born)
                for (std::size_t b = 0; b < sizes.size(); ++b) {
                    std::uniform_int_distribution<std::size_t> pick(b, kids.size() - 1);
                    std::swap(kids[b], kids[pick(rng)]);
                }
            for (std::size_t b = 0; b < sizes.size(); ++b) {
                Block blk;
                blk.colour = m;
                blk.members.assign(shuffled.begin() + cursor, shuffled.begin() + cursor + sizes[b]);
                cursor += sizes[b];
                std::sort(blk.members.begin(), blk.members.end());
                int idx = child_offset(pt.l, m) + kids[b];
                carries[idx] = 1;
                for (int mk : blk.members) mv.moves.emplace_back(mk, idx + 1);
                add_marked(first + idx, blk.members, t);
                blocks.push_back(std::move(blk));
            }
        }
        for (std::size_t c = 0; c < carries.size(); ++c)
            if (!carries[c]) add_unmarked(first + static_cast<int>(c));
        std::sort(mv.moves.begin(), mv.moves.end());
        out.moves.push_back(std::move(mv));
        se.P = ColouredPartition(std::move(blocks));
        bool split = se.is_split();
        out.spine_events.push_back(std::move(se));
        if (split && ++nsplits == opt_.stop_after_splits) {
            out.truncated = true;
            break;
        }
    }
    for (const auto& mk : marked)
        for (int x : mk.marks) out.holder[x - 1] = mk.node;
    return out;
}

QRun simulate_Q(const GenFunEngine& eng, int root_type, int k, double T, const Vec& theta, std::uint64_t seed,
                QSimOptions opt) {
    QSimulator sim(eng, root_type, k, T, theta, opt);
    return sim.run(seed);
}

Rational step4_outcome_probability(int h, const Counts& l, const BlockSizeProfile& profile) {
    BigInt n = count_partitions_with_profile(h, profile) * vector_falling(l, profile.g());
    if (n == 0) return Rational(0);
    return Rational(BigInt(1), n);
}

double subpop_laplace(const GenFunEngine& eng, double t, int v_type, int j, double T, const Vec& theta,
                      const Vec& mu) {
    if (!(t >= 0.0) || t > T) throw ValidationError("t must lie in [0, T]");
    if (theta.size() != mu.size()) throw ValidationError("theta and mu differ in length");
    Vec tm(theta.size());
    for (std::size_t m = 0; m < theta.size(); ++m) {
        if (theta[m] < 0.0 || mu[m] < 0.0) throw ValidationError("theta and mu must be non-negative");
        tm[m] = theta[m] + mu[m];
    }
    double den = eng.discounted_factorial_moment(T - t, v_type, j, theta);
    if (!(den > 0.0)) throw NumericError("subpopulation transform: vanishing denominator");
    return eng.discounted_factorial_moment(T - t, v_type, j, tm) / den;
}

}  // namespace mbgw
