#include "mbgw/treesim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mbgw/genfun.hpp"

namespace mbgw {

std::string UlamHarrisLabel::str() const {
    std::string s;
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (i) s += ".";
        s += std::to_string(path[i]);
    }
    return s;
}

UlamHarrisLabel UlamHarrisLabel::parse(const std::string& s) {
    UlamHarrisLabel lab;
    if (s.empty()) return lab;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, '.')) {
        int v = 0;
        try {
            v = std::stoi(item);
        } catch (...) {
            throw ValidationError("malformed Ulam-Harris label \"" + s + "\"");
        }
        if (v < 1) throw ValidationError("Ulam-Harris entries are positive");
        lab.path.push_back(v);
    }
    return lab;
}

bool UlamHarrisLabel::is_prefix_of(const UlamHarrisLabel& o) const {
    return path.size() <= o.path.size() && std::equal(path.begin(), path.end(), o.path.begin());
}

UlamHarrisLabel EventLog::label(int id) const {
    UlamHarrisLabel lab;
    for (int v = id; nodes[v].parent >= 0; v = nodes[v].parent) lab.path.push_back(nodes[v].index);
    std::reverse(lab.path.begin(), lab.path.end());
    return lab;
}

int EventLog::find(const UlamHarrisLabel& lab) const {
    if (nodes.empty()) return -1;
    int v = 0;
    for (int step : lab.path) {
        if (step > nodes[v].num_children) return -1;
        v = nodes[v].first_child + step - 1;
    }
    return v;
}

int EventLog::add_event(double t, int parent, const Counts& counts) {
    Node& p = nodes[parent];
    p.death = t;
    int first = static_cast<int>(nodes.size());
    int idx = 0;
    for (int m = 0; m < static_cast<int>(counts.size()); ++m)
        for (int c = 0; c < counts[m]; ++c) {
            Node ch;
            ch.parent = parent;
            ch.index = ++idx;
            ch.type = m;
            ch.birth = t;
            nodes.push_back(ch);
        }
    nodes[parent].first_child = idx ? first : -1;
    nodes[parent].num_children = idx;
    events.push_back(Event{t, parent, nodes[parent].type, counts});
    return first;
}

std::vector<int> EventLog::alive_sorted(double t) const {
    // Depth-first traversal in child order yields lexicographic label order.
    std::vector<int> out;
    if (nodes.empty()) return out;
    std::vector<int> stack{0};
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        const Node& n = nodes[v];
        if (n.birth > t) continue;
        if (t < n.death) {
            out.push_back(v);
            continue;
        }
        for (int c = n.num_children - 1; c >= 0; --c) stack.push_back(n.first_child + c);
    }
    return out;
}

const Counts& draw_offspring(const ModelSpec& spec, int i, Rng& rng) {
    const auto& atoms = spec.offspring[i].atoms;
    double u = uniform01(rng);
    double acc = 0.0;
    for (const auto& a : atoms) {
        acc += a.p;
        if (u < acc) return a.counts;
    }
    for (auto it = atoms.rbegin(); it != atoms.rend(); ++it)
        if (it->p > 0.0) return it->counts;
    return atoms.back().counts;
}

namespace {
// Alive sets per type with O(1) removal.
struct AliveSets {
    std::vector<std::vector<int>> by_type;
    std::vector<int> pos;
    explicit AliveSets(int d) : by_type(d) {}
    void add(int id, int type) {
        if (static_cast<int>(pos.size()) <= id) pos.resize(id + 1, -1);
        pos[id] = static_cast<int>(by_type[type].size());
        by_type[type].push_back(id);
    }
    void remove(int id, int type) {
        auto& v = by_type[type];
        int p = pos[id];
        v[p] = v.back();
        pos[v[p]] = p;
        v.pop_back();
        pos[id] = -1;
    }
};
}  // namespace

EventLog simulate(const ModelSpec& spec, int root_type, double T, Rng& rng, long event_cap) {
    if (event_cap < 1) throw ValidationError("event_cap must be >= 1");
    if (root_type < 0 || root_type >= spec.d) throw ValidationError("root type out of range");
    EventLog log;
    log.T = T;
    log.root_type = root_type;
    log.d = spec.d;
    log.spec_hash = spec.hash();
    Node root;
    root.type = root_type;
    log.nodes.push_back(root);
    AliveSets alive(spec.d);
    alive.add(0, root_type);
    double t = 0.0;
    long nevents = 0;
    std::exponential_distribution<double> expo(1.0);
    for (;;) {
        double total = 0.0;
        for (int m = 0; m < spec.d; ++m) total += spec.alpha[m] * alive.by_type[m].size();
        if (total <= 0.0) break;
        t += expo(rng) / total;
        if (t >= T) break;
        double u = uniform01(rng) * total;
        int m = 0;
        for (; m < spec.d - 1; ++m) {
            double w = spec.alpha[m] * alive.by_type[m].size();
            if (u < w) break;
            u -= w;
        }
        while (alive.by_type[m].empty()) m = (m + 1) % spec.d;
        const auto& set = alive.by_type[m];
        int victim = set[std::min<std::size_t>(static_cast<std::size_t>(uniform01(rng) * set.size()), set.size() - 1)];
        if (++nevents > event_cap)
            throw CapReached("event cap reached: possible explosion or cap too small", std::move(log));
        const Counts& l = draw_offspring(spec, m, rng);
        alive.remove(victim, m);
        int first = log.add_event(t, victim, l);
        for (int c = 0; c < log.nodes[victim].num_children; ++c) alive.add(first + c, log.nodes[first + c].type);
    }
    return log;
}

EventLog simulate(const ModelSpec& spec, int root_type, double T, std::uint64_t seed, long event_cap) {
    Rng rng = make_rng(seed);
    EventLog log = simulate(spec, root_type, T, rng, event_cap);
    log.seed = seed;
    return log;
}

PopulationSnapshot population_at(const EventLog& log, double t) {
    if (t < 0.0 || t > log.T) throw ValidationError("population_at: t outside [0, T]");
    PopulationSnapshot snap;
    snap.time = t;
    int d = log.d;
    for (const auto& n : log.nodes) d = std::max(d, n.type + 1);
    for (const auto& e : log.events) d = std::max(d, static_cast<int>(e.counts.size()));
    snap.counts.assign(d, 0);
    snap.alive = log.alive_sorted(t);
    for (int id : snap.alive) {
        snap.labels.push_back(log.label(id));
        snap.types.push_back(log.nodes[id].type);
        snap.counts[log.nodes[id].type]++;
    }
    snap.total = static_cast<int>(snap.alive.size());
    return snap;
}

ConditionedSample sample_conditioned(const ModelSpec& spec, int root_type, double T, int k, std::uint64_t seed,
                                     long attempt_budget, double survival_hint) {
    double surv = survival_hint;
    if (surv < 0.0) {
        GenFunEngine eng(spec);
        surv = eng.survival_ge_k(T, root_type, k);
    }
    if (!(surv > 1e-12)) throw NumericError("P(N_T >= k) is numerically zero; conditioning infeasible");
    if (attempt_budget <= 0) attempt_budget = static_cast<long>(std::min(1e7 / surv, 1e12));
    Rng rng = make_rng(seed);
    ConditionedSample out;
    for (long a = 1; a <= attempt_budget; ++a) {
        EventLog log = simulate(spec, root_type, T, rng);
        if (static_cast<int>(log.alive_sorted(T).size()) >= k) {
            log.seed = seed;
            out.log = std::move(log);
            out.attempts = a;
            return out;
        }
    }
    throw NumericError("attempt budget of " + std::to_string(attempt_budget) + " exhausted before N_T >= " +
                       std::to_string(k));
}

std::vector<int> uniform_sample(const EventLog& log, int k, Rng& rng) {
    std::vector<int> alive = log.alive_sorted(log.T);
    if (static_cast<int>(alive.size()) < k) throw ValidationError("uniform_sample: N_T < k");
    for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, alive.size() - 1);
        std::swap(alive[i], alive[pick(rng)]);
    }
    alive.resize(k);
    return alive;
}

std::vector<int> uniform_sample(const EventLog& log, int k, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    return uniform_sample(log, k, rng);
}

}  // namespace mbgw
