#include "mbgw/genealogy.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>

namespace mbgw {

const char* to_string(BreakKind k) { return k == BreakKind::split ? "split" : "colour_change"; }

ColouredPartition AncestralPath::at(double t) const {
    const ColouredPartition* cur = &initial;
    for (const auto& b : breaks) {
        if (b.t > t) break;
        cur = &b.value;
    }
    return *cur;
}

int AncestralPath::split_count() const {
    return static_cast<int>(std::count_if(breaks.begin(), breaks.end(),
                                          [](const Breakpoint& b) { return b.kind == BreakKind::split; }));
}

double AncestralPath::separation_time(int a, int b) const {
    for (const auto& bp : breaks) {
        if (bp.kind != BreakKind::split) continue;
        for (const auto& blk : bp.value.blocks()) {
            bool ha = std::binary_search(blk.members.begin(), blk.members.end(), a);
            bool hb = std::binary_search(blk.members.begin(), blk.members.end(), b);
            if (ha != hb) return bp.t;
            if (ha) break;
        }
    }
    return std::numeric_limits<double>::infinity();
}

namespace {
ColouredPartition group(const EventLog& log, const std::vector<int>& anc) {
    std::map<int, Block> by_node;
    for (std::size_t i = 0; i < anc.size(); ++i) {
        auto& b = by_node[anc[i]];
        b.members.push_back(static_cast<int>(i) + 1);
        b.colour = log.nodes[anc[i]].type;
    }
    std::vector<Block> blocks;
    for (auto& [node, b] : by_node) blocks.push_back(std::move(b));
    return ColouredPartition(std::move(blocks));
}
}  // namespace

AncestralPath ancestral_process(const EventLog& log, const std::vector<int>& sample) {
    const int k = static_cast<int>(sample.size());
    std::set<int> distinct(sample.begin(), sample.end());
    if (static_cast<int>(distinct.size()) != k) throw ValidationError("sample labels must be distinct");
    for (int id : sample)
        if (id < 0 || id >= static_cast<int>(log.nodes.size()) || !log.alive_at(id, log.T))
            throw ValidationError("sampled individual is not alive at T");

    // Lineages as prefix chains: chain[i][g] is the generation-g prefix of mark i's label.
    std::vector<std::vector<int>> chain(k);
    for (int i = 0; i < k; ++i) {
        for (int v = sample[i]; v >= 0; v = log.nodes[v].parent) chain[i].push_back(v);
        std::reverse(chain[i].begin(), chain[i].end());
    }
    std::vector<std::pair<double, int>> deaths;
    std::set<int> seen;
    for (int i = 0; i < k; ++i)
        for (std::size_t g = 0; g + 1 < chain[i].size(); ++g)
            if (seen.insert(chain[i][g]).second) deaths.emplace_back(log.nodes[chain[i][g]].death, chain[i][g]);
    std::sort(deaths.begin(), deaths.end());

    AncestralPath path;
    path.k = k;
    path.T = log.T;
    std::vector<int> pos(k, 0), anc(k);
    for (int i = 0; i < k; ++i) anc[i] = chain[i][0];
    path.initial = group(log, anc);
    ColouredPartition prev = path.initial;
    for (std::size_t e = 0; e < deaths.size(); ++e) {
        auto [t, node] = deaths[e];
        if (e > 0 && t == deaths[e - 1].first) throw ValidationError("corrupt log: simultaneous events");
        std::vector<int> carried;
        for (int i = 0; i < k; ++i)
            if (anc[i] == node) {
                anc[i] = chain[i][++pos[i]];
                carried.push_back(i + 1);
            }
        ColouredPartition cur = group(log, anc);
        Breakpoint bp;
        bp.t = t;
        bp.event_node = node;
        bp.parent_block = carried;
        if (cur.num_blocks() > prev.num_blocks())
            bp.kind = BreakKind::split;
        else if (!(cur == prev))
            bp.kind = BreakKind::colour_change;
        else
            continue;
        bp.value = cur;
        path.breaks.push_back(std::move(bp));
        prev = std::move(cur);
    }
    return path;
}

SplitRecord split_record(const AncestralPath& path, const EventLog& log) {
    SplitRecord rec;
    rec.k = path.k;
    rec.T = path.T;
    rec.root_type = log.root_type;
    for (const auto& bp : path.breaks) {
        if (bp.kind != BreakKind::split) continue;
        if (bp.event_node < 0 || bp.event_node >= static_cast<int>(log.nodes.size()))
            throw ValidationError("path/log mismatch");
        const Node& n = log.nodes[bp.event_node];
        if (n.death != bp.t) throw ValidationError("path/log mismatch: event time");
        SplitEvent se;
        se.t = bp.t;
        se.parent_type = n.type;
        se.parent_block = bp.parent_block;
        auto ev = std::find_if(log.events.begin(), log.events.end(),
                               [&](const Event& e) { return e.parent == bp.event_node; });
        if (ev == log.events.end()) throw ValidationError("path/log mismatch: no event");
        se.l = ev->counts;
        std::vector<Block> created;
        for (const auto& b : bp.value.blocks())
            if (std::includes(bp.parent_block.begin(), bp.parent_block.end(), b.members.begin(), b.members.end()))
                created.push_back(b);
        se.P = ColouredPartition(std::move(created));
        rec.splits.push_back(std::move(se));
    }
    return rec;
}

int SplitRecord::split_of_block(const std::vector<int>& block) const {
    for (int h = 0; h < n(); ++h)
        if (splits[h].parent_block == block) return h;
    return -1;
}

void SplitRecord::check(int d, bool require_complete) const {
    if (k < 1) throw ValidationError("record: k must be >= 1");
    if (n() > k - 1) throw ValidationError("record: more than k-1 splits");
    if (root_type < 0 || root_type >= d) throw ValidationError("record: root type out of range");
    // Live blocks with their colour; replay refinements in time order.
    std::map<std::vector<int>, int> live;
    std::vector<int> all(k);
    for (int i = 0; i < k; ++i) all[i] = i + 1;
    live[all] = root_type;
    double last = 0.0;
    for (int h = 0; h < n(); ++h) {
        const auto& s = splits[h];
        if (!(s.t > last) || !(s.t < T)) throw ValidationError("record: split times must increase inside (0,T)");
        last = s.t;
        if (static_cast<int>(s.l.size()) != d) throw ValidationError("record: offspring vector must have d entries");
        if (s.parent_type < 0 || s.parent_type >= d) throw ValidationError("record: parent type out of range");
        auto it = live.find(s.parent_block);
        if (it == live.end()) throw ValidationError("record: split of a block that is not live");
        if (s.P.members() != s.parent_block) throw ValidationError("record: partition does not cover parent block");
        if (s.P.num_blocks() < 2) throw ValidationError("record: a split needs at least two blocks");
        auto g = s.P.g(d);
        for (int m = 0; m < d; ++m)
            if (g[m] > s.l[m]) throw ValidationError("record: g exceeds offspring count");
        live.erase(it);
        for (const auto& b : s.P.blocks()) live[b.members] = b.colour;
    }
    if (require_complete)
        for (const auto& [blk, c] : live)
            if (blk.size() > 1) throw ValidationError("record: block with several marks never splits");
}

Topology topology(const AncestralPath& path, int d) {
    Topology top;
    top.coloured.push_back(path.initial);
    std::vector<int> g0(d, 0);
    if (!path.initial.blocks().empty()) g0[path.initial.blocks()[0].colour] = 1;
    top.G.push_back(g0);
    for (const auto& bp : path.breaks) {
        if (bp.kind != BreakKind::split) continue;
        top.coloured.push_back(bp.value);
        std::vector<int> g(d, 0);
        for (const auto& b : bp.value.blocks())
            if (std::includes(bp.parent_block.begin(), bp.parent_block.end(), b.members.begin(), b.members.end()))
                g[b.colour]++;
        top.G.push_back(g);
    }
    for (const auto& P : top.coloured) {
        std::vector<std::vector<int>> xi;
        for (const auto& b : P.blocks()) xi.push_back(b.members);
        top.uncoloured.push_back(std::move(xi));
    }
    return top;
}

std::vector<ColouredPartition> coloured_subsequence(const SplitRecord& rec) {
    std::vector<ColouredPartition> out;
    std::vector<int> all(rec.k);
    for (int i = 0; i < rec.k; ++i) all[i] = i + 1;
    out.emplace_back(std::vector<Block>{Block{all, rec.root_type}});
    for (const auto& s : rec.splits) out.push_back(s.P);
    return out;
}

}  // namespace mbgw
