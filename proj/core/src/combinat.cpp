#include "mbgw/combinat.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace mbgw {

ColouredPartition::ColouredPartition(std::vector<Block> blocks) : blocks_(std::move(blocks)) {
    std::set<int> seen;
    for (auto& b : blocks_) {
        if (b.members.empty()) throw ValidationError("empty block in coloured partition");
        std::sort(b.members.begin(), b.members.end());
        for (int x : b.members)
            if (x < 1 || !seen.insert(x).second) throw ValidationError("blocks must be disjoint with labels >= 1");
        if (b.colour < 0) throw ValidationError("negative colour");
    }
    std::sort(blocks_.begin(), blocks_.end(),
              [](const Block& a, const Block& b) { return a.members.front() < b.members.front(); });
}

int ColouredPartition::num_marks() const {
    int n = 0;
    for (const auto& b : blocks_) n += static_cast<int>(b.members.size());
    return n;
}

std::vector<int> ColouredPartition::g(int d) const {
    std::vector<int> out(d, 0);
    for (const auto& b : blocks_) out.at(b.colour)++;
    return out;
}

std::vector<std::vector<int>> ColouredPartition::sizes(int d) const {
    std::vector<std::vector<int>> out(d);
    for (const auto& b : blocks_) out.at(b.colour).push_back(static_cast<int>(b.members.size()));
    for (auto& v : out) std::sort(v.rbegin(), v.rend());
    return out;
}

std::vector<int> ColouredPartition::abar(int d) const {
    std::vector<int> out(d, 0);
    for (const auto& b : blocks_) out.at(b.colour) += static_cast<int>(b.members.size());
    return out;
}

std::vector<int> ColouredPartition::members() const {
    std::vector<int> out;
    for (const auto& b : blocks_) out.insert(out.end(), b.members.begin(), b.members.end());
    std::sort(out.begin(), out.end());
    return out;
}

std::string ColouredPartition::text() const {
    std::string s;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        if (i) s += "|";
        s += "{";
        for (std::size_t j = 0; j < blocks_[i].members.size(); ++j) {
            if (j) s += ",";
            s += std::to_string(blocks_[i].members[j]);
        }
        s += "}:" + std::to_string(blocks_[i].colour + 1);
    }
    return s;
}

ColouredPartition ColouredPartition::parse(const std::string& s) {
    std::vector<Block> blocks;
    std::size_t pos = 0;
    auto fail = [&]() { throw ValidationError("malformed coloured partition: \"" + s + "\""); };
    while (pos < s.size()) {
        if (s[pos] != '{') fail();
        auto close = s.find('}', pos);
        if (close == std::string::npos) fail();
        Block b;
        std::stringstream in(s.substr(pos + 1, close - pos - 1));
        std::string item;
        while (std::getline(in, item, ',')) {
            try {
                b.members.push_back(std::stoi(item));
            } catch (...) {
                fail();
            }
        }
        if (close + 1 >= s.size() || s[close + 1] != ':') fail();
        auto bar = s.find('|', close);
        std::string col = s.substr(close + 2, bar == std::string::npos ? std::string::npos : bar - close - 2);
        try {
            b.colour = std::stoi(col) - 1;
        } catch (...) {
            fail();
        }
        blocks.push_back(std::move(b));
        if (bar == std::string::npos) break;
        pos = bar + 1;
    }
    return ColouredPartition(std::move(blocks));
}

int BlockSizeProfile::total() const {
    int t = 0;
    for (const auto& v : sizes) t = std::accumulate(v.begin(), v.end(), t);
    return t;
}

std::vector<int> BlockSizeProfile::g() const {
    std::vector<int> out;
    for (const auto& v : sizes) out.push_back(static_cast<int>(v.size()));
    return out;
}

BlockSizeProfile profile_of(const ColouredPartition& P, int d) { return BlockSizeProfile{P.sizes(d)}; }

BigInt factorial(long n) {
    BigInt r = 1;
    for (long i = 2; i <= n; ++i) r *= i;
    return r;
}

BigInt falling_factorial(long n, long j) {
    if (j > n) return 0;
    BigInt r = 1;
    for (long i = 0; i < j; ++i) r *= (n - i);
    return r;
}

double falling_factorial_d(double n, int j) {
    double r = 1.0;
    for (int i = 0; i < j; ++i) r *= (n - i);
    return n < j ? 0.0 : r;
}

BigInt vector_falling(const Counts& l, const std::vector<int>& g) {
    BigInt r = 1;
    for (std::size_t m = 0; m < g.size(); ++m)
        if (g[m] != 0) r *= falling_factorial(l[m], g[m]);
    return r;
}

UrnProbability urn_assignment_probability(const ModelSpec& spec, const Counts& l, const ColouredPartition& P) {
    UrnProbability out;
    auto g = P.g(spec.d);
    auto ab = P.abar(spec.d);
    for (int m = 0; m < spec.d; ++m)
        if (g[m] > l[m]) {
            out.impossible = true;
            return out;
        }
    double lx = 0.0;
    for (int m = 0; m < spec.d; ++m) lx += l[m] * spec.xi[m];
    double v = 1.0;
    for (int m = 0; m < spec.d; ++m) {
        if (g[m] == 0) continue;
        v *= std::pow(spec.xi[m] / lx, ab[m]) * falling_factorial_d(l[m], g[m]);
    }
    out.value = v;
    return out;
}

BigInt count_partitions_with_profile(int k, const BlockSizeProfile& profile) {
    if (profile.total() != k) throw ValidationError("profile does not sum to k");
    BigInt den = 1;
    for (const auto& v : profile.sizes) {
        std::map<int, int> mult;
        for (int a : v) {
            den *= factorial(a);
            mult[a]++;
        }
        for (auto [a, c] : mult) den *= factorial(c);
    }
    return factorial(k) / den;
}

std::vector<ColouredPartition> enumerate_coloured_partitions(int k, int d, const BlockSizeProfile* constraint) {
    if (k > 8) throw ValidationError("enumeration refused for k > 8");
    std::vector<ColouredPartition> out;
    if (k < 1) return out;
    std::vector<int> rgs(k, 0);
    // Restricted growth strings enumerate set partitions once each.
    std::function<void(int, int)> rec = [&](int pos, int nblocks) {
        if (pos == k) {
            std::vector<int> colour(nblocks, 0);
            std::function<void(int)> colour_rec = [&](int b) {
                if (b == nblocks) {
                    std::vector<Block> blocks(nblocks);
                    for (int x = 0; x < k; ++x) blocks[rgs[x]].members.push_back(x + 1);
                    for (int q = 0; q < nblocks; ++q) blocks[q].colour = colour[q];
                    ColouredPartition P(std::move(blocks));
                    if (!constraint || profile_of(P, d) == *constraint) out.push_back(std::move(P));
                    return;
                }
                for (int c = 0; c < d; ++c) {
                    colour[b] = c;
                    colour_rec(b + 1);
                }
            };
            colour_rec(0);
            return;
        }
        for (int b = 0; b <= nblocks; ++b) {
            rgs[pos] = b;
            rec(pos + 1, std::max(nblocks, b + 1));
        }
    };
    rgs[0] = 0;
    rec(1, 1);
    return out;
}

namespace {
// Integer partitions of n into at most maxparts parts, each <= maxpart, descending.
void int_partitions(int n, int maxpart, int maxparts, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    if (n == 0) {
        out.push_back(cur);
        return;
    }
    if (maxparts == 0) return;
    for (int p = std::min(n, maxpart); p >= 1; --p) {
        cur.push_back(p);
        int_partitions(n - p, p, maxparts - 1, cur, out);
        cur.pop_back();
    }
}
}  // namespace

std::vector<BlockSizeProfile> enumerate_profiles(int h, const std::vector<int>& cap) {
    const int d = static_cast<int>(cap.size());
    std::vector<BlockSizeProfile> out;
    BlockSizeProfile cur;
    cur.sizes.resize(d);
    std::function<void(int, int)> rec = [&](int m, int left) {
        if (m == d) {
            if (left == 0) out.push_back(cur);
            return;
        }
        for (int amt = 0; amt <= left; ++amt) {
            std::vector<std::vector<int>> parts;
            std::vector<int> tmp;
            int_partitions(amt, amt, cap[m], tmp, parts);
            for (auto& p : parts) {
                cur.sizes[m] = p;
                rec(m + 1, left - amt);
            }
        }
        cur.sizes[m].clear();
    };
    rec(0, h);
    return out;
}

Rational corollary_prefactor(int k, const Counts& l, const BlockSizeProfile& profile) {
    const int d = static_cast<int>(profile.sizes.size());
    Rational r = Rational(factorial(k));
    for (int m = 0; m < d; ++m) {
        const auto& v = profile.sizes[m];
        int g = static_cast<int>(v.size());
        int ab = std::accumulate(v.begin(), v.end(), 0);
        r /= Rational(factorial(ab));
        if (g > l[m]) return Rational(0);
        Rational binom = Rational(factorial(l[m])) / Rational(factorial(g) * factorial(l[m] - g));
        Rational marks = Rational(factorial(ab));
        std::map<int, int> mult;
        for (int a : v) {
            marks /= Rational(factorial(a));
            mult[a]++;
        }
        Rational alloc = Rational(factorial(g));
        for (auto [a, c] : mult) alloc /= Rational(factorial(c));
        r *= binom * marks * alloc;
    }
    return r;
}

Rational proposition_prefactor(int k, const Counts& l, const BlockSizeProfile& profile) {
    return Rational(count_partitions_with_profile(k, profile) * vector_falling(l, profile.g()));
}

}  // namespace mbgw
