#pragma once

#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "mbgw/model.hpp"

namespace mbgw {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

struct Block {
    std::vector<int> members;  // sorted mark labels, 1-based
    int colour = 0;            // 0-based type
    bool operator==(const Block&) const = default;
};

// Blocks are kept sorted by least member. The partition need not cover [k]:
// split records hold partitions of a parent block's marks.
class ColouredPartition {
public:
    ColouredPartition() = default;
    ColouredPartition(std::vector<Block> blocks);

    const std::vector<Block>& blocks() const { return blocks_; }
    int num_marks() const;
    int num_blocks() const { return static_cast<int>(blocks_.size()); }

    std::vector<int> g(int d) const;                      // blocks per colour
    std::vector<std::vector<int>> sizes(int d) const;     // a_{m,q}, descending per colour
    std::vector<int> abar(int d) const;                   // marks per colour
    std::vector<int> members() const;                     // sorted union

    std::string text() const;                             // "{1,3,4}:1|{2,5,6}:3"
    static ColouredPartition parse(const std::string& s);

    bool operator==(const ColouredPartition&) const = default;
    bool operator<(const ColouredPartition& o) const { return text() < o.text(); }

private:
    std::vector<Block> blocks_;
};

// Per colour, the multiset of block sizes (kept in descending order).
struct BlockSizeProfile {
    std::vector<std::vector<int>> sizes;
    int total() const;
    std::vector<int> g() const;
    bool operator==(const BlockSizeProfile&) const = default;
    bool operator<(const BlockSizeProfile& o) const { return sizes < o.sizes; }
};

BlockSizeProfile profile_of(const ColouredPartition& P, int d);

BigInt falling_factorial(long n, long j);
double falling_factorial_d(double n, int j);
BigInt vector_falling(const Counts& l, const std::vector<int>& g);
BigInt factorial(long n);

// Probability that k marks following xi-weighted urns realise exactly P given l.
struct UrnProbability {
    double value = 0.0;
    bool impossible = false;
};
UrnProbability urn_assignment_probability(const ModelSpec& spec, const Counts& l,
                                          const ColouredPartition& P);

BigInt count_partitions_with_profile(int k, const BlockSizeProfile& profile);

// Exhaustive listing of coloured partitions of [k] with d colours (k <= 8).
std::vector<ColouredPartition> enumerate_coloured_partitions(int k, int d,
                                                             const BlockSizeProfile* constraint = nullptr);

// All profiles of h marks into coloured blocks with g_m <= cap[m].
std::vector<BlockSizeProfile> enumerate_profiles(int h, const std::vector<int>& cap);

// Left and right sides of the corollary prefactor identity, exact:
//   k!/prod abar_m! * prod_m C(l_m,g_m) abar_m!/prod_q a_{m,q}! * g_m!/prod_n d_{m,n}!
//   == count_partitions_with_profile * l^{[g]}
Rational corollary_prefactor(int k, const Counts& l, const BlockSizeProfile& profile);
Rational proposition_prefactor(int k, const Counts& l, const BlockSizeProfile& profile);

}  // namespace mbgw
