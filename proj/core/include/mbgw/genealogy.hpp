#pragma once

#include <vector>

#include "mbgw/combinat.hpp"
#include "mbgw/treesim.hpp"

namespace mbgw {

enum class BreakKind { split, colour_change };
const char* to_string(BreakKind k);

struct Breakpoint {
    double t = 0.0;
    ColouredPartition value;  // post-jump value
    BreakKind kind = BreakKind::split;
    int event_node = -1;            // ancestor that died at t
    std::vector<int> parent_block;  // marks carried by that ancestor
};

// Marks are 1..k in sample order.
struct AncestralPath {
    int k = 0;
    double T = 0.0;
    ColouredPartition initial;
    std::vector<Breakpoint> breaks;

    ColouredPartition at(double t) const;  // right-continuous
    int split_count() const;
    // Time separating marks a and b (first split putting them apart); +inf if never.
    double separation_time(int a, int b) const;
};

struct SplitEvent {
    double t = 0.0;
    int parent_type = 0;            // i_h
    Counts l;                       // offspring vector at the split
    ColouredPartition P;            // newly created coloured sub-partition
    std::vector<int> parent_block;  // marks of the block that refined
};

struct SplitRecord {
    int k = 0;
    int root_type = 0;
    double T = 0.0;
    std::vector<SplitEvent> splits;

    int n() const { return static_cast<int>(splits.size()); }
    // Structural checks; throws ValidationError.
    void check(int d, bool require_complete = true) const;
    // Index of the split refining `block`, or -1.
    int split_of_block(const std::vector<int>& block) const;
};

struct Topology {
    std::vector<ColouredPartition> coloured;               // T_0..T_M
    std::vector<std::vector<std::vector<int>>> uncoloured;  // Xi_0..Xi_M
    std::vector<std::vector<int>> G;                        // new blocks per type at tau_h (G_0 = root)
};

AncestralPath ancestral_process(const EventLog& log, const std::vector<int>& sample);
SplitRecord split_record(const AncestralPath& path, const EventLog& log);
Topology topology(const AncestralPath& path, int d);

// The ancestral coloured subsequence P_0..P_M.
std::vector<ColouredPartition> coloured_subsequence(const SplitRecord& rec);

}  // namespace mbgw
