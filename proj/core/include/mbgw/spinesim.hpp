#pragma once

#include <optional>
#include <vector>

#include "mbgw/combinat.hpp"
#include "mbgw/genealogy.hpp"
#include "mbgw/genfun.hpp"
#include "mbgw/treesim.hpp"

namespace mbgw {

// Marks moved at one event: (mark, 1-based child index).
struct MarkMove {
    int event = -1;  // index into EventLog::events
    std::vector<std::pair<int, int>> moves;
};

// A tree with k marks. holder[h-1] is the node carrying mark h at T, or the
// childless leaf where it died.
struct MarkedRun {
    EventLog log;
    int k = 0;
    std::vector<int> holder;
    std::vector<MarkMove> moves;
    bool marks_alive() const;
    bool marks_distinct() const;
};

// Reference measure: marks follow xi-weighted urns on a tree drawn from P_r.
MarkedRun simulate_reference(const ModelSpec& spec, int root_type, int k, double T, std::uint64_t seed);
// Redraws the mark trajectories on a fixed tree.
MarkedRun replay_marks(const ModelSpec& spec, const EventLog& log, int k, Rng& rng);
// Probability of a mark path ending at `leaf` under the urn rule (prod xi_c / (L.xi)).
double mark_path_probability(const ModelSpec& spec, const EventLog& log, int leaf);

struct SpineWeight {
    double value = 0.0;             // g_{k,T}
    std::vector<double> per_mark;   // factor of each mark
    double zeta_numerator = 0.0;    // g_{k,T} e^{-theta.Z_T}
};
SpineWeight spine_weight(const ModelSpec& spec, const MarkedRun& run, const Vec& theta);

// One event of a particle carrying marks. P has one block for a birth off the spine.
struct SpineEvent {
    double t = 0.0;
    int parent_type = 0;
    Counts l;
    ColouredPartition P;
    std::vector<int> parent_block;
    bool is_split() const { return P.num_blocks() >= 2; }
};

struct QRun : MarkedRun {
    std::vector<SpineEvent> spine_events;
    bool truncated = false;  // stopped early (stop_after_splits)
    SplitRecord record(int root_type, double T) const;
};

struct QSimOptions {
    bool marked_only = false;     // skip particles without marks
    int stop_after_splits = -1;   // stop once this many splits happened (-1: run to T)
    bool rigged_first_born = false;  // negative control: marks go to the first children
    int grid = 1024;
    long event_cap = 10'000'000;
};

// Forward construction of Q^{(k,theta)}_{T,r}. Construction is expensive
// (ODE tables, pattern lists); run() is cheap and thread-safe.
class QSimulator {
public:
    QSimulator(const GenFunEngine& eng, int root_type, int k, double T, const Vec& theta, QSimOptions opt = {});

    QRun run(Rng& rng) const;
    QRun run(std::uint64_t seed) const;

    // Total event rate of a type-i particle with h marks at time t (sum over patterns).
    double marked_rate(int i, int h, double t) const;
    double unmarked_rate(int i, double t) const;
    double unmarked_majorant(int i) const { return majorant_[i]; }
    const Trajectory& trajectory() const { return traj_; }

    struct Pattern {
        Counts l;
        double p = 0.0;
        BlockSizeProfile profile;
        std::vector<int> g;
        double multiplicity = 0.0;  // count of labelled partitions x l^[g]
    };
    const std::vector<Pattern>& patterns(int i, int h) const { return patterns_[i][h]; }

private:
    double pattern_weight(const Pattern& pt, int i, double u) const;
    double sample_marked_time(int i, int h, double t0, Rng& rng) const;

    const GenFunEngine& eng_;
    const ModelSpec& spec_;
    int r_, k_;
    double T_;
    Vec theta_;
    QSimOptions opt_;
    Trajectory traj_;
    std::vector<std::vector<std::vector<Pattern>>> patterns_;  // [i][h]
    std::vector<double> majorant_;
    std::string spec_hash_;
};

QRun simulate_Q(const GenFunEngine& eng, int root_type, int k, double T, const Vec& theta, std::uint64_t seed,
                QSimOptions opt = {});

// Ratio E[N^{[j]} e^{-(theta+mu).Z}] / E[N^{[j]} e^{-theta.Z}] over horizon T - t,
// started from one particle of type v_type.
double subpop_laplace(const GenFunEngine& eng, double t, int v_type, int j, double T, const Vec& theta,
                      const Vec& mu);

// Probability of each step-4 outcome (labelled partition plus injective block-to-child map).
Rational step4_outcome_probability(int h, const Counts& l, const BlockSizeProfile& profile);

}  // namespace mbgw
