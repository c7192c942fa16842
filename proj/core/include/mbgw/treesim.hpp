#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mbgw/model.hpp"
#include "mbgw/rng.hpp"

namespace mbgw {

// Ulam-Harris label: path of 1-based child positions; empty is the root.
struct UlamHarrisLabel {
    std::vector<int> path;
    std::string str() const;  // "1.3.2", root ""
    static UlamHarrisLabel parse(const std::string& s);
    std::size_t generation() const { return path.size(); }
    bool is_prefix_of(const UlamHarrisLabel& o) const;
    bool operator==(const UlamHarrisLabel&) const = default;
    auto operator<=>(const UlamHarrisLabel&) const = default;
};

struct Node {
    int parent = -1;
    int index = 0;  // 1-based position among siblings
    int type = 0;
    double birth = 0.0;
    double death = std::numeric_limits<double>::infinity();
    int first_child = -1;
    int num_children = 0;
};

struct Event {
    double t = 0.0;
    int parent = -1;  // node id of the dying particle
    int ptype = 0;
    Counts counts;
};

// Children of an event are numbered type-major: all type-1 children first.
struct EventLog {
    double T = 0.0;
    int root_type = 0;
    int d = 0;  // number of types; 0 when unknown
    std::uint64_t seed = 0;
    std::string spec_hash;
    std::vector<Node> nodes;
    std::vector<Event> events;

    UlamHarrisLabel label(int id) const;
    int find(const UlamHarrisLabel& lab) const;  // -1 if absent
    bool alive_at(int id, double t) const { return nodes[id].birth <= t && t < nodes[id].death; }
    // Appends children for an event; returns the first child id.
    int add_event(double t, int parent, const Counts& counts);
    // Alive ids at T in lexicographic label order.
    std::vector<int> alive_sorted(double t) const;
};

struct PopulationSnapshot {
    double time = 0.0;
    std::vector<int> alive;  // node ids
    std::vector<UlamHarrisLabel> labels;
    std::vector<int> types;
    Counts counts;
    int total = 0;
};

struct CapReached : NumericError {
    EventLog partial;
    CapReached(const std::string& msg, EventLog log) : NumericError(msg), partial(std::move(log)) {}
};

// Samples an offspring vector of type i.
const Counts& draw_offspring(const ModelSpec& spec, int i, Rng& rng);

EventLog simulate(const ModelSpec& spec, int root_type, double T, std::uint64_t seed, long event_cap = 10'000'000);
EventLog simulate(const ModelSpec& spec, int root_type, double T, Rng& rng, long event_cap = 10'000'000);
PopulationSnapshot population_at(const EventLog& log, double t);

struct ConditionedSample {
    EventLog log;
    long attempts = 0;
};
ConditionedSample sample_conditioned(const ModelSpec& spec, int root_type, double T, int k, std::uint64_t seed,
                                     long attempt_budget = 0, double survival_hint = -1.0);
// k distinct alive ids at T, in draw order.
std::vector<int> uniform_sample(const EventLog& log, int k, std::uint64_t seed);
std::vector<int> uniform_sample(const EventLog& log, int k, Rng& rng);

}  // namespace mbgw
