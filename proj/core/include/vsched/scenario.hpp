#pragma once

#include <string>
#include <vector>

#include "vsched/common.hpp"

namespace vsched {

struct Operation {
    int equipment = 0;   // equipment category index into ScenarioConfig::equipment
    Slice duration = 1;  // slices, >= 1

    bool operator==(const Operation&) const = default;
};

struct Task {
    std::vector<Operation> ops;  // executed strictly in order, non-empty

    bool operator==(const Task&) const = default;
};

struct Equipment {
    int workstations = 1;  // parallel stations of this category, >= 1

    bool operator==(const Equipment&) const = default;
};

// A physical station: one workstation of one equipment category. Station
// identity is shared across schemes of the same scenario, which is what makes
// priority patterns comparable between runs.
struct Location {
    int equipment = 0;
    int workstation = 0;

    bool operator==(const Location&) const = default;
    auto operator<=>(const Location&) const = default;
};

// Numeric station id, also used by the modeling language heaps:
// id = (equipment+1)*10 + workstation. Requires workstation < 10, which
// scenario validation enforces. The first equipment category's second
// station is therefore id 11, printed "loc11".
inline long long location_id(const Location& l) {
    return static_cast<long long>(l.equipment + 1) * 10 + l.workstation;
}

inline Location location_from_id(long long id) {
    return Location{static_cast<int>(id / 10) - 1, static_cast<int>(id % 10)};
}

inline std::string location_label(long long id) { return "loc" + std::to_string(id); }

struct ScenarioConfig {
    std::vector<Task> tasks;
    std::vector<Equipment> equipment;
    int cars = 0;
    std::uint64_t seed = 0;  // base seed for car initialisation

    // Total operation count across all tasks; the episode completes when this
    // many assignments have been made.
    int total_ops() const;

    // Throws ValidationError naming the violated invariant.
    void validate() const;

    bool operator==(const ScenarioConfig&) const = default;
};

// n_tasks tasks of five sequential operations over five equipment categories
// with workstation counts (2,2,2,1,2) and three cars. Durations come from a
// fixed seeded table so the same call always yields the same scenario, and a
// task keeps its durations regardless of n_tasks.
ScenarioConfig default_scenario(int n_tasks);

ScenarioConfig load_scenario(const std::string& text);
ScenarioConfig load_scenario_file(const std::string& path);

// Canonical serialization; load(save(s)) == s and save is a normal form
// (save(load(t)) is byte-identical for any already-canonical t).
std::string save_scenario(const ScenarioConfig& s);
void save_scenario_file(const ScenarioConfig& s, const std::string& path);

}  // namespace vsched
