#pragma once

#include <string>
#include <vector>

#include "vsched/scenario.hpp"

namespace vsched {

// One executed operation of a scheduling scheme. Times are half-open slices
// [start, end).
struct SchemeRecord {
    int task = 0;
    int op = 0;
    int equipment = 0;
    int workstation = 0;
    int car = 0;
    Slice start = 0;
    Slice end = 0;

    Location location() const { return Location{equipment, workstation}; }
    bool operator==(const SchemeRecord&) const = default;
};

struct SchedulingScheme {
    std::vector<SchemeRecord> records;
    bool operator==(const SchedulingScheme&) const = default;
};

// Thrown by makespan() when records are missing; carries every absent pair.
struct IncompleteSchemeError : ValidationError {
    std::vector<std::pair<int, int>> missing;  // (task, op)
    explicit IncompleteSchemeError(std::vector<std::pair<int, int>> m);
};

// Latest end time over a complete scheme for the scenario; 0 when the
// scenario has no operations. Permutation-invariant in the record order.
Slice makespan(const SchedulingScheme& scheme, const ScenarioConfig& scenario);

// Checks legality of an arbitrary (possibly partial) record set: records
// reference valid tasks/ops/stations/cars, durations match the scenario,
// per-task operations appear in order without overlap, and no station or car
// is used by two records at once. Throws ValidationError naming the violated
// invariant. Completeness is only required by makespan().
void validate_scheme(const SchedulingScheme& scheme, const ScenarioConfig& scenario);

// Text format: header "task,op,equipment,workstation,car,start,end", one CSV
// record per line, records sorted by (start, task, op).
SchedulingScheme read_scheme(const std::string& text);
SchedulingScheme read_scheme_file(const std::string& path);
std::string write_scheme(const SchedulingScheme& scheme);
void write_scheme_file(const SchedulingScheme& scheme, const std::string& path);

}  // namespace vsched
