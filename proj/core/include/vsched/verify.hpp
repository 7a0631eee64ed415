#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vsched/rhm/interp.hpp"
#include "vsched/scheme.hpp"

namespace vsched {

// One compiled command plus the scheme records it realizes, so failures can
// be traced back to the offending rows.
struct CompiledLine {
    rhm::CmdPtr cmd;
    int task = -1;                                // -1 for commands not tied to one task
    std::vector<std::pair<int, int>> records;     // (task, op) pairs
};

struct ModelingProgram {
    std::vector<CompiledLine> lines;
    std::vector<rhm::CmdPtr> commands() const;
};

// Translates a legal scheduling scheme into a straight-line resource-heap
// program. Each task's records are grouped into runs (same car, back-to-back
// in time); a run becomes one allocation covering its stations, in operation
// order, with the stations pinned to their physical ids. Runs are split
// further until every station's hold window [run start, operation end) is
// free of other records, which keeps allocations from overlapping. Commands
// are ordered by time with releases first, then allocations, bindings,
// handoffs, frees, and completions; ties break by task id.
//
// The scheme may be partial (not every operation of the scenario present)
// but must be legal per validate_scheme.
ModelingProgram compile_scheme(const SchedulingScheme& scheme, const ScenarioConfig& scenario);

enum class Verdict { Verified, ResidualState, Stuck, FuelExhausted };

std::string verdict_name(Verdict v);

// A station acquisition or release observed while executing a program.
// Allocations come from plan/add, releases from exec1. `task` is the owner
// label derived from the car variable (e.g. "t0").
struct OccupancyEvent {
    long long loc = 0;
    std::string task;
    bool allocate = false;
    long long step = 0;  // execution step index
    int line = 0;        // source line of the command
};

struct VerificationReport {
    Verdict verdict = Verdict::Stuck;
    std::string reason;  // stuck reason or residual-state description
    int stuck_line = 0;
    long long steps = 0;
    long long fuel = 0;
    rhm::MachineState final_state;
    std::vector<OccupancyEvent> occupancy;

    // Filled by check_scheme: the declared makespan and an independent
    // sweep over the scheme's station intervals must agree.
    bool makespan_checked = false;
    Slice scheme_makespan = 0;
    Slice sweep_makespan = 0;

    bool verified() const { return verdict == Verdict::Verified; }
};

// Executes a program and classifies the result. Verified means the program
// terminated with both heaps empty and every task variable finished or
// cleared. Fuel defaults to 10 steps per command (minimum 1000).
VerificationReport verify_program(const std::vector<rhm::CmdPtr>& program, long long fuel = 0);

// compile + verify + an independent makespan cross-check. Requires a
// complete scheme (every operation of every task present).
VerificationReport check_scheme(const SchedulingScheme& scheme, const ScenarioConfig& scenario);

std::string report_to_json(const VerificationReport& report);
void write_report_file(const std::string& path, const VerificationReport& report);

}  // namespace vsched
