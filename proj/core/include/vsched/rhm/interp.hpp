#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vsched/rhm/ast.hpp"
#include "vsched/rhm/state.hpp"

namespace vsched::rhm {

// A configuration is the remaining command stack plus the machine state.
// step() executes exactly one rule on the head command.
struct Config {
    std::vector<CmdPtr> stack;  // back() is executed next
    MachineState state;
};

Config make_config(const std::vector<CmdPtr>& program, MachineState initial = {});

// What one step did, for traces and occupancy extraction. Owner labels come
// from the planned car variable's annotation ("c1@0" -> "t0").
struct StepNote {
    std::string rule;  // skip|assign|locget|seq|if-true|if-false|while-true|while-false|
                       // plan|asgn|att|free|comp|add|exec1
    int line = 0;
    std::string task;                 // task variable touched, if any
    long long car = -1;               // car resource allocated/freed/executed, if any
    std::vector<long long> alloc_locs;  // locations allocated (plan/add)
    long long freed_loc = -1;           // location released (exec1)
};

struct StepOk {
    Config next;
    StepNote note;
};

struct StepStuck {
    std::string reason;
    int line = 0;
};

// One small step. Returns the stuck verdict (violated precondition or
// evaluation error) instead of a next configuration when no rule applies.
// Deterministic: equal configurations always step identically.
std::optional<StepOk> step(const Config& cfg, StepStuck* stuck);

enum class RunStatus { Terminated, Stuck, FuelExhausted };

struct TraceEntry {
    StepNote note;
    MachineState state;  // state after the step
};

struct RunResult {
    RunStatus status = RunStatus::Terminated;
    std::string stuck_reason;
    int stuck_line = 0;
    Config final_config;
    long long steps = 0;
    std::vector<TraceEntry> trace;  // populated only when keep_trace
};

RunResult run(const std::vector<CmdPtr>& program, MachineState initial, long long fuel,
              bool keep_trace = false);

// Number of command nodes in a program (used to size fuel budgets).
long long command_count(const std::vector<CmdPtr>& program);

}  // namespace vsched::rhm
