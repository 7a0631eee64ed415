#pragma once

#include <cstdint>
#include <string>

namespace vcli {

// Flags shared by every subcommand. `config` points at a JSON file in the
// experiment-spec schema; each command reads only the sections it needs.
struct GlobalOpts {
    bool has_seed = false;
    std::uint64_t seed = 0;
    std::string config;
    std::string out_dir;  // empty picks vsched-out/<command>-<timestamp>
};

struct ScenarioOpts {
    std::string file;  // describe an existing scenario
    int tasks = 0;     // or generate the default one at this size
    std::string out;
};

struct TrainOpts {
    std::string scenario;
    std::string layer = "upper";
    std::string algorithm;
    std::string historical;
    std::string lower;   // frozen car policy (checkpoint or raw net)
    std::string resume;  // task-layer checkpoint to continue from
    long long steps = -1;
    bool has_alpha = false;
    double alpha = 0.0;
};

struct VerifyOpts {
    std::string file;  // .rhm program, or a scheme (needs --scenario)
    std::string scenario;
    long long fuel = 0;
};

struct PatternOpts {
    std::string file;
    std::string scenario;
    std::string match;  // historical pattern file to score against
    std::string out;
};

struct EvalOpts {
    std::string checkpoint;
    std::string scenario;
    std::string lower;
    std::string historical;
    std::string emit_scheme;  // write the greedy episode's scheme here
    int episodes = 5;
    bool has_alpha = false;
    double alpha = 0.0;
};

struct BenchOpts {
    std::string scenario;    // overrides the spec's scenario path
    std::string historical;  // overrides the spec's historical scheme path
    int workers = 0;
    bool table_only = false;
};

// Each command returns its process exit code: 0 success, 1 operational
// failure (non-verified input, diverged or failed runs), and throws for
// setup problems (unreadable/malformed files, bad flag combinations), which
// the caller maps to exit 2.
int cmd_scenario(const GlobalOpts& g, const ScenarioOpts& o);
int cmd_train(const GlobalOpts& g, const TrainOpts& o);
int cmd_verify(const GlobalOpts& g, const VerifyOpts& o);
int cmd_pattern(const GlobalOpts& g, const PatternOpts& o);
int cmd_eval(const GlobalOpts& g, const EvalOpts& o);
int cmd_bench(const GlobalOpts& g, const BenchOpts& o);

}  // namespace vcli
