#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vsched/agents.hpp"

namespace vsched {

// A benchmark sweep: every (algorithm, alpha, seed) triple becomes one
// training-plus-evaluation run ("cell") on the same scenario, sharing one
// frozen car-selection policy. alpha = 0 cells are the unguided baselines;
// alpha != 0 cells add the pattern bonus derived from the historical scheme.
struct ExperimentSpec {
    std::string name = "experiment";
    std::string scenario_path;
    // Verified scheduling scheme whose extracted priority pattern guides the
    // alpha != 0 cells. Required as soon as any alpha is non-zero.
    std::string historical_scheme_path;

    std::vector<Algorithm> algorithms{Algorithm::Dqn, Algorithm::Ddqn, Algorithm::Dueling,
                                      Algorithm::Ppo};
    std::vector<double> alphas{0.0, 0.001};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    int eval_episodes = 5;

    TrainConfig train;     // per-cell template; algorithm and seed are set per cell
    TrainConfig lower;     // shared car-layer run (always the policy-gradient learner)
    RewardConfig rewards;  // per-cell template; alpha is set per cell

    void validate() const;  // throws ValidationError
    std::string to_json() const;
    static ExperimentSpec from_json(const std::string& text);
    static ExperimentSpec from_file(const std::string& path);
};

struct CellId {
    Algorithm algorithm = Algorithm::Dqn;
    double alpha = 0.0;
    std::uint64_t seed = 0;
};

// Directory-safe run id: "<algorithm>_a<alpha>_s<seed>", e.g. "dqn_a0.001_s3".
std::string cell_name(const CellId& id);

// Aggregate persisted per cell as summary.json (next to episodes.csv with
// the training curve and eval.csv with the greedy evaluation episodes).
// Evaluation means are taken over completing episodes; mean_comt stays -1
// when none completed (rendered as "-" in tables).
struct CellSummary {
    CellId id;
    long long steps = 0;
    long long train_episodes = 0;
    long long rz_episodes = 0;
    long long unverified_complete = 0;  // must stay 0; surfaced in the table notes
    bool early_stopped = false;
    double trat_min = 0.0;

    int eval_episodes = 0;
    int eval_completed = 0;
    int eval_verified = 0;
    double mean_comt = -1.0;
    double mean_cumr = 0.0;
    double dect_total_ms = 0.0;
    double dect_mean_ms = 0.0;

    std::string to_json() const;
    static CellSummary from_json(const std::string& text);
    static CellSummary from_file(const std::string& path);
};

struct CellOutcome {
    CellId id;
    std::string dir;      // <out_dir>/runs/<cell_name>
    bool reused = false;  // a persisted summary existed and was kept
    CellSummary summary;
};

struct ExperimentResult {
    std::vector<CellOutcome> cells;  // algorithm-major, then alpha, then seed
    bool lower_reused = false;
    double lower_mean_rq = 0.0;  // greedy selection reward per step of the shared car policy
};

// Runs every cell of the sweep under out_dir:
//   lower_policy.json        shared frozen car policy (reused when present)
//   runs/<cell>/episodes.csv training curve
//   runs/<cell>/eval.csv     greedy evaluation episodes
//   runs/<cell>/summary.json aggregate (written last: its presence marks the
//                            cell done, which is what makes a sweep resumable)
// Cells run on up to `workers` threads (0 picks a hardware-sized pool);
// training outcomes are identical for any worker count because each cell is
// seeded independently (only the wall-clock fields vary between runs).
// After the sweep, throws Error naming every failed cell, if
// any; finished cells keep their files either way.
ExperimentResult run_experiment(const ExperimentSpec& spec, const std::string& out_dir,
                                int workers = 0,
                                const std::function<void(const std::string&)>& log = {});

// Renders the per-(algorithm, alpha) summary table from the persisted
// summary.json files: columns ComT / CumR / DecT / TraT, means over seeds,
// and on guided rows the makespan improvement over the same algorithm's
// alpha = 0 row. Did-not-finish renders as "-", absent cells as "?" plus a
// note. A pure function of the files: unchanged directory, byte-identical
// text.
std::string render_table(const ExperimentSpec& spec, const std::string& out_dir);

// Long-format per-episode training curves ("algorithm,alpha,seed," followed
// by the episode CSV columns) concatenated over all cells whose episodes.csv
// exists, in spec order. Pure in the same sense as render_table.
std::string render_curves(const ExperimentSpec& spec, const std::string& out_dir);

}  // namespace vsched
