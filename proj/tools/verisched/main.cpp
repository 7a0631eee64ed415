#include <exception>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical job scheduling with verification-guided training"};
    app.require_subcommand(1);

    vcli::GlobalOpts g;
    auto* seed_opt = app.add_option("--seed", g.seed, "Override the command's seed");
    app.add_option("--config", g.config,
                   "JSON config file (experiment-spec schema; commands read their sections)");
    app.add_option("--out-dir", g.out_dir,
                   "Artifact directory (default: vsched-out/<command>-<timestamp>)");

    vcli::ScenarioOpts so;
    auto* scenario = app.add_subcommand("scenario", "Generate or describe a scenario file");
    scenario->fallthrough();
    scenario->add_option("file", so.file, "Existing scenario file to describe");
    scenario->add_option("--tasks", so.tasks, "Generate the default scenario with this many tasks");
    scenario->add_option("--out", so.out, "Write the generated scenario here instead of stdout");

    vcli::TrainOpts to;
    auto* train = app.add_subcommand("train", "Train the car layer or the task layer");
    train->fallthrough();
    train->add_option("--scenario", to.scenario, "Scenario file");
    train->add_option("--layer", to.layer, "upper (task layer, default) or lower (car layer)")
        ->check(CLI::IsMember({"upper", "lower"}));
    train->add_option("--algorithm", to.algorithm, "dqn, ddqn, dueling, or ppo")
        ->check(CLI::IsMember({"dqn", "ddqn", "dueling", "ppo"}));
    train->add_option("--steps", to.steps, "Total step budget");
    auto* alpha_opt =
        train->add_option("--alpha", to.alpha, "Pattern-bonus weight (0 disables the bonus)");
    train->add_option("--historical", to.historical,
                      "Verified scheme whose pattern guides training (needed when alpha != 0)");
    train->add_option("--lower", to.lower,
                      "Frozen car policy: car-layer checkpoint or bare network file "
                      "(default: greedy heuristic)");
    train->add_option("--resume", to.resume, "Task-layer checkpoint to continue from");

    vcli::VerifyOpts vo;
    auto* verify = app.add_subcommand(
        "verify", "Compile and execute a scheme (or run a .rhm program) through the verifier");
    verify->fallthrough();
    verify->add_option("file", vo.file, "Scheme file, or a .rhm modeling program")->required();
    verify->add_option("--scenario", vo.scenario, "Scenario file (scheme input only)");
    verify->add_option("--fuel", vo.fuel, "Execution step limit (.rhm input only)");

    vcli::PatternOpts po;
    auto* pattern =
        app.add_subcommand("pattern", "Extract the station-precedence pattern of a verified scheme");
    pattern->fallthrough();
    pattern->add_option("file", po.file, "Scheme file")->required();
    pattern->add_option("--scenario", po.scenario, "Scenario file");
    pattern->add_option("--match", po.match, "Historical pattern file to score against");
    pattern->add_option("--out", po.out, "Also write the pattern to this file");

    vcli::EvalOpts eo;
    auto* eval = app.add_subcommand("eval", "Greedy evaluation episodes of a trained task layer");
    eval->fallthrough();
    eval->add_option("--checkpoint", eo.checkpoint, "Task-layer checkpoint")->required();
    eval->add_option("--scenario", eo.scenario, "Scenario file");
    eval->add_option("--lower", eo.lower,
                     "Frozen car policy: checkpoint or network file (default: greedy heuristic)");
    eval->add_option("--episodes", eo.episodes, "Evaluation episodes (default 5)");
    auto* eval_alpha = eval->add_option("--alpha", eo.alpha, "Pattern-bonus weight override");
    eval->add_option("--historical", eo.historical, "Verified scheme for pattern-match columns");
    eval->add_option("--emit-scheme", eo.emit_scheme,
                     "Write the greedy episode's scheduling scheme to this file");

    vcli::BenchOpts bo;
    auto* bench = app.add_subcommand(
        "bench", "Run the (algorithm x alpha x seed) sweep from --config and render its table");
    bench->fallthrough();
    bench->add_option("--scenario", bo.scenario, "Override the spec's scenario path");
    bench->add_option("--historical", bo.historical, "Override the spec's historical scheme path");
    bench->add_option("--workers", bo.workers, "Parallel cells (default: hardware threads)");
    bench->add_flag("--table-only", bo.table_only,
                    "Render table and curves from an existing --out-dir without running");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // --help exits 0; usage errors exit 2
    }
    g.has_seed = seed_opt->count() > 0;
    to.has_alpha = alpha_opt->count() > 0;
    eo.has_alpha = eval_alpha->count() > 0;

    try {
        if (scenario->parsed()) return vcli::cmd_scenario(g, so);
        if (train->parsed()) return vcli::cmd_train(g, to);
        if (verify->parsed()) return vcli::cmd_verify(g, vo);
        if (pattern->parsed()) return vcli::cmd_pattern(g, po);
        if (eval->parsed()) return vcli::cmd_eval(g, eo);
        if (bench->parsed()) return vcli::cmd_bench(g, bo);
    } catch (const std::exception& e) {
        std::cerr << "verisched: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
