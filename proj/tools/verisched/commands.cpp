#include "commands.hpp"

#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "vsched/experiments.hpp"
#include "vsched/rhm/parser.hpp"
#include "vsched/scenario.hpp"
#include "vsched/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vsched;

namespace vcli {

namespace {

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << text;
    if (!out) throw Error("cannot write " + path);
}

// The --config file uses the experiment-spec schema; commands read only the
// sections they need, so a bench spec doubles as a train/eval config.
json load_config_json(const std::string& path) {
    if (path.empty()) return json::object();
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw ParseError(1, 1, std::string("bad config JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("config must be a JSON object: " + path);
    return j;
}

std::string section_dump(const json& cfg, const char* key) {
    if (!cfg.contains(key)) return "{}";
    if (!cfg.at(key).is_object())
        throw ValidationError(std::string("config section '") + key + "' must be an object");
    return cfg.at(key).dump();
}

std::string config_path_fallback(const json& cfg, const char* key, const std::string& flag) {
    if (!flag.empty()) return flag;
    if (cfg.contains(key) && cfg.at(key).is_string()) return cfg.at(key).get<std::string>();
    return {};
}

// --out-dir, or a fresh run-stamped directory under vsched-out/.
std::string resolve_out_dir(const GlobalOpts& g, const std::string& command) {
    std::string dir = g.out_dir;
    if (dir.empty()) {
        std::time_t now = std::time(nullptr);
        std::tm tm{};
        gmtime_r(&now, &tm);
        char stamp[32];
        std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
        dir = "vsched-out/" + command + "-" + stamp;
    }
    fs::create_directories(dir);
    return dir;
}

// Accepts either a car-layer checkpoint or a bare network file.
nn::Net load_lower_net(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw ParseError(1, 1, std::string("bad network JSON in ") + path + ": " + e.what());
    }
    if (j.is_object() && j.contains("kind")) {
        Checkpoint ck = load_checkpoint(path);
        if (ck.kind != "lower")
            throw ValidationError("expected a car-layer checkpoint: " + path);
        return ck.primary;
    }
    return nn::Net::load(path);
}

// Empty path falls back to the built-in greedy car heuristic.
std::unique_ptr<LowerPolicy> make_lower_policy(const std::string& path) {
    if (path.empty()) return std::make_unique<GreedyLowerPolicy>();
    return std::make_unique<NetLowerPolicy>(load_lower_net(path));
}

// Historical schemes must verify before their pattern may guide anything.
PriorityPattern pattern_from_scheme_file(const std::string& path, const ScenarioConfig& sc) {
    SchedulingScheme scheme = read_scheme_file(path);
    VerificationReport report = check_scheme(scheme, sc);
    if (!report.verified())
        throw ValidationError("historical scheme failed verification: " + report.reason);
    return extract_pattern(report, sc);
}

void print_report(const VerificationReport& rep) {
    std::cout << "verdict: " << verdict_name(rep.verdict) << " (steps " << rep.steps << ", fuel "
              << rep.fuel << ")\n";
    if (!rep.reason.empty()) std::cout << "reason: " << rep.reason << "\n";
    if (rep.makespan_checked)
        std::cout << "makespan: declared " << rep.scheme_makespan << ", swept "
                  << rep.sweep_makespan << "\n";
    if (rep.occupancy.empty()) return;
    std::cout << "occupancy:\n  loc    event     task  step  line\n";
    for (const OccupancyEvent& ev : rep.occupancy) {
        char line[128];
        std::snprintf(line, sizeof(line), "  %-6s %-9s %-5s %-5lld %d\n",
                      location_label(ev.loc).c_str(), ev.allocate ? "allocate" : "release",
                      ev.task.c_str(), ev.step, ev.line);
        std::cout << line;
    }
}

}  // namespace

int cmd_scenario(const GlobalOpts& g, const ScenarioOpts& o) {
    if (o.file.empty() == (o.tasks == 0))
        throw ValidationError("scenario needs exactly one of FILE (describe) or --tasks (generate)");

    if (!o.file.empty()) {
        ScenarioConfig sc = load_scenario_file(o.file);
        std::cout << "scenario: " << sc.tasks.size() << " tasks, " << sc.total_ops()
                  << " operations, " << sc.equipment.size() << " equipment categories, "
                  << sc.cars << " cars, seed " << sc.seed << "\n";
        for (std::size_t e = 0; e < sc.equipment.size(); ++e)
            std::cout << "  equipment " << e << ": " << sc.equipment[e].workstations
                      << " workstation(s)\n";
        for (std::size_t t = 0; t < sc.tasks.size(); ++t) {
            std::cout << "  t" << t << ":";
            for (const Operation& op : sc.tasks[t].ops)
                std::cout << " e" << op.equipment << "x" << op.duration;
            std::cout << "\n";
        }
        return 0;
    }

    ScenarioConfig sc = default_scenario(o.tasks);
    if (g.has_seed) sc.seed = g.seed;
    if (o.out.empty()) {
        std::cout << save_scenario(sc);
    } else {
        save_scenario_file(sc, o.out);
        std::cout << "wrote " << o.out << "\n";
    }
    return 0;
}

int cmd_train(const GlobalOpts& g, const TrainOpts& o) {
    if (o.layer != "upper" && o.layer != "lower")
        throw ValidationError("--layer must be upper or lower");
    const bool lower_layer = o.layer == "lower";

    json cfg_json = load_config_json(g.config);
    TrainConfig cfg = TrainConfig::from_json(section_dump(cfg_json, lower_layer ? "lower" : "train"));
    if (!o.algorithm.empty()) cfg.algorithm = algorithm_from_name(o.algorithm);
    if (o.steps >= 0) cfg.steps = o.steps;
    if (g.has_seed) cfg.seed = g.seed;
    cfg.validate();

    const std::string scenario_path = config_path_fallback(cfg_json, "scenario", o.scenario);
    if (scenario_path.empty())
        throw ValidationError("train needs --scenario (or a scenario entry in the config)");
    ScenarioConfig sc = load_scenario_file(scenario_path);

    const std::string out = resolve_out_dir(g, "train");

    if (lower_layer) {
        if (!o.resume.empty() || o.has_alpha || !o.historical.empty() || !o.lower.empty())
            throw ValidationError(
                "--resume/--alpha/--historical/--lower apply to the task layer only");
        LowerTrainResult r;
        try {
            r = train_lower(sc, cfg);
        } catch (const Error& e) {
            std::cerr << "training failed: " << e.what() << "\n";
            return 1;
        }
        Checkpoint ck;
        ck.kind = "lower";
        ck.config = cfg;
        ck.step = cfg.steps;
        ck.primary = r.policy;
        ck.secondary = r.value;
        save_checkpoint(out + "/checkpoint.json", ck);
        json summary{{"layer", "lower"},
                     {"steps", cfg.steps},
                     {"episodes", r.episodes},
                     {"mean_rq", r.mean_rq},
                     {"trat_min", r.trat_min}};
        write_text(out + "/summary.json", summary.dump(2) + "\n");
        std::cout << "car layer: " << r.episodes << " episodes, greedy selection reward "
                  << format_double(r.mean_rq) << " per step\n";
        std::cout << "artifacts: " << out << "/checkpoint.json summary.json\n";
        return 0;
    }

    RewardConfig rewards = RewardConfig::from_json(section_dump(cfg_json, "rewards"));
    if (o.has_alpha) rewards.alpha = o.alpha;
    rewards.validate();

    PriorityPattern pattern;
    const bool guided = rewards.alpha != 0.0;
    if (guided) {
        const std::string hist = config_path_fallback(cfg_json, "historical_scheme", o.historical);
        if (hist.empty())
            throw ValidationError("alpha != 0 needs --historical (a verified scheme file)");
        pattern = pattern_from_scheme_file(hist, sc);
    }

    std::unique_ptr<LowerPolicy> lower = make_lower_policy(o.lower);
    Checkpoint resume;
    const Checkpoint* resume_ptr = nullptr;
    if (!o.resume.empty()) {
        resume = load_checkpoint(o.resume);
        resume_ptr = &resume;
    }

    UpperTrainResult r;
    try {
        r = train_upper(sc, rewards, *lower, guided ? &pattern : nullptr, cfg, resume_ptr);
    } catch (const Error& e) {
        std::cerr << "training failed: " << e.what() << "\n";
        return 1;
    }

    write_episode_csv(out + "/episodes.csv", r.episodes);
    Checkpoint ck;
    ck.kind = "upper";
    ck.config = cfg;
    ck.step = r.steps;
    ck.primary = r.online;
    ck.secondary = r.secondary;
    save_checkpoint(out + "/checkpoint.json", ck);
    json summary{{"layer", "upper"},
                 {"algorithm", algorithm_name(cfg.algorithm)},
                 {"alpha", rewards.alpha},
                 {"steps", r.steps},
                 {"episodes", r.episodes.size()},
                 {"rz_episodes", r.rz_episodes},
                 {"unverified_complete", r.unverified_complete},
                 {"early_stopped", r.early_stopped},
                 {"trat_min", r.trat_min}};
    write_text(out + "/summary.json", summary.dump(2) + "\n");
    std::cout << "task layer (" << algorithm_name(cfg.algorithm) << "): " << r.steps << " steps, "
              << r.episodes.size() << " episodes" << (r.early_stopped ? ", stopped early" : "")
              << "\n";
    std::cout << "artifacts: " << out << "/checkpoint.json episodes.csv summary.json\n";
    return 0;
}

int cmd_verify(const GlobalOpts& g, const VerifyOpts& o) {
    const bool program_input = o.file.size() > 4 && o.file.compare(o.file.size() - 4, 4, ".rhm") == 0;
    const std::string out = resolve_out_dir(g, "verify");

    VerificationReport rep;
    if (program_input) {
        if (!o.scenario.empty())
            throw ValidationError("--scenario applies to scheme input, not .rhm programs");
        std::vector<rhm::CmdPtr> program = rhm::parse_program_file(o.file);
        rep = verify_program(program, o.fuel);
    } else {
        if (o.scenario.empty())
            throw ValidationError("verifying a scheme needs --scenario");
        if (o.fuel != 0)
            throw ValidationError("--fuel applies to .rhm program input; scheme fuel is sized "
                                  "automatically");
        ScenarioConfig sc = load_scenario_file(o.scenario);
        SchedulingScheme scheme = read_scheme_file(o.file);
        try {
            ModelingProgram program = compile_scheme(scheme, sc);
            write_text(out + "/program.rhm", rhm::print_program(program.commands()));
            rep = check_scheme(scheme, sc);
        } catch (const ValidationError& e) {
            // An illegal scheme cannot verify; that is a verdict, not a usage error.
            std::cout << "verdict: not verified (illegal scheme)\nreason: " << e.what() << "\n";
            return 1;
        }
    }

    write_report_file(out + "/report.json", rep);
    print_report(rep);
    std::cout << "report: " << out << "/report.json\n";
    return rep.verified() ? 0 : 1;
}

int cmd_pattern(const GlobalOpts&, const PatternOpts& o) {
    if (o.scenario.empty()) throw ValidationError("pattern needs --scenario");
    ScenarioConfig sc = load_scenario_file(o.scenario);
    SchedulingScheme scheme = read_scheme_file(o.file);

    VerificationReport rep;
    try {
        rep = check_scheme(scheme, sc);
    } catch (const ValidationError& e) {
        std::cerr << "scheme is illegal: " << e.what() << "\n";
        return 1;
    }
    if (!rep.verified()) {
        std::cerr << "scheme failed verification: " << rep.reason << "\n";
        return 1;
    }

    PriorityPattern pattern = extract_pattern(rep, sc);
    std::cout << write_pattern(pattern);
    if (!o.match.empty()) {
        PriorityPattern historical = read_pattern_file(o.match);
        MatchResult m = match_patterns(pattern, historical);
        std::cout << "match: " << m.mu_match << "/" << m.mu_total << "\n";
    }
    if (!o.out.empty()) write_pattern_file(o.out, pattern);
    return 0;
}

int cmd_eval(const GlobalOpts& g, const EvalOpts& o) {
    json cfg_json = load_config_json(g.config);
    RewardConfig rewards = RewardConfig::from_json(section_dump(cfg_json, "rewards"));
    if (o.has_alpha) rewards.alpha = o.alpha;
    rewards.validate();
    if (o.episodes < 1) throw ValidationError("--episodes must be at least 1");

    const std::string scenario_path = config_path_fallback(cfg_json, "scenario", o.scenario);
    if (scenario_path.empty())
        throw ValidationError("eval needs --scenario (or a scenario entry in the config)");
    ScenarioConfig sc = load_scenario_file(scenario_path);

    Checkpoint ck = load_checkpoint(o.checkpoint);
    if (ck.kind != "upper")
        throw ValidationError("eval needs a task-layer checkpoint: " + o.checkpoint);
    std::unique_ptr<LowerPolicy> lower = make_lower_policy(o.lower);

    PriorityPattern pattern;
    const PriorityPattern* pattern_ptr = nullptr;
    const std::string hist = config_path_fallback(cfg_json, "historical_scheme", o.historical);
    if (!hist.empty()) {
        pattern = pattern_from_scheme_file(hist, sc);
        pattern_ptr = &pattern;
    }

    EvalResult ev = evaluate_upper(sc, rewards, ck.primary, *lower, o.episodes, pattern_ptr);
    const std::string out = resolve_out_dir(g, "eval");
    write_episode_csv(out + "/eval.csv", ev.episodes);

    for (const EpisodeRow& row : ev.episodes) {
        std::cout << "episode " << row.episode << ": "
                  << (row.complete ? "comt " + fixed(row.comt, 1) : "did not finish") << ", cumr "
                  << fixed(row.cumr, 4);
        if (row.complete) std::cout << ", verified " << (row.verified ? "yes" : "no");
        if (pattern_ptr) std::cout << ", match " << row.mu_match << "/" << row.mu_total;
        std::cout << "\n";
    }
    std::cout << "completed " << ev.completed << "/" << o.episodes << " (verified "
              << ev.verified << ")\n";
    if (ev.completed > 0)
        std::cout << "mean comt " << fixed(ev.mean_comt, 1) << ", mean cumr "
                  << fixed(ev.mean_cumr, 4) << "\n";
    std::cout << "decision time " << fixed(ev.dect_mean_ms, 3) << " ms mean, "
              << fixed(ev.dect_total_ms, 3) << " ms total\n";
    std::cout << "episodes: " << out << "/eval.csv\n";

    if (!o.emit_scheme.empty()) {
        UpperEnv env(sc, rewards, 0);
        while (!env.done())
            env.step(nn::argmax(ck.primary.forward(env.state().features())), *lower);
        if (!env.complete()) {
            std::cerr << "no scheme emitted: the greedy episode did not finish\n";
            return 1;
        }
        write_scheme_file(env.emit_scheme(), o.emit_scheme);
        std::cout << "scheme: " << o.emit_scheme << "\n";
    }
    return 0;
}

int cmd_bench(const GlobalOpts& g, const BenchOpts& o) {
    if (g.config.empty())
        throw ValidationError("bench needs --config with an experiment spec (see ExperimentSpec "
                              "schema in the README)");
    json j = load_config_json(g.config);
    if (!o.scenario.empty()) j["scenario"] = o.scenario;
    if (!o.historical.empty()) j["historical_scheme"] = o.historical;
    ExperimentSpec spec = ExperimentSpec::from_json(j.dump());

    const std::string out = resolve_out_dir(g, "bench");
    bool failed = false;
    std::string failure;
    if (!o.table_only) {
        try {
            run_experiment(spec, out, o.workers,
                           [](const std::string& line) { std::cerr << line << "\n"; });
        } catch (const Error& e) {
            failed = true;
            failure = e.what();
        }
    }

    // The table renders from whatever summaries exist, gaps included.
    const std::string table = render_table(spec, out);
    write_text(out + "/table.txt", table);
    write_text(out + "/curves.csv", render_curves(spec, out));
    std::cout << table;
    std::cout << "artifacts: " << out << "/table.txt curves.csv runs/\n";
    if (failed) {
        std::cerr << "bench: " << failure << "\n";
        return 1;
    }
    return 0;
}

}  // namespace vcli
