#include "vsched/experiments.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "vsched/scenario.hpp"
#include "vsched/verify.hpp"

namespace fs = std::filesystem;

namespace vsched {

namespace {

using nlohmann::json;

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << text;
    if (!out) throw Error("cannot write " + path);
}

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

}  // namespace

void ExperimentSpec::validate() const {
    if (name.empty()) throw ValidationError("experiment name must not be empty");
    if (scenario_path.empty()) throw ValidationError("experiment needs a scenario path");
    if (algorithms.empty()) throw ValidationError("experiment needs at least one algorithm");
    if (alphas.empty()) throw ValidationError("experiment needs at least one alpha");
    if (seeds.empty()) throw ValidationError("experiment needs at least one seed");
    if (eval_episodes < 1) throw ValidationError("eval_episodes must be at least 1");
    bool any_guided = false;
    for (double a : alphas) {
        if (!(a >= 0.0)) throw ValidationError("alphas must be non-negative");
        any_guided = any_guided || a != 0.0;
    }
    if (any_guided && historical_scheme_path.empty())
        throw ValidationError("guided cells (alpha != 0) need a historical scheme path");
    std::set<std::string> names;
    for (Algorithm alg : algorithms)
        for (double a : alphas)
            for (std::uint64_t s : seeds)
                if (!names.insert(cell_name(CellId{alg, a, s})).second)
                    throw ValidationError("duplicate cell " + cell_name(CellId{alg, a, s}));
    train.validate();
    lower.validate();
    rewards.validate();
}

std::string ExperimentSpec::to_json() const {
    json j;
    j["name"] = name;
    j["scenario"] = scenario_path;
    j["historical_scheme"] = historical_scheme_path;
    json algs = json::array();
    for (Algorithm a : algorithms) algs.push_back(algorithm_name(a));
    j["algorithms"] = algs;
    j["alphas"] = alphas;
    j["seeds"] = seeds;
    j["eval_episodes"] = eval_episodes;
    j["train"] = json::parse(train.to_json());
    j["lower"] = json::parse(lower.to_json());
    j["rewards"] = json::parse(rewards.to_json());
    return j.dump(2) + "\n";
}

ExperimentSpec ExperimentSpec::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(1, 1, std::string("bad experiment JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("experiment spec must be a JSON object");
    ExperimentSpec spec;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "name") spec.name = value.get<std::string>();
            else if (key == "scenario") spec.scenario_path = value.get<std::string>();
            else if (key == "historical_scheme") spec.historical_scheme_path = value.get<std::string>();
            else if (key == "algorithms") {
                spec.algorithms.clear();
                for (const auto& a : value) spec.algorithms.push_back(algorithm_from_name(a.get<std::string>()));
            }
            else if (key == "alphas") spec.alphas = value.get<std::vector<double>>();
            else if (key == "seeds") spec.seeds = value.get<std::vector<std::uint64_t>>();
            else if (key == "eval_episodes") spec.eval_episodes = value.get<int>();
            else if (key == "train") spec.train = TrainConfig::from_json(value.dump());
            else if (key == "lower") spec.lower = TrainConfig::from_json(value.dump());
            else if (key == "rewards") spec.rewards = RewardConfig::from_json(value.dump());
            else throw ValidationError("unknown experiment key '" + key + "'");
        } catch (const json::exception& e) {
            throw ValidationError("bad value for experiment key '" + key + "': " + e.what());
        }
    }
    spec.validate();
    return spec;
}

ExperimentSpec ExperimentSpec::from_file(const std::string& path) {
    return from_json(read_text_file(path));
}

std::string cell_name(const CellId& id) {
    return algorithm_name(id.algorithm) + "_a" + format_double(id.alpha) + "_s" +
           std::to_string(id.seed);
}

std::string CellSummary::to_json() const {
    json j;
    j["format"] = 1;
    j["algorithm"] = algorithm_name(id.algorithm);
    j["alpha"] = id.alpha;
    j["seed"] = id.seed;
    j["steps"] = steps;
    j["train_episodes"] = train_episodes;
    j["rz_episodes"] = rz_episodes;
    j["unverified_complete"] = unverified_complete;
    j["early_stopped"] = early_stopped;
    j["trat_min"] = trat_min;
    j["eval_episodes"] = eval_episodes;
    j["eval_completed"] = eval_completed;
    j["eval_verified"] = eval_verified;
    j["mean_comt"] = mean_comt;
    j["mean_cumr"] = mean_cumr;
    j["dect_total_ms"] = dect_total_ms;
    j["dect_mean_ms"] = dect_mean_ms;
    return j.dump(2) + "\n";
}

CellSummary CellSummary::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(1, 1, std::string("bad cell summary JSON: ") + e.what());
    }
    try {
        if (j.at("format").get<int>() != 1) throw ValidationError("unsupported cell summary format");
        CellSummary s;
        s.id.algorithm = algorithm_from_name(j.at("algorithm").get<std::string>());
        s.id.alpha = j.at("alpha").get<double>();
        s.id.seed = j.at("seed").get<std::uint64_t>();
        s.steps = j.at("steps").get<long long>();
        s.train_episodes = j.at("train_episodes").get<long long>();
        s.rz_episodes = j.at("rz_episodes").get<long long>();
        s.unverified_complete = j.at("unverified_complete").get<long long>();
        s.early_stopped = j.at("early_stopped").get<bool>();
        s.trat_min = j.at("trat_min").get<double>();
        s.eval_episodes = j.at("eval_episodes").get<int>();
        s.eval_completed = j.at("eval_completed").get<int>();
        s.eval_verified = j.at("eval_verified").get<int>();
        s.mean_comt = j.at("mean_comt").get<double>();
        s.mean_cumr = j.at("mean_cumr").get<double>();
        s.dect_total_ms = j.at("dect_total_ms").get<double>();
        s.dect_mean_ms = j.at("dect_mean_ms").get<double>();
        return s;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("incomplete cell summary: ") + e.what());
    }
}

CellSummary CellSummary::from_file(const std::string& path) {
    return from_json(read_text_file(path));
}

namespace {

std::vector<CellId> cells_of(const ExperimentSpec& spec) {
    std::vector<CellId> cells;
    for (Algorithm alg : spec.algorithms)
        for (double a : spec.alphas)
            for (std::uint64_t s : spec.seeds) cells.push_back(CellId{alg, a, s});
    return cells;
}

CellSummary summarize_cell(const CellId& id, const UpperTrainResult& tr, const EvalResult& ev,
                           int eval_episodes) {
    CellSummary s;
    s.id = id;
    s.steps = tr.steps;
    s.train_episodes = static_cast<long long>(tr.episodes.size());
    s.rz_episodes = tr.rz_episodes;
    s.unverified_complete = tr.unverified_complete;
    s.early_stopped = tr.early_stopped;
    s.trat_min = tr.trat_min;
    s.eval_episodes = eval_episodes;
    s.eval_completed = ev.completed;
    s.eval_verified = ev.verified;
    s.mean_comt = ev.mean_comt;
    s.mean_cumr = ev.mean_cumr;
    s.dect_total_ms = ev.dect_total_ms;
    s.dect_mean_ms = ev.dect_mean_ms;
    return s;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, const std::string& out_dir,
                                int workers, const std::function<void(const std::string&)>& log) {
    spec.validate();
    std::mutex mu;
    auto say = [&](const std::string& line) {
        if (!log) return;
        std::lock_guard<std::mutex> lock(mu);
        log(line);
    };

    ScenarioConfig scenario = load_scenario_file(spec.scenario_path);
    fs::create_directories(fs::path(out_dir) / "runs");

    // Pattern for guided cells: extracted from the verified historical scheme.
    PriorityPattern pattern;
    bool any_guided = false;
    for (double a : spec.alphas) any_guided = any_guided || a != 0.0;
    if (any_guided) {
        SchedulingScheme historical = read_scheme_file(spec.historical_scheme_path);
        VerificationReport report = check_scheme(historical, scenario);
        if (!report.verified())
            throw ValidationError("historical scheme failed verification: " + report.reason);
        pattern = extract_pattern(report, scenario);
    }

    // Shared frozen car policy.
    ExperimentResult result;
    const std::string lower_path = (fs::path(out_dir) / "lower_policy.json").string();
    nn::Net lower_net;
    if (fs::exists(lower_path)) {
        lower_net = nn::Net::load(lower_path);
        result.lower_reused = true;
        say("car policy: reusing " + lower_path);
    } else {
        say("car policy: training (" + std::to_string(spec.lower.steps) + " steps)");
        LowerTrainResult lr = train_lower(scenario, spec.lower);
        lower_net = lr.policy;
        lower_net.save(lower_path);
        say("car policy: trained, selection reward per step " + format_double(lr.mean_rq));
    }
    result.lower_mean_rq =
        evaluate_lower(lower_net, scenario, 20, splitmix64(spec.lower.seed) + 101);

    const std::vector<CellId> cells = cells_of(spec);
    result.cells.resize(cells.size());
    std::vector<std::string> errors;
    std::atomic<std::size_t> cursor{0};

    auto run_cell = [&](std::size_t i) {
        const CellId id = cells[i];
        const std::string name = cell_name(id);
        const fs::path dir = fs::path(out_dir) / "runs" / name;
        CellOutcome& out = result.cells[i];
        out.id = id;
        out.dir = dir.string();

        const std::string summary_path = (dir / "summary.json").string();
        if (fs::exists(summary_path)) {
            try {
                out.summary = CellSummary::from_file(summary_path);
                out.reused = true;
                say("[" + name + "] reused existing summary");
                return;
            } catch (const Error& e) {
                say("[" + name + "] unreadable summary (" + e.what() + "), rerunning");
            }
        }

        fs::create_directories(dir);
        TrainConfig cfg = spec.train;
        cfg.algorithm = id.algorithm;
        cfg.seed = id.seed;
        RewardConfig rc = spec.rewards;
        rc.alpha = id.alpha;
        const PriorityPattern* hist = id.alpha != 0.0 ? &pattern : nullptr;
        NetLowerPolicy lp(lower_net);

        UpperTrainResult tr = train_upper(scenario, rc, lp, hist, cfg);
        EvalResult ev = evaluate_upper(scenario, rc, tr.online, lp, spec.eval_episodes, hist);
        write_episode_csv((dir / "episodes.csv").string(), tr.episodes);
        write_episode_csv((dir / "eval.csv").string(), ev.episodes);
        out.summary = summarize_cell(id, tr, ev, spec.eval_episodes);
        // Written last: its presence marks the cell complete for resume.
        write_text_file(summary_path, out.summary.to_json());
        std::string comt = ev.mean_comt < 0.0 ? "-" : format_double(ev.mean_comt);
        say("[" + name + "] steps " + std::to_string(tr.steps) + ", eval makespan " + comt +
            (tr.early_stopped ? " (stopped early)" : ""));
    };

    auto worker = [&] {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= cells.size()) return;
            try {
                run_cell(i);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(mu);
                errors.push_back(cell_name(cells[i]) + ": " + e.what());
                if (log) log("[" + cell_name(cells[i]) + "] FAILED: " + e.what());
            }
        }
    };

    int n = workers;
    if (n <= 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    n = std::min<int>(n, static_cast<int>(cells.size()));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n));
        for (int t = 0; t < n; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    if (!errors.empty()) {
        std::string msg = std::to_string(errors.size()) + " cell(s) failed:";
        for (const std::string& e : errors) msg += "\n  " + e;
        throw Error(msg);
    }
    return result;
}

namespace {

struct RowAgg {
    std::string label;
    double alpha = 0.0;
    Algorithm algorithm = Algorithm::Dqn;
    int present = 0;  // summaries found
    int total = 0;    // seeds in the spec
    std::vector<double> comts;  // per-seed eval mean over completing episodes
    std::vector<double> cumrs;  // same subset of seeds as comts
    double dect_sum = 0.0;
    double trat_sum = 0.0;
    long long violations = 0;
};

std::string pad(const std::string& s, std::size_t width) {
    std::string out = s;
    while (out.size() < width) out.push_back(' ');
    return out;
}

void trim_trailing(std::string& line) {
    while (!line.empty() && line.back() == ' ') line.pop_back();
}

}  // namespace

std::string render_table(const ExperimentSpec& spec, const std::string& out_dir) {
    spec.validate();
    int nonzero_alphas = 0;
    for (double a : spec.alphas)
        if (a != 0.0) nonzero_alphas += 1;

    std::vector<RowAgg> rows;
    std::vector<std::string> missing;
    for (Algorithm alg : spec.algorithms) {
        for (double a : spec.alphas) {
            RowAgg row;
            row.algorithm = alg;
            row.alpha = a;
            row.label = algorithm_name(alg);
            if (a != 0.0)
                row.label += nonzero_alphas > 1 ? "+guided@" + format_double(a) : "+guided";
            row.total = static_cast<int>(spec.seeds.size());
            for (std::uint64_t s : spec.seeds) {
                const std::string name = cell_name(CellId{alg, a, s});
                const fs::path path = fs::path(out_dir) / "runs" / name / "summary.json";
                CellSummary sum;
                try {
                    sum = CellSummary::from_file(path.string());
                } catch (const Error&) {
                    missing.push_back(name);
                    continue;
                }
                row.present += 1;
                row.violations += sum.unverified_complete;
                row.dect_sum += sum.dect_mean_ms;
                row.trat_sum += sum.trat_min;
                if (sum.mean_comt >= 0.0) {
                    row.comts.push_back(sum.mean_comt);
                    row.cumrs.push_back(sum.mean_cumr);
                }
            }
            rows.push_back(std::move(row));
        }
    }

    // Baseline makespan per algorithm (alpha = 0 row) for the improvement column.
    auto row_comt = [](const RowAgg& r) -> double {
        if (r.comts.empty()) return -1.0;
        double s = 0.0;
        for (double c : r.comts) s += c;
        return s / static_cast<double>(r.comts.size());
    };

    std::size_t label_width = 16;
    for (const RowAgg& r : rows) label_width = std::max(label_width, r.label.size() + 2);

    std::ostringstream os;
    os << spec.name << "\n";
    os << "scenario " << spec.scenario_path << " | upper steps " << spec.train.steps
       << " | eval episodes " << spec.eval_episodes << " | seeds " << spec.seeds.size() << "\n\n";
    std::string head = pad("run", label_width) + pad("ComT", 9) + pad("CumR", 11) +
                       pad("DecT(ms)", 10) + pad("TraT(min)", 11) + pad("seeds", 7) +
                       "improvement";
    os << head << "\n";

    for (const RowAgg& r : rows) {
        std::string comt = "?", cumr = "?", dect = "?", trat = "?", seeds = "?", improv;
        if (r.present > 0) {
            double c = row_comt(r);
            comt = c < 0.0 ? "-" : fixed(c, 1);
            if (r.cumrs.empty()) {
                cumr = "-";
            } else {
                double s = 0.0;
                for (double v : r.cumrs) s += v;
                cumr = fixed(s / static_cast<double>(r.cumrs.size()), 4);
            }
            dect = fixed(r.dect_sum / r.present, 3);
            trat = fixed(r.trat_sum / r.present, 2);
            seeds = std::to_string(r.comts.size()) + "/" + std::to_string(r.present);
            if (r.alpha != 0.0) {
                for (const RowAgg& base : rows) {
                    if (base.algorithm != r.algorithm || base.alpha != 0.0) continue;
                    double b = row_comt(base);
                    if (b > 0.0 && c >= 0.0) improv = fixed((b - c) / b * 100.0, 1) + "%";
                    break;
                }
            }
        }
        std::string line = pad(r.label, label_width) + pad(comt, 9) + pad(cumr, 11) +
                           pad(dect, 10) + pad(trat, 11) + pad(seeds, 7) + improv;
        trim_trailing(line);
        os << line << "\n";
    }

    os << "\nnotes:\n";
    long long violations = 0;
    for (const RowAgg& r : rows) violations += r.violations;
    os << "  pattern-bonus gating violations: " << violations << "\n";
    os << "  ComT/CumR average the seeds whose evaluation completed.\n";
    if (!missing.empty()) {
        os << "  missing cells:";
        for (const std::string& name : missing) os << " " << name;
        os << "\n";
    }
    return os.str();
}

std::string render_curves(const ExperimentSpec& spec, const std::string& out_dir) {
    spec.validate();
    std::ostringstream os;
    os << "algorithm,alpha,seed," << episode_csv_header() << "\n";
    for (Algorithm alg : spec.algorithms) {
        for (double a : spec.alphas) {
            for (std::uint64_t s : spec.seeds) {
                const std::string name = cell_name(CellId{alg, a, s});
                const fs::path path = fs::path(out_dir) / "runs" / name / "episodes.csv";
                if (!fs::exists(path)) continue;
                std::vector<EpisodeRow> rows = read_episode_csv(path.string());
                const std::string prefix =
                    algorithm_name(alg) + "," + format_double(a) + "," + std::to_string(s) + ",";
                for (const EpisodeRow& row : rows) os << prefix << episode_csv_row(row) << "\n";
            }
        }
    }
    return os.str();
}

}  // namespace vsched
