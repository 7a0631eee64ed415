#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "oracles/oracles.hpp"
#include "vsched/experiments.hpp"
#include "vsched/scenario.hpp"
#include "vsched/verify.hpp"

using namespace vsched;
namespace fs = std::filesystem;

namespace {

ScenarioConfig tiny_scenario() {
    ScenarioConfig sc;
    sc.tasks = {Task{{{0, 3}, {1, 2}}}, Task{{{0, 2}, {1, 4}}}};
    sc.equipment = {Equipment{2}, Equipment{1}};
    sc.cars = 2;
    sc.seed = 7;
    return sc;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// A spec that validates; paths need not exist for the pure JSON tests.
ExperimentSpec stub_spec() {
    ExperimentSpec spec;
    spec.scenario_path = "scenario.json";
    spec.historical_scheme_path = "historical.scheme";
    return spec;
}

// The data row whose run label is exactly `label`.
std::string find_row(const std::string& table, const std::string& label) {
    std::istringstream lines(table);
    std::string line;
    while (std::getline(lines, line))
        if (line.size() > label.size() && line.compare(0, label.size(), label) == 0 &&
            line[label.size()] == ' ')
            return line;
    FAIL("no table row labeled " << label);
    return {};
}

// Everything except the wall-clock fields, which never reproduce.
void check_rows_equivalent(const std::vector<EpisodeRow>& a, const std::vector<EpisodeRow>& b) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].episode == b[i].episode);
        CHECK(a[i].end_step == b[i].end_step);
        CHECK(a[i].complete == b[i].complete);
        CHECK(a[i].verified == b[i].verified);
        CHECK(a[i].comt == b[i].comt);
        CHECK(a[i].cumr == b[i].cumr);
        CHECK(a[i].rz == b[i].rz);
        CHECK(a[i].mu_match == b[i].mu_match);
        CHECK(a[i].mu_total == b[i].mu_total);
    }
}

void check_summaries_equivalent(const CellSummary& a, const CellSummary& b) {
    CHECK(a.steps == b.steps);
    CHECK(a.train_episodes == b.train_episodes);
    CHECK(a.rz_episodes == b.rz_episodes);
    CHECK(a.unverified_complete == b.unverified_complete);
    CHECK(a.early_stopped == b.early_stopped);
    CHECK(a.eval_completed == b.eval_completed);
    CHECK(a.eval_verified == b.eval_verified);
    CHECK(a.mean_comt == b.mean_comt);
    CHECK(a.mean_cumr == b.mean_cumr);
}

}  // namespace

TEST_CASE("cell names are directory-safe run ids") {
    CHECK(cell_name(CellId{Algorithm::Dqn, 0.0, 1}) == "dqn_a0_s1");
    CHECK(cell_name(CellId{Algorithm::Ppo, 0.001, 12}) == "ppo_a0.001_s12");
    CHECK(cell_name(CellId{Algorithm::Dueling, 0.5, 3}) == "dueling_a0.5_s3");
    CHECK(cell_name(CellId{Algorithm::Ddqn, 0.0, 0}) == "ddqn_a0_s0");
}

TEST_CASE("experiment spec round-trips through JSON and rejects bad specs") {
    ExperimentSpec spec = stub_spec();
    spec.name = "bench";
    spec.algorithms = {Algorithm::Ddqn, Algorithm::Ppo};
    spec.alphas = {0.0, 0.01};
    spec.seeds = {3, 9};
    spec.eval_episodes = 7;
    spec.train.steps = 123;
    spec.train.hidden = {8, 4};
    spec.lower.steps = 77;
    spec.rewards.task_reward = 2.5;

    ExperimentSpec back = ExperimentSpec::from_json(spec.to_json());
    CHECK(back.name == "bench");
    CHECK(back.scenario_path == spec.scenario_path);
    CHECK(back.historical_scheme_path == spec.historical_scheme_path);
    CHECK(back.algorithms == spec.algorithms);
    CHECK(back.alphas == spec.alphas);
    CHECK(back.seeds == spec.seeds);
    CHECK(back.eval_episodes == 7);
    CHECK(back.train.steps == 123);
    CHECK(back.train.hidden == std::vector<int>{8, 4});
    CHECK(back.lower.steps == 77);
    CHECK(back.rewards.task_reward == 2.5);

    CHECK_THROWS_AS(ExperimentSpec::from_json("not json"), ParseError);
    CHECK_THROWS_AS(ExperimentSpec::from_json("[]"), ValidationError);
    CHECK_THROWS_AS(ExperimentSpec::from_json("{\"bogus\": 1}"), ValidationError);
    CHECK_THROWS_AS(ExperimentSpec::from_json("{\"algorithms\": [\"sarsa\"]}"), ValidationError);
    CHECK_THROWS_AS(ExperimentSpec::from_file("/nonexistent/spec.json"), Error);

    ExperimentSpec bad = stub_spec();
    bad.seeds = {4, 4};
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = stub_spec();
    bad.alphas = {-0.1};
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = stub_spec();
    bad.historical_scheme_path.clear();  // alphas still include 0.001
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = stub_spec();
    bad.eval_episodes = 0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = stub_spec();
    bad.algorithms.clear();
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = stub_spec();
    bad.scenario_path.clear();
    CHECK_THROWS_AS(bad.validate(), ValidationError);

    // alpha = 0 everywhere does not need a historical scheme.
    ExperimentSpec unguided = stub_spec();
    unguided.historical_scheme_path.clear();
    unguided.alphas = {0.0};
    unguided.validate();
}

TEST_CASE("cell summaries round-trip through JSON") {
    CellSummary s;
    s.id = CellId{Algorithm::Ddqn, 0.001, 9};
    s.steps = 500;
    s.train_episodes = 14;
    s.rz_episodes = 6;
    s.unverified_complete = 0;
    s.early_stopped = true;
    s.trat_min = 0.25;
    s.eval_episodes = 5;
    s.eval_completed = 4;
    s.eval_verified = 4;
    s.mean_comt = 31.5;
    s.mean_cumr = -0.0063;
    s.dect_total_ms = 12.5;
    s.dect_mean_ms = 0.05;

    CellSummary b = CellSummary::from_json(s.to_json());
    CHECK(b.id.algorithm == Algorithm::Ddqn);
    CHECK(b.id.alpha == 0.001);
    CHECK(b.id.seed == 9);
    CHECK(b.steps == 500);
    CHECK(b.train_episodes == 14);
    CHECK(b.rz_episodes == 6);
    CHECK(b.unverified_complete == 0);
    CHECK(b.early_stopped);
    CHECK(b.trat_min == 0.25);
    CHECK(b.eval_episodes == 5);
    CHECK(b.eval_completed == 4);
    CHECK(b.eval_verified == 4);
    CHECK(b.mean_comt == 31.5);
    CHECK(b.mean_cumr == -0.0063);
    CHECK(b.dect_total_ms == 12.5);
    CHECK(b.dect_mean_ms == 0.05);

    CHECK_THROWS_AS(CellSummary::from_json("nope"), ParseError);
    CHECK_THROWS_AS(CellSummary::from_json("{}"), ValidationError);
    CHECK_THROWS_AS(CellSummary::from_json("{\"format\": 2}"), ValidationError);
    CHECK_THROWS_AS(CellSummary::from_file("/nonexistent/summary.json"), Error);
}

TEST_CASE("the rendered table reproduces hand-computed aggregates") {
    const std::string dir = "/tmp/vsched_test_render";
    fs::remove_all(dir);

    ExperimentSpec spec = stub_spec();
    spec.name = "render oracle";
    spec.algorithms = {Algorithm::Dqn, Algorithm::Ppo, Algorithm::Dueling};
    spec.alphas = {0.0, 0.001};
    spec.seeds = {1, 2};
    auto put = [&](Algorithm alg, double alpha, std::uint64_t seed, double comt, double cumr,
                   long long violations) {
        CellSummary s;
        s.id = CellId{alg, alpha, seed};
        s.steps = 500;
        s.unverified_complete = violations;
        s.trat_min = 0.6;
        s.eval_episodes = 2;
        s.eval_completed = comt < 0.0 ? 0 : 2;
        s.eval_verified = s.eval_completed;
        s.mean_comt = comt;
        s.mean_cumr = cumr;
        s.dect_mean_ms = 0.03;
        const std::string cell_dir = dir + "/runs/" + cell_name(s.id);
        fs::create_directories(cell_dir);
        std::ofstream(cell_dir + "/summary.json") << s.to_json();
    };
    put(Algorithm::Dqn, 0.0, 1, 62.0, -0.0124, 0);
    put(Algorithm::Dqn, 0.0, 2, 58.0, -0.0116, 0);
    put(Algorithm::Dqn, 0.001, 1, 54.0, -0.0108, 1);  // one gating violation to surface
    put(Algorithm::Dqn, 0.001, 2, 54.0, -0.0108, 0);
    put(Algorithm::Ppo, 0.0, 1, 50.0, -0.0100, 0);  // seed 2 deliberately missing
    put(Algorithm::Ppo, 0.001, 1, 48.0, -0.0096, 0);
    put(Algorithm::Ppo, 0.001, 2, -1.0, 0.0, 0);  // present but never completed
    put(Algorithm::Dueling, 0.0, 1, -1.0, 0.0, 0);
    put(Algorithm::Dueling, 0.0, 2, -1.0, 0.0, 0);
    // dueling alpha=0.001 has no summaries at all.

    const std::string table = render_table(spec, dir);
    CHECK(table == render_table(spec, dir));

    std::string row = find_row(table, "dqn");
    CHECK(row.find("60.0") != std::string::npos);  // (62 + 58) / 2
    CHECK(row.find("-0.0120") != std::string::npos);
    CHECK(row.find("0.030") != std::string::npos);
    CHECK(row.find("0.60") != std::string::npos);
    CHECK(row.find("2/2") != std::string::npos);
    CHECK(row.find('%') == std::string::npos);  // baselines carry no improvement

    row = find_row(table, "dqn+guided");
    CHECK(row.find("54.0") != std::string::npos);
    CHECK(row.find("10.0%") != std::string::npos);  // (60 - 54) / 60

    row = find_row(table, "ppo");
    CHECK(row.find("50.0") != std::string::npos);
    CHECK(row.find("1/1") != std::string::npos);

    row = find_row(table, "ppo+guided");
    CHECK(row.find("48.0") != std::string::npos);  // the DNF seed is excluded from the mean
    CHECK(row.find("1/2") != std::string::npos);
    CHECK(row.find("4.0%") != std::string::npos);  // (50 - 48) / 50

    row = find_row(table, "dueling");
    CHECK(row.find(" -") != std::string::npos);  // summaries exist, no episode completed
    CHECK(row.find("0/2") != std::string::npos);
    CHECK(row.find('?') == std::string::npos);

    row = find_row(table, "dueling+guided");
    CHECK(row.find('?') != std::string::npos);  // no summaries at all
    CHECK(row.find('%') == std::string::npos);

    CHECK(table.find("pattern-bonus gating violations: 1") != std::string::npos);
    CHECK(table.find("missing cells:") != std::string::npos);
    CHECK(table.find("ppo_a0_s2") != std::string::npos);
    CHECK(table.find("dueling_a0.001_s1") != std::string::npos);
    CHECK(table.find("dueling_a0.001_s2") != std::string::npos);
}

TEST_CASE("a sweep persists every artifact, resumes, and is worker-invariant") {
    const std::string base = "/tmp/vsched_test_experiments";
    fs::remove_all(base);
    fs::create_directories(base);

    ScenarioConfig sc = tiny_scenario();
    const std::string scenario_path = base + "/scenario.json";
    save_scenario_file(sc, scenario_path);

    SchedulingScheme historical = oracle::greedy_scheme(sc);
    REQUIRE(check_scheme(historical, sc).verified());
    const std::string historical_path = base + "/historical.scheme";
    write_scheme_file(historical, historical_path);

    ExperimentSpec spec;
    spec.name = "tiny sweep";
    spec.scenario_path = scenario_path;
    spec.historical_scheme_path = historical_path;
    spec.algorithms = {Algorithm::Dqn, Algorithm::Ppo};
    spec.alphas = {0.0, 0.001};
    spec.seeds = {5};
    spec.eval_episodes = 2;
    spec.train.steps = 500;
    spec.train.warmup = 100;
    spec.train.batch = 32;
    spec.train.replay_capacity = 2000;
    spec.train.target_sync = 100;
    spec.train.hidden = {16};
    spec.train.rollout = 128;
    spec.train.minibatch = 64;
    spec.lower.steps = 768;
    spec.lower.rollout = 128;
    spec.lower.minibatch = 64;
    spec.lower.hidden = {16};
    spec.lower.seed = 3;

    const std::string dir_a = base + "/a";
    std::vector<std::string> log;
    ExperimentResult ra =
        run_experiment(spec, dir_a, 2, [&](const std::string& line) { log.push_back(line); });

    REQUIRE(ra.cells.size() == 4);
    CHECK(!ra.lower_reused);
    CHECK(ra.lower_mean_rq >= -2.0);  // within the selection-reward range
    CHECK(ra.lower_mean_rq <= 12.0);
    CHECK(fs::exists(dir_a + "/lower_policy.json"));
    CHECK(!log.empty());

    // Cells come back algorithm-major, then alpha, then seed.
    CHECK(ra.cells[0].id.algorithm == Algorithm::Dqn);
    CHECK(ra.cells[0].id.alpha == 0.0);
    CHECK(ra.cells[1].id.algorithm == Algorithm::Dqn);
    CHECK(ra.cells[1].id.alpha == 0.001);
    CHECK(ra.cells[2].id.algorithm == Algorithm::Ppo);
    CHECK(ra.cells[3].id.algorithm == Algorithm::Ppo);

    for (const CellOutcome& cell : ra.cells) {
        CHECK(!cell.reused);
        CHECK(cell.dir == dir_a + "/runs/" + cell_name(cell.id));
        CHECK(cell.summary.steps == 500);
        CHECK(!cell.summary.early_stopped);
        CHECK(cell.summary.eval_episodes == 2);
        CHECK(cell.summary.unverified_complete == 0);
        CHECK(cell.summary.train_episodes ==
              static_cast<long long>(read_episode_csv(cell.dir + "/episodes.csv").size()));
        CHECK(read_episode_csv(cell.dir + "/eval.csv").size() == 2);
        CellSummary persisted = CellSummary::from_file(cell.dir + "/summary.json");
        CHECK(persisted.id.seed == cell.id.seed);
        check_summaries_equivalent(persisted, cell.summary);
        if (cell.id.alpha == 0.0) CHECK(cell.summary.rz_episodes == 0);
    }

    // A second run reuses every artifact byte for byte.
    {
        std::vector<std::string> before;
        for (const CellOutcome& cell : ra.cells)
            before.push_back(read_file(cell.dir + "/summary.json"));

        ExperimentResult rb = run_experiment(spec, dir_a, 2);
        CHECK(rb.lower_reused);
        REQUIRE(rb.cells.size() == 4);
        for (std::size_t i = 0; i < rb.cells.size(); ++i) {
            CHECK(rb.cells[i].reused);
            CHECK(read_file(rb.cells[i].dir + "/summary.json") == before[i]);
            check_summaries_equivalent(rb.cells[i].summary, ra.cells[i].summary);
        }
        // The shared car policy is reloaded, so its greedy score is unchanged.
        CHECK(rb.lower_mean_rq == ra.lower_mean_rq);
    }

    // The worker count never changes the training outcomes.
    {
        const std::string dir_b = base + "/b";
        ExperimentResult rb = run_experiment(spec, dir_b, 1);
        REQUIRE(rb.cells.size() == 4);
        CHECK(rb.lower_mean_rq == ra.lower_mean_rq);
        for (std::size_t i = 0; i < rb.cells.size(); ++i) {
            check_summaries_equivalent(rb.cells[i].summary, ra.cells[i].summary);
            check_rows_equivalent(read_episode_csv(rb.cells[i].dir + "/episodes.csv"),
                                  read_episode_csv(ra.cells[i].dir + "/episodes.csv"));
            check_rows_equivalent(read_episode_csv(rb.cells[i].dir + "/eval.csv"),
                                  read_episode_csv(ra.cells[i].dir + "/eval.csv"));
        }
    }

    // A preseeded car policy is picked up instead of retraining.
    {
        const std::string dir_c = base + "/c";
        fs::create_directories(dir_c);
        fs::copy_file(dir_a + "/lower_policy.json", dir_c + "/lower_policy.json");

        ExperimentSpec small = spec;
        small.algorithms = {Algorithm::Dqn};
        small.alphas = {0.0};
        ExperimentResult rc = run_experiment(small, dir_c, 0);
        CHECK(rc.lower_reused);
        REQUIRE(rc.cells.size() == 1);
        // Same frozen car policy and seed: the run must reproduce cell a/dqn_a0_s5.
        check_summaries_equivalent(rc.cells[0].summary, ra.cells[0].summary);
    }

    // The rendered table reflects a fully populated directory.
    {
        const std::string table = render_table(spec, dir_a);
        CHECK(table == render_table(spec, dir_a));  // pure in the directory
        CHECK(table.find("tiny sweep") != std::string::npos);
        find_row(table, "dqn");
        find_row(table, "dqn+guided");
        find_row(table, "ppo");
        find_row(table, "ppo+guided");
        CHECK(table.find("pattern-bonus gating violations: 0") != std::string::npos);
        CHECK(table.find('?') == std::string::npos);
        CHECK(table.find("missing cells") == std::string::npos);

        // Cells the spec expects but the directory lacks are called out.
        ExperimentSpec wider = spec;
        wider.seeds = {5, 6};
        const std::string partial = render_table(wider, dir_a);
        CHECK(partial.find("missing cells:") != std::string::npos);
        CHECK(partial.find("dqn_a0_s6") != std::string::npos);
        CHECK(partial.find("ppo_a0.001_s6") != std::string::npos);
    }

    // The rendered curves are the concatenated training logs.
    {
        const std::string curves = render_curves(spec, dir_a);
        std::istringstream lines(curves);
        std::string header;
        REQUIRE(std::getline(lines, header));
        CHECK(header == "algorithm,alpha,seed," + episode_csv_header());

        long long expected = 0;
        for (const CellOutcome& cell : ra.cells) expected += cell.summary.train_episodes;
        long long rows = 0, ppo_guided = 0;
        std::string line;
        while (std::getline(lines, line)) {
            if (line.empty()) continue;
            rows += 1;
            const bool known = line.rfind("dqn,0,5,", 0) == 0 ||
                               line.rfind("dqn,0.001,5,", 0) == 0 ||
                               line.rfind("ppo,0,5,", 0) == 0 || line.rfind("ppo,0.001,5,", 0) == 0;
            CHECK(known);
            if (line.rfind("ppo,0.001,5,", 0) == 0) ppo_guided += 1;
        }
        CHECK(rows == expected);
        CHECK(ppo_guided == ra.cells[3].summary.train_episodes);

        // Missing cells are skipped, not invented.
        ExperimentSpec wider = spec;
        wider.seeds = {5, 6};
        CHECK(render_curves(wider, dir_a) == curves);
    }

    // An unreadable summary is rerun rather than trusted.
    {
        const std::string broken = ra.cells[0].dir + "/summary.json";
        std::ofstream(broken, std::ios::binary) << "{\"format\": 1";
        ExperimentResult rb = run_experiment(spec, dir_a, 2);
        CHECK(!rb.cells[0].reused);
        CHECK(rb.cells[1].reused);
        check_summaries_equivalent(rb.cells[0].summary, ra.cells[0].summary);
    }

    // A failing cell is reported by name and spares the finished cells.
    {
        const std::string dir_d = base + "/d";
        fs::create_directories(dir_d + "/runs");
        fs::copy_file(dir_a + "/lower_policy.json", dir_d + "/lower_policy.json");
        // A regular file where the cell directory belongs makes that cell fail.
        std::ofstream(dir_d + "/runs/dqn_a0_s6").put('x');

        ExperimentSpec pair = spec;
        pair.algorithms = {Algorithm::Dqn};
        pair.alphas = {0.0};
        pair.seeds = {5, 6};
        try {
            run_experiment(pair, dir_d, 2);
            FAIL("expected the blocked cell to fail the sweep");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("dqn_a0_s6") != std::string::npos);
        }
        CHECK(fs::exists(dir_d + "/runs/dqn_a0_s5/summary.json"));

        // Unblock and rerun: the finished cell is reused, the failed one runs.
        fs::remove(dir_d + "/runs/dqn_a0_s6");
        ExperimentResult rd = run_experiment(pair, dir_d, 2);
        REQUIRE(rd.cells.size() == 2);
        CHECK(rd.cells[0].reused);
        CHECK(!rd.cells[1].reused);
        CHECK(fs::exists(dir_d + "/runs/dqn_a0_s6/summary.json"));
    }

    // Setup problems surface as errors before any cell runs.
    {
        ExperimentSpec missing = spec;
        missing.scenario_path = base + "/no_such_scenario.json";
        CHECK_THROWS_AS(run_experiment(missing, base + "/f", 1), Error);

        SchedulingScheme bad = historical;
        bad.records[0].end = bad.records[0].start;  // duration no longer matches the scenario
        const std::string bad_path = base + "/bad.scheme";
        write_scheme_file(bad, bad_path);
        ExperimentSpec guided = spec;
        guided.historical_scheme_path = bad_path;
        CHECK_THROWS_AS(run_experiment(guided, base + "/g", 1), ValidationError);
        CHECK(!fs::exists(base + "/g/runs/dqn_a0_s5"));
    }
}
