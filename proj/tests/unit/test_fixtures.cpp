// The committed reference artifacts under fixtures/ must stay byte-identical
// to their constructors, verify cleanly, and replay exactly the station
// handoffs the window program narrates.

#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "support/fixtures_gen.hpp"
#include "vsched/pattern.hpp"
#include "vsched/rhm/interp.hpp"
#include "vsched/rhm/parser.hpp"
#include "vsched/verify.hpp"

using namespace vsched;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// State after the last execution of the command on `line`.
const rhm::MachineState& after_line(const rhm::RunResult& run, int line) {
    const rhm::MachineState* found = nullptr;
    for (const rhm::TraceEntry& e : run.trace)
        if (e.note.line == line) found = &e.state;
    REQUIRE_MESSAGE(found != nullptr, "no trace entry for line " << line);
    return *found;
}

}  // namespace

TEST_CASE("committed fixture files match their constructors byte for byte") {
    CHECK(slurp(fixtures::kScenarioPath) == fixtures::scenario_file_text());
    CHECK(slurp(fixtures::kSchemePath) == fixtures::scheme_file_text());
    CHECK(slurp(fixtures::kPatternPath) == fixtures::pattern_file_text());
    CHECK(slurp(fixtures::kWindowPath) == fixtures::window_program_text());
}

TEST_CASE("the reference schedule verifies and carries the pinned story relations") {
    const ScenarioConfig sc = fixtures::ten_task_scenario();
    CHECK(sc.tasks.size() == 10);
    CHECK(load_scenario(fixtures::scenario_file_text()) == sc);

    const SchedulingScheme scheme = read_scheme_file(fixtures::kSchemePath);
    CHECK(scheme.records.size() == sc.total_ops());
    const VerificationReport rep = check_scheme(scheme, sc);
    CHECK(rep.verified());
    CHECK(rep.makespan_checked);
    CHECK(rep.scheme_makespan == rep.sweep_makespan);

    const PriorityPattern pat = extract_pattern(rep, sc);
    CHECK(read_pattern_file(fixtures::kPatternPath) == pat);
    auto has = [&](long long loc, const std::string& a, const std::string& b) {
        PatternRelation r{loc, a, b};
        return std::find(pat.relations.begin(), pat.relations.end(), r) != pat.relations.end();
    };
    // The story the window program isolates: t0 leads at station 11, t8 leads
    // at station 20.
    CHECK(has(11, "t0", "t8"));
    CHECK(has(20, "t8", "t0"));
    CHECK(!has(11, "t8", "t0"));
    CHECK(!has(20, "t0", "t8"));
}

TEST_CASE("replaying the window program reproduces every intermediate configuration") {
    const auto program = rhm::parse_program_file(fixtures::kWindowPath);
    const rhm::RunResult run = rhm::run(program, {}, 1000, true);
    REQUIRE(run.status == rhm::RunStatus::Terminated);

    const std::map<std::string, long long> names{{"n1", 5}, {"n2", 3}, {"n3", 4}, {"n4", 6}};
    using TV = rhm::TaskValue;

    {
        rhm::MachineState q;  // after line 4: t0 bound, station 11 planned
        q.s_T = {{"t0", TV::of_cars({1})}};
        q.s_C = {{"c1@0", 1}};
        q.s_L = names;
        q.h_C = {{1, {11}}};
        q.h_L = {{11, 5}};
        CHECK(after_line(run, 4) == q);
    }
    {
        rhm::MachineState q;  // after line 6: station 11 executed and released
        q.s_T = {{"t0", TV::of_cars({1})}};
        q.s_C = {{"c1@0", 1}};
        q.s_L = names;
        q.h_C = {{1, {}}};
        CHECK(after_line(run, 6) == q);
    }
    {
        rhm::MachineState q;  // after line 7: t0's first car returned
        q.s_T = {{"t0", TV::null()}};
        q.s_C = {{"c1@0", 1}};
        q.s_L = names;
        CHECK(after_line(run, 7) == q);
    }
    {
        rhm::MachineState q;  // after line 10: t8 holds station 11 in turn
        q.s_T = {{"t0", TV::null()}, {"t8", TV::of_cars({3})}};
        q.s_C = {{"c1@0", 1}, {"c3@8", 3}};
        q.s_L = names;
        q.h_C = {{3, {11}}};
        q.h_L = {{11, 5}};
        CHECK(after_line(run, 10) == q);
    }
    {
        rhm::MachineState q;  // after line 11: t8's first operation done
        q.s_T = {{"t0", TV::null()}, {"t8", TV::of_cars({3})}};
        q.s_C = {{"c1@0", 1}, {"c3@8", 3}};
        q.s_L = names;
        q.h_C = {{3, {}}};
        CHECK(after_line(run, 11) == q);
    }
    {
        rhm::MachineState q;  // after line 15: one car left, three stations queued
        q.s_T = {{"t0", TV::null()}, {"t8", TV::of_cars({1})}};
        q.s_C = {{"c1@0", 1}, {"c3@8", 3}, {"c1@8", 1}};
        q.s_L = names;
        q.h_C = {{1, {20, 30, 40}}};
        q.h_L = {{20, 3}, {30, 4}, {40, 6}};
        CHECK(after_line(run, 15) == q);
    }
    {
        rhm::MachineState q;  // after line 21: t8 fully unwound
        q.s_T = {{"t0", TV::null()}, {"t8", TV::null()}};
        q.s_C = {{"c1@0", 1}, {"c3@8", 3}, {"c1@8", 1}};
        q.s_L = names;
        CHECK(after_line(run, 21) == q);
    }
    {
        rhm::MachineState q;  // after line 24: t0's second phase holds station 20
        q.s_T = {{"t0", TV::of_cars({3})}, {"t8", TV::null()}};
        q.s_C = {{"c1@0", 1}, {"c3@8", 3}, {"c1@8", 1}, {"c3@0", 3}};
        q.s_L = names;
        q.h_C = {{3, {20}}};
        q.h_L = {{20, 3}};
        CHECK(after_line(run, 24) == q);
    }

    // The full program verifies, and its pattern is exactly the two-relation
    // story: single-occupant stations 30 and 40 contribute nothing.
    const VerificationReport rep = verify_program(program);
    CHECK(rep.verified());
    const ScenarioConfig sc = fixtures::ten_task_scenario();
    const PriorityPattern pat = extract_pattern(rep, sc);
    REQUIRE(pat.relations.size() == 2);
    CHECK(pat.relations[0] == PatternRelation{11, "t0", "t8"});
    CHECK(pat.relations[1] == PatternRelation{20, "t8", "t0"});

    // Both story relations sit inside the reference schedule's pattern.
    const MatchResult m = match_patterns(pat, read_pattern_file(fixtures::kPatternPath));
    CHECK(m.mu_match == 2);
}
