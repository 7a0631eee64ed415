#include "vsched/verify.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "vsched/rhm/ast.hpp"

namespace vsched {

using rhm::Command;
using rhm::CmdKind;
using rhm::CmdPtr;

std::vector<CmdPtr> ModelingProgram::commands() const {
    std::vector<CmdPtr> out;
    out.reserve(lines.size());
    for (const CompiledLine& l : lines) out.push_back(l.cmd);
    return out;
}

namespace {

struct Run {
    int task = 0;
    int car = 0;
    std::vector<SchemeRecord> recs;  // consecutive ops, back-to-back
    Slice start() const { return recs.front().start; }
    Slice end() const { return recs.back().end; }
};

bool overlaps(Slice a1, Slice a2, Slice b1, Slice b2) { return a1 < b2 && b1 < a2; }

// Splits runs until no station hold window [run start, op end) covers
// another record at the same station.
void split_conflicting_runs(std::vector<Run>& runs, const std::vector<SchemeRecord>& all) {
    bool changed = true;
    while (changed) {
        changed = false;
        for (size_t r = 0; r < runs.size() && !changed; ++r) {
            Run& run = runs[r];
            for (size_t k = 1; k < run.recs.size() && !changed; ++k) {
                const SchemeRecord& rec = run.recs[k];
                for (const SchemeRecord& other : all) {
                    if (other == rec) continue;
                    if (other.location() != rec.location()) continue;
                    if (overlaps(other.start, other.end, run.start(), rec.start)) {
                        Run tail;
                        tail.task = run.task;
                        tail.car = run.car;
                        tail.recs.assign(run.recs.begin() + static_cast<long>(k), run.recs.end());
                        run.recs.resize(k);
                        runs.insert(runs.begin() + static_cast<long>(r) + 1, tail);
                        changed = true;
                        break;
                    }
                }
            }
        }
    }
}

// Emission order within one time slice: releases first so reallocations of
// the same station see it free, then allocations, bindings, handoffs,
// frees, completions.
enum Rank { RankExec = 0, RankPlan = 1, RankAsgn = 2, RankAtt = 3, RankFree = 4, RankComp = 5 };

struct Emission {
    Slice time = 0;
    int rank = 0;
    int task = 0;
    int seq = 0;  // final tiebreak: emission order
    CompiledLine line;
};

}  // namespace

ModelingProgram compile_scheme(const SchedulingScheme& scheme, const ScenarioConfig& scenario) {
    validate_scheme(scheme, scenario);

    std::map<int, std::vector<SchemeRecord>> by_task;
    for (const SchemeRecord& r : scheme.records) by_task[r.task].push_back(r);

    std::vector<Run> runs;
    for (auto& [task, recs] : by_task) {
        std::sort(recs.begin(), recs.end(),
                  [](const SchemeRecord& a, const SchemeRecord& b) { return a.op < b.op; });
        Run cur;
        for (const SchemeRecord& r : recs) {
            if (!cur.recs.empty() && (r.car != cur.car || r.start != cur.end())) {
                runs.push_back(cur);
                cur.recs.clear();
            }
            cur.task = task;
            cur.car = r.car;
            cur.recs.push_back(r);
        }
        if (!cur.recs.empty()) runs.push_back(cur);
    }
    split_conflicting_runs(runs, scheme.records);

    std::vector<Emission> emissions;
    int seq = 0;
    auto emit = [&](Slice time, int rank, int task, CompiledLine line) {
        emissions.push_back(Emission{time, rank, task, seq++, std::move(line)});
    };

    // Runs are grouped per task in op order; track the previous run's end and
    // car variable to decide between a fresh binding and a handoff.
    std::map<int, Slice> prev_end;
    std::map<int, Slice> task_last_end;
    for (const Run& run : runs)
        task_last_end[run.task] = std::max(task_last_end.count(run.task) ? task_last_end[run.task]
                                                                         : run.end(),
                                           run.end());

    for (const Run& run : runs) {
        const std::string tname = "t" + std::to_string(run.task);
        const std::string carvar = "c" + std::to_string(run.car + 1) + "@" + std::to_string(run.task);
        std::vector<std::pair<int, int>> run_pairs;
        for (const SchemeRecord& r : run.recs) run_pairs.emplace_back(r.task, r.op);

        auto plan = std::make_shared<Command>();
        plan->kind = CmdKind::Plan;
        plan->carvar = carvar;
        for (const SchemeRecord& r : run.recs) {
            plan->durs.push_back(rhm::lit(r.end - r.start));
            plan->loc_pins.push_back(location_id(r.location()));
        }
        plan->car_pin = -1;
        emit(run.start(), RankPlan, run.task, CompiledLine{plan, run.task, run_pairs});

        const bool handoff = prev_end.count(run.task) && prev_end[run.task] == run.start();
        auto bind = std::make_shared<Command>();
        bind->kind = handoff ? CmdKind::Att : CmdKind::Asgn;
        bind->task = tname;
        bind->cars.push_back(rhm::car_var(carvar));
        emit(run.start(), handoff ? RankAtt : RankAsgn, run.task,
             CompiledLine{bind, run.task, run_pairs});

        for (const SchemeRecord& r : run.recs) {
            auto ex = std::make_shared<Command>();
            ex->kind = CmdKind::Exec1;
            ex->task = tname;
            ex->expr = rhm::lit(0);
            emit(r.end, RankExec, run.task, CompiledLine{ex, run.task, {{r.task, r.op}}});
        }

        auto fr = std::make_shared<Command>();
        fr->kind = CmdKind::Free;
        fr->task = tname;
        fr->expr = rhm::lit(0);
        emit(run.end(), RankFree, run.task, CompiledLine{fr, run.task, run_pairs});

        prev_end[run.task] = run.end();
    }

    for (const auto& [task, last] : task_last_end) {
        auto comp = std::make_shared<Command>();
        comp->kind = CmdKind::Comp;
        comp->task = "t" + std::to_string(task);
        std::vector<std::pair<int, int>> pairs;
        for (const SchemeRecord& r : by_task[task]) pairs.emplace_back(r.task, r.op);
        emit(last, RankComp, task, CompiledLine{comp, task, pairs});
    }

    std::stable_sort(emissions.begin(), emissions.end(), [](const Emission& a, const Emission& b) {
        return std::tie(a.time, a.rank, a.task, a.seq) < std::tie(b.time, b.rank, b.task, b.seq);
    });

    ModelingProgram prog;
    for (size_t i = 0; i < emissions.size(); ++i) {
        emissions[i].line.cmd->line = static_cast<int>(i) + 1;
        prog.lines.push_back(std::move(emissions[i].line));
    }
    return prog;
}

std::string verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Verified: return "verified";
        case Verdict::ResidualState: return "residual-state";
        case Verdict::Stuck: return "stuck";
        case Verdict::FuelExhausted: return "fuel-exhausted";
    }
    return "?";
}

VerificationReport verify_program(const std::vector<CmdPtr>& program, long long fuel) {
    if (fuel <= 0) fuel = std::max<long long>(1000, 10 * rhm::command_count(program));
    rhm::RunResult rr = rhm::run(program, rhm::MachineState{}, fuel, /*keep_trace=*/true);

    VerificationReport rep;
    rep.steps = rr.steps;
    rep.fuel = fuel;
    rep.final_state = rr.final_config.state;

    long long step_idx = 0;
    for (const rhm::TraceEntry& te : rr.trace) {
        ++step_idx;
        const rhm::StepNote& n = te.note;
        for (long long loc : n.alloc_locs)
            rep.occupancy.push_back(OccupancyEvent{loc, n.task, true, step_idx, n.line});
        if (n.freed_loc >= 0)
            rep.occupancy.push_back(OccupancyEvent{n.freed_loc, n.task, false, step_idx, n.line});
    }

    switch (rr.status) {
        case rhm::RunStatus::FuelExhausted:
            rep.verdict = Verdict::FuelExhausted;
            rep.reason = "fuel exhausted after " + std::to_string(rr.steps) + " steps";
            return rep;
        case rhm::RunStatus::Stuck:
            rep.verdict = Verdict::Stuck;
            rep.reason = rr.stuck_reason;
            rep.stuck_line = rr.stuck_line;
            return rep;
        case rhm::RunStatus::Terminated:
            break;
    }

    const rhm::MachineState& st = rep.final_state;
    std::ostringstream residue;
    if (!st.h_C.empty()) residue << st.h_C.size() << " car resource(s) still allocated; ";
    if (!st.h_L.empty()) residue << st.h_L.size() << " location(s) still held; ";
    for (const auto& [t, v] : st.s_T)
        if (v.kind == rhm::TaskValue::Kind::Cars)
            residue << "task " << t << " still holds " << v.cars.size() << " car(s); ";
    std::string res = residue.str();
    if (res.empty()) {
        rep.verdict = Verdict::Verified;
    } else {
        res.erase(res.size() - 2);  // trailing "; "
        rep.verdict = Verdict::ResidualState;
        rep.reason = res;
    }
    return rep;
}

VerificationReport check_scheme(const SchedulingScheme& scheme, const ScenarioConfig& scenario) {
    ModelingProgram prog = compile_scheme(scheme, scenario);
    VerificationReport rep = verify_program(prog.commands());

    rep.scheme_makespan = makespan(scheme, scenario);
    // Independent cross-check: sweep station intervals.
    std::map<Location, std::vector<std::pair<Slice, Slice>>> by_station;
    Slice sweep = 0;
    for (const SchemeRecord& r : scheme.records) {
        by_station[r.location()].emplace_back(r.start, r.end);
        sweep = std::max(sweep, r.end);
    }
    for (auto& [loc, iv] : by_station) {
        std::sort(iv.begin(), iv.end());
        for (size_t i = 1; i < iv.size(); ++i)
            if (iv[i].first < iv[i - 1].second)
                throw ValidationError("station sweep found overlapping intervals at " +
                                      location_label(location_id(loc)));
    }
    rep.sweep_makespan = sweep;
    rep.makespan_checked = true;
    if (rep.sweep_makespan != rep.scheme_makespan && rep.verdict == Verdict::Verified) {
        rep.verdict = Verdict::ResidualState;
        rep.reason = "makespan mismatch: declared " + std::to_string(rep.scheme_makespan) +
                     ", swept " + std::to_string(rep.sweep_makespan);
    }
    return rep;
}

std::string report_to_json(const VerificationReport& rep) {
    nlohmann::json j;
    j["verdict"] = verdict_name(rep.verdict);
    j["reason"] = rep.reason;
    j["stuck_line"] = rep.stuck_line;
    j["steps"] = rep.steps;
    j["fuel"] = rep.fuel;
    j["final_state"] = rep.final_state.to_string();
    nlohmann::json occ = nlohmann::json::array();
    for (const OccupancyEvent& e : rep.occupancy) {
        occ.push_back({{"loc", e.loc},
                       {"station", location_label(e.loc)},
                       {"task", e.task},
                       {"kind", e.allocate ? "allocate" : "release"},
                       {"step", e.step},
                       {"line", e.line}});
    }
    j["occupancy"] = occ;
    if (rep.makespan_checked) {
        j["makespan"] = {{"declared", rep.scheme_makespan},
                         {"swept", rep.sweep_makespan},
                         {"equal", rep.scheme_makespan == rep.sweep_makespan}};
    }
    return j.dump(2) + "\n";
}

void write_report_file(const std::string& path, const VerificationReport& rep) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << report_to_json(rep);
}

}  // namespace vsched
