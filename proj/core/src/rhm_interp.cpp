#include "vsched/rhm/interp.hpp"

#include <algorithm>

namespace vsched::rhm {

namespace {

long long least_fresh(const std::map<long long, std::vector<long long>>& dom) {
    long long id = 1;
    while (dom.count(id)) ++id;
    return id;
}

long long least_fresh_loc(const std::map<long long, long long>& h_L,
                          const std::vector<long long>& chosen) {
    long long id = 1;
    while (h_L.count(id) || std::find(chosen.begin(), chosen.end(), id) != chosen.end()) ++id;
    return id;
}

std::optional<StepOk> stuck_out(StepStuck* stuck, const std::string& reason, int line) {
    if (stuck) *stuck = StepStuck{reason, line};
    return std::nullopt;
}

}  // namespace

Config make_config(const std::vector<CmdPtr>& program, MachineState initial) {
    Config cfg;
    cfg.state = std::move(initial);
    cfg.stack.assign(program.rbegin(), program.rend());
    return cfg;
}

std::optional<StepOk> step(const Config& cfg, StepStuck* stuck) {
    if (cfg.stack.empty()) return stuck_out(stuck, "terminal configuration cannot step", 0);
    CmdPtr cmd = cfg.stack.back();
    Config next = cfg;
    next.stack.pop_back();
    StepNote note;
    note.line = cmd->line;
    MachineState& st = next.state;

    auto fail = [&](const std::string& reason) { return stuck_out(stuck, reason, cmd->line); };

    switch (cmd->kind) {
        case CmdKind::Skip:
            note.rule = "skip";
            return StepOk{std::move(next), std::move(note)};

        case CmdKind::Seq:
            note.rule = "seq";
            next.stack.push_back(cmd->b);
            next.stack.push_back(cmd->a);
            return StepOk{std::move(next), std::move(note)};

        case CmdKind::Assign: {
            auto v = eval_expr(*cmd->expr, st);
            if (!v.ok()) return fail(v.error);
            st.s_L[cmd->var] = *v.value;
            note.rule = "assign";
            return StepOk{std::move(next), std::move(note)};
        }

        case CmdKind::LocGet: {
            auto cc = eval_car(*cmd->car, st);
            if (!cc.ok()) return fail(cc.error);
            auto it = st.h_C.find(*cc.value);
            if (it == st.h_C.end())
                return fail("car resource cc" + std::to_string(*cc.value) + " not allocated");
            auto idx = eval_expr(*cmd->expr, st);
            if (!idx.ok()) return fail(idx.error);
            long long i = *idx.value;
            if (i < 0 || i >= static_cast<long long>(it->second.size()))
                return fail("location index " + std::to_string(i) + " out of range for cc" +
                            std::to_string(*cc.value));
            st.s_L[cmd->var] = it->second[static_cast<std::size_t>(i)];
            note.rule = "locget";
            note.car = *cc.value;
            return StepOk{std::move(next), std::move(note)};
        }

        case CmdKind::If: {
            auto b = eval_bool(*cmd->cond, st);
            if (!b.ok()) return fail(b.error);
            note.rule = *b.value ? "if-true" : "if-false";
            next.stack.push_back(*b.value ? cmd->a : cmd->b);
            return StepOk{std::move(next), std::move(note)};
        }

        case CmdKind::While: {
            auto b = eval_bool(*cmd->cond, st);
            if (!b.ok()) return fail(b.error);
            if (*b.value) {
                note.rule = "while-true";
                next.stack.push_back(cmd);  // re-test after the body
                next.stack.push_back(cmd->a);
            } else {
                note.rule = "while-false";
            }
            return StepOk{std::move(next), std::move(note)};
        }

        case CmdKind::Plan: {
            // Allocate one fresh car resource and one fresh location per
            // duration. Pins request specific ids; a pinned id that is still
            // live is a freshness violation (two reservations of one
            // physical resource), so the step sticks.
            long long cc;
            if (cmd->car_pin >= 0) {
                if (st.h_C.count(cmd->car_pin))
                    return fail("freshness violation: car resource cc" +
                                std::to_string(cmd->car_pin) + " is still live");
                cc = cmd->car_pin;
            } else {
                cc = least_fresh(st.h_C);
            }
            std::vector<long long> locs;
            std::vector<long long> durs;
            for (std::size_t i = 0; i < cmd->durs.size(); ++i) {
                auto d = eval_expr(*cmd->durs[i], st);
                if (!d.ok()) return fail(d.error);
                long long pin = cmd->loc_pins[i];
                long long loc;
                if (pin >= 0) {
                    if (st.h_L.count(pin) ||
                        std::find(locs.begin(), locs.end(), pin) != locs.end())
                        return fail("freshness violation: location loc" + std::to_string(pin) +
                                    " is still live");
                    loc = pin;
                } else {
                    loc = least_fresh_loc(st.h_L, locs);
                }
                locs.push_back(loc);
                durs.push_back(*d.value);
            }
            st.s_C[cmd->carvar] = cc;
            st.h_C[cc] = locs;
            for (std::size_t i = 0; i < locs.size(); ++i) st.h_L[locs[i]] = durs[i];
            note.rule = "plan";
            note.task = owner_label(cmd->carvar);
            note.car = cc;
            note.alloc_locs = locs;
            return StepOk{std::move(next), std::move(note)};
        }

        case CmdKind::Asgn: {
            auto it = st.s_T.find(cmd->task);
            if (it != st.s_T.end() && !it->second.is_null())
                return fail("asgn precondition violated: task " + cmd->task +
                            " is already bound to " + to_string(it->second));
            std::vector<long long> ccs;
            for (const auto& ce : cmd->cars) {
                auto cc = eval_car(*ce, st);
                if (!cc.ok()) return fail(cc.error);
                if (!st.h_C.count(*cc.value))
                    return fail("car resource cc" + std::to_string(*cc.value) + " not allocated");
                ccs.push_back(*cc.value);
            }
            st.s_T[cmd->task] = ccs.empty() ? TaskValue::null() : TaskValue::of_cars(ccs);
            note.rule = "asgn";
            note.task = cmd->task;
            if (!ccs.empty()) note.car = ccs.front();
            return StepOk{std::move(next), std::move(note)};
        }

        case CmdKind::Att: {
            auto it = st.s_T.find(cmd->task);
            if (it == st.s_T.end() || !it->second.is_cars())
                return fail("att precondition violated: task " + cmd->task +
                            " does not hold a car sequence");
            std::vector<long long> ccs = it->second.cars;
            for (const auto& ce : cmd->cars) {
                auto cc = eval_car(*ce, st);
                if (!cc.ok()) return fail(cc.error);
                if (!st.h_C.count(*cc.value))
                    return fail("car resource cc" + std::to_string(*cc.value) + " not allocated");
                ccs.push_back(*cc.value);
            }
            st.s_T[cmd->task] = TaskValue::of_cars(ccs);
            note.rule = "att";
            note.task = cmd->task;
            note.car = ccs.back();
            return StepOk{std::move(next), std::move(note)};
        }

        case CmdKind::Free: {
            auto it = st.s_T.find(cmd->task);
            if (it == st.s_T.end() || !it->second.is_cars())
                return fail("free precondition violated: task " + cmd->task +
                            " does not hold a car sequence");
            auto idx = eval_expr(*cmd->expr, st);
            if (!idx.ok()) return fail(idx.error);
            long long i = *idx.value;
            if (i < 0 || i >= static_cast<long long>(it->second.cars.size()))
                return fail("car index " + std::to_string(i) + " out of range for task " + cmd->task);
            long long cc = it->second.cars[static_cast<std::size_t>(i)];
            auto hc = st.h_C.find(cc);
            if (hc == st.h_C.end())
                return fail("car resource cc" + std::to_string(cc) + " not allocated");
            if (!hc->second.empty())
                return fail("free precondition violated: car resource cc" + std::to_string(cc) +
                            " still holds " + std::to_string(hc->second.size()) + " location(s)");
            st.h_C.erase(hc);
            auto cars = it->second.cars;
            cars.erase(cars.begin() + static_cast<std::ptrdiff_t>(i));
            st.s_T[cmd->task] = cars.empty() ? TaskValue::null() : TaskValue::of_cars(cars);
            note.rule = "free";
            note.task = cmd->task;
            note.car = cc;
            return StepOk{std::move(next), std::move(note)};
        }

        case CmdKind::Comp: {
            auto it = st.s_T.find(cmd->task);
            if (it == st.s_T.end())
                return fail("unbound task variable " + cmd->task);
            if (!it->second.is_null())
                return fail("comp precondition violated: task " + cmd->task + " is " +
                            to_string(it->second) + ", not null");
            st.s_T[cmd->task] = TaskValue::fin();
            note.rule = "comp";
            note.task = cmd->task;
            return StepOk{std::move(next), std::move(note)};
        }

        case CmdKind::Add: {
            auto cv = st.s_C.find(cmd->carvar);
            if (cv == st.s_C.end()) return fail("unbound car variable " + cmd->carvar);
            long long cc = cv->second;
            auto hc = st.h_C.find(cc);
            if (hc == st.h_C.end())
                return fail("car resource cc" + std::to_string(cc) + " not allocated");
            auto d = eval_expr(*cmd->expr, st);
            if (!d.ok()) return fail(d.error);
            long long loc;
            if (cmd->add_pin >= 0) {
                if (st.h_L.count(cmd->add_pin))
                    return fail("freshness violation: location loc" + std::to_string(cmd->add_pin) +
                                " is still live");
                loc = cmd->add_pin;
            } else {
                loc = least_fresh_loc(st.h_L, {});
            }
            hc->second.push_back(loc);
            st.h_L[loc] = *d.value;
            note.rule = "add";
            note.task = owner_label(cmd->carvar);
            note.car = cc;
            note.alloc_locs = {loc};
            return StepOk{std::move(next), std::move(note)};
        }

        case CmdKind::Exec1: {
            auto it = st.s_T.find(cmd->task);
            if (it == st.s_T.end() || !it->second.is_cars())
                return fail("exec1 precondition violated: task " + cmd->task +
                            " does not hold a car sequence");
            auto idx = eval_expr(*cmd->expr, st);
            if (!idx.ok()) return fail(idx.error);
            long long i = *idx.value;
            if (i < 0 || i >= static_cast<long long>(it->second.cars.size()))
                return fail("car index " + std::to_string(i) + " out of range for task " + cmd->task);
            long long cc = it->second.cars[static_cast<std::size_t>(i)];
            auto hc = st.h_C.find(cc);
            if (hc == st.h_C.end())
                return fail("car resource cc" + std::to_string(cc) + " not allocated");
            if (hc->second.empty())
                return fail("exec1 precondition violated: car resource cc" + std::to_string(cc) +
                            " holds no locations");
            long long loc = hc->second.front();
            if (!st.h_L.count(loc))
                return fail("separation violation: location loc" + std::to_string(loc) +
                            " missing from h_L");
            hc->second.erase(hc->second.begin());
            st.h_L.erase(loc);
            note.rule = "exec1";
            note.task = cmd->task;
            note.car = cc;
            note.freed_loc = loc;
            return StepOk{std::move(next), std::move(note)};
        }
    }
    return fail("malformed command");
}

RunResult run(const std::vector<CmdPtr>& program, MachineState initial, long long fuel,
              bool keep_trace) {
    RunResult res;
    Config cfg = make_config(program, std::move(initial));
    while (!cfg.stack.empty()) {
        if (res.steps >= fuel) {
            res.status = RunStatus::FuelExhausted;
            res.final_config = std::move(cfg);
            return res;
        }
        StepStuck stuck;
        auto ok = step(cfg, &stuck);
        if (!ok) {
            res.status = RunStatus::Stuck;
            res.stuck_reason = stuck.reason;
            res.stuck_line = stuck.line;
            res.final_config = std::move(cfg);
            return res;
        }
        cfg = std::move(ok->next);
        ++res.steps;
        if (keep_trace) res.trace.push_back(TraceEntry{std::move(ok->note), cfg.state});
    }
    res.status = RunStatus::Terminated;
    res.final_config = std::move(cfg);
    return res;
}

namespace {
long long count_cmd(const CmdPtr& c) {
    if (!c) return 0;
    long long n = 1;
    if (c->a) n += count_cmd(c->a);
    if (c->b) n += count_cmd(c->b);
    return n;
}
}  // namespace

long long command_count(const std::vector<CmdPtr>& program) {
    long long n = 0;
    for (const auto& c : program) n += count_cmd(c);
    return n;
}

}  // namespace vsched::rhm
