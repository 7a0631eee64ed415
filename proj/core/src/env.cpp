#include "vsched/env.hpp"

#include <algorithm>

#include "json.hpp"

namespace vsched {

namespace {
using nlohmann::json;
}  // namespace

void RewardConfig::validate() const {
    if (!(task_reward >= 0.0)) throw ValidationError("task_reward must be non-negative");
    if (!(rx_scale > 0.0)) throw ValidationError("rx_scale must be positive");
    if (!(alpha >= 0.0)) throw ValidationError("alpha must be non-negative");
}

std::string RewardConfig::to_json() const {
    json j;
    j["task_reward"] = task_reward;
    j["rx_scale"] = rx_scale;
    j["alpha"] = alpha;
    j["literal_pattern_sign"] = literal_pattern_sign;
    j["metric"] = metric == Metric::ScheduledHorizon ? "scheduled" : "projected";
    return j.dump(2) + "\n";
}

RewardConfig RewardConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(1, 1, std::string("bad reward config JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("reward config must be a JSON object");
    RewardConfig rc;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "task_reward") rc.task_reward = value.get<double>();
            else if (key == "rx_scale") rc.rx_scale = value.get<double>();
            else if (key == "alpha") rc.alpha = value.get<double>();
            else if (key == "literal_pattern_sign") rc.literal_pattern_sign = value.get<bool>();
            else if (key == "metric") {
                const std::string m = value.get<std::string>();
                if (m == "scheduled") rc.metric = Metric::ScheduledHorizon;
                else if (m == "projected") rc.metric = Metric::ProjectedHorizon;
                else throw ValidationError("metric must be 'scheduled' or 'projected'");
            }
            else throw ValidationError("unknown reward config key '" + key + "'");
        } catch (const json::exception& e) {
            throw ValidationError("bad value for reward config key '" + key + "': " + e.what());
        }
    }
    rc.validate();
    return rc;
}

LowerVerdict classify_lower(const std::vector<int>& car_flags, bool gate, int action) {
    const int cars = static_cast<int>(car_flags.size());
    if (action < 0 || action > cars) throw Error("lower action out of range");
    auto avail = [&](int d) { return gate && car_flags[static_cast<size_t>(d - 1)] == 1; };
    bool any = false;
    for (int d = 1; d <= cars; ++d) any = any || avail(d);

    LowerVerdict v;
    if (action == 0) {
        if (any) {
            v.kind = LowerCase::WaitAvailable;
            v.r_q = -2.0;
        } else {
            v.kind = LowerCase::WaitNoneAvailable;
            v.r_q = 1.0;
        }
    } else if (avail(action)) {
        v.kind = LowerCase::SelectAvailable;
        v.r_q = 2.0;
        v.assign = true;
    } else if (!any) {
        v.kind = LowerCase::SelectNoneAvailable;
        v.r_q = -2.0;
    } else {
        v.kind = LowerCase::SelectBusy;
        v.r_q = -2.0;
    }
    return v;
}

int LowerState::feature_size(int n_equipment, int n_cars) {
    return 2 * n_equipment + n_cars + 3;
}

std::vector<double> LowerState::features() const {
    std::vector<double> f;
    f.reserve(static_cast<size_t>(feature_size(static_cast<int>(equipment_free.size()),
                                               static_cast<int>(car_flags.size()))));
    for (size_t e = 0; e < equipment_free.size(); ++e)
        f.push_back(static_cast<int>(e) == op_equipment ? 1.0 : 0.0);
    f.push_back(static_cast<double>(op_duration) / 10.0);
    f.push_back(ops_total > 0 ? static_cast<double>(ops_done) / ops_total : 0.0);
    f.push_back(task_ready ? 1.0 : 0.0);
    for (size_t e = 0; e < equipment_free.size(); ++e)
        f.push_back(static_cast<double>(equipment_free[e]) / workstations[e]);
    for (int flag : car_flags) f.push_back(flag == 1 ? 1.0 : 0.0);
    return f;
}

LowerEnv::LowerEnv(const ScenarioConfig& scenario, std::uint64_t seed, double task_reward)
    : scenario_(scenario), rng_(seed), task_reward_(task_reward) {
    scenario_.validate();
    focal_task_ = rng_.uniform_int(0, static_cast<int>(scenario_.tasks.size()) - 1);
    car_busy_.assign(static_cast<size_t>(scenario_.cars), 0);
    for (auto& b : car_busy_)
        if (rng_.chance(0.4)) b = 1 + rng_.uniform_int(0, 4);
    station_busy_.resize(scenario_.equipment.size());
    for (size_t e = 0; e < scenario_.equipment.size(); ++e) {
        station_busy_[e].assign(static_cast<size_t>(scenario_.equipment[e].workstations), 0);
        for (auto& b : station_busy_[e])
            if (rng_.chance(0.3)) b = 1 + rng_.uniform_int(0, 3);
    }
    const int total = static_cast<int>(scenario_.tasks[static_cast<size_t>(focal_task_)].ops.size());
    budget_ = 64LL * total + 64;
    refresh_state();
}

void LowerEnv::refresh_state() {
    const Task& task = scenario_.tasks[static_cast<size_t>(focal_task_)];
    state_.ops_total = static_cast<int>(task.ops.size());
    state_.ops_done = ops_done_;
    state_.task_ready = true;
    if (ops_done_ < state_.ops_total) {
        state_.op_equipment = task.ops[static_cast<size_t>(ops_done_)].equipment;
        state_.op_duration = task.ops[static_cast<size_t>(ops_done_)].duration;
    } else {
        state_.op_equipment = 0;
        state_.op_duration = 0;
    }
    state_.equipment_free.assign(scenario_.equipment.size(), 0);
    state_.workstations.resize(scenario_.equipment.size());
    for (size_t e = 0; e < station_busy_.size(); ++e) {
        state_.workstations[e] = scenario_.equipment[e].workstations;
        for (Slice b : station_busy_[e])
            if (b <= 0) state_.equipment_free[e]++;
    }
    state_.car_flags.resize(car_busy_.size());
    for (size_t c = 0; c < car_busy_.size(); ++c) state_.car_flags[c] = car_busy_[c] <= 0 ? 1 : -1;
}

void LowerEnv::pass_time(Slice dt) {
    for (Slice s = 0; s < dt; ++s) {
        for (auto& b : car_busy_)
            if (b > 0) --b;
        for (auto& ws : station_busy_)
            for (auto& b : ws)
                if (b > 0) --b;
        // Exogenous load: idle resources may be claimed by unmodeled work.
        for (auto& b : car_busy_)
            if (b <= 0 && rng_.chance(0.15)) b = 1 + rng_.uniform_int(0, 4);
        for (auto& ws : station_busy_)
            for (auto& b : ws)
                if (b <= 0 && rng_.chance(0.10)) b = 1 + rng_.uniform_int(0, 3);
    }
}

LowerOutcome LowerEnv::step(int action) {
    if (done_) throw Error("step on finished episode");
    LowerVerdict v = classify_lower(state_.car_flags, state_.gate(), action);
    LowerOutcome out;
    out.kind = v.kind;
    out.r_q = v.r_q;
    if (v.assign) {
        out.r_p = task_reward_;
        const Slice dur = state_.op_duration;
        car_busy_[static_cast<size_t>(action - 1)] = dur;
        for (auto& b : station_busy_[static_cast<size_t>(state_.op_equipment)]) {
            if (b <= 0) {
                b = dur;
                break;
            }
        }
        ++ops_done_;
        pass_time(dur);  // jump to the operation's end
    } else {
        // Waits and refused dispatches both consume one slice; if a refused
        // dispatch froze the clock the episode could reach an absorbing state.
        pass_time(1);
    }
    ++steps_;
    if (ops_done_ >= state_.ops_total || steps_ >= budget_) done_ = true;
    refresh_state();
    out.reward = out.r_p + out.r_q;
    out.done = done_;
    return out;
}

int GreedyLowerPolicy::act(const LowerState& s) {
    if (!s.gate()) return 0;
    for (size_t c = 0; c < s.car_flags.size(); ++c)
        if (s.car_flags[c] == 1) return static_cast<int>(c) + 1;
    return 0;
}

int RandomLowerPolicy::act(const LowerState& s) {
    return rng.uniform_int(0, static_cast<int>(s.car_flags.size()));
}

int UpperState::feature_size(int n_tasks, int n_equipment, int n_cars) {
    return n_tasks * (n_equipment + 4) + n_equipment + 2 * n_cars + 2;
}

std::vector<double> UpperState::features() const {
    std::vector<double> f;
    const int E = static_cast<int>(equipment_free.size());
    f.reserve(static_cast<size_t>(feature_size(static_cast<int>(tasks.size()), E,
                                               static_cast<int>(car_flags.size()))));
    for (const TaskRow& t : tasks) {
        for (int e = 0; e < E; ++e) f.push_back(t.next_equipment == e ? 1.0 : 0.0);
        f.push_back(static_cast<double>(t.next_duration) / 10.0);
        f.push_back(t.total > 0 ? static_cast<double>(t.assigned) / t.total : 0.0);
        f.push_back(t.running ? 1.0 : 0.0);
        f.push_back(t.finished ? 1.0 : 0.0);
    }
    for (int e = 0; e < E; ++e)
        f.push_back(static_cast<double>(equipment_free[static_cast<size_t>(e)]) /
                    workstations[static_cast<size_t>(e)]);
    for (size_t c = 0; c < car_flags.size(); ++c) {
        f.push_back(car_flags[c] == 1 ? 1.0 : 0.0);
        f.push_back(static_cast<double>(std::max<Slice>(0, car_busy_until[c] - now)) / 10.0);
    }
    f.push_back(total_ops > 0 ? static_cast<double>(progress) / total_ops : 0.0);
    f.push_back(static_cast<double>(now) / 100.0);
    return f;
}

UpperEnv::UpperEnv(const ScenarioConfig& scenario, const RewardConfig& rewards, std::uint64_t seed)
    : scenario_(scenario), rewards_(rewards) {
    (void)seed;  // the base dynamics are deterministic; variation comes from policies
    scenario_.validate();
    const int E = static_cast<int>(scenario_.equipment.size());
    state_.tasks.resize(scenario_.tasks.size());
    for (size_t t = 0; t < scenario_.tasks.size(); ++t) {
        TaskRow& row = state_.tasks[t];
        row.total = static_cast<int>(scenario_.tasks[t].ops.size());
        row.next_equipment = scenario_.tasks[t].ops[0].equipment;
        row.next_duration = scenario_.tasks[t].ops[0].duration;
    }
    state_.workstations.resize(static_cast<size_t>(E));
    state_.equipment_free.resize(static_cast<size_t>(E));
    station_busy_until_.resize(static_cast<size_t>(E));
    for (int e = 0; e < E; ++e) {
        const int ws = scenario_.equipment[static_cast<size_t>(e)].workstations;
        state_.workstations[static_cast<size_t>(e)] = ws;
        state_.equipment_free[static_cast<size_t>(e)] = ws;
        station_busy_until_[static_cast<size_t>(e)].assign(static_cast<size_t>(ws), 0);
    }
    state_.car_flags.assign(static_cast<size_t>(scenario_.cars), 1);
    state_.car_busy_until.assign(static_cast<size_t>(scenario_.cars), 0);
    state_.total_ops = scenario_.total_ops();
    budget_ = 20LL * state_.total_ops;
    done_ = state_.total_ops == 0;
}

double UpperEnv::metric() const {
    if (rewards_.metric == RewardConfig::Metric::ScheduledHorizon)
        return static_cast<double>(horizon_);
    Slice m = horizon_;
    for (size_t t = 0; t < state_.tasks.size(); ++t) {
        const TaskRow& row = state_.tasks[t];
        if (row.finished && !row.running) continue;
        Slice base = row.running ? row.running_until : state_.now;
        Slice chain = 0;
        const Task& task = scenario_.tasks[t];
        for (size_t o = static_cast<size_t>(row.assigned); o < task.ops.size(); ++o)
            chain += task.ops[o].duration;
        m = std::max(m, base + chain);
    }
    return static_cast<double>(m);
}

LowerState UpperEnv::derive_lower_state(int task) const {
    if (task < 0 || task >= static_cast<int>(state_.tasks.size()))
        throw Error("task action out of range");
    const TaskRow& row = state_.tasks[static_cast<size_t>(task)];
    if (row.finished) throw Error("no pending operation: task is fully assigned");
    LowerState ls;
    ls.op_equipment = row.next_equipment;
    ls.op_duration = row.next_duration;
    ls.ops_done = row.assigned;
    ls.ops_total = row.total;
    ls.task_ready = !row.running;
    ls.equipment_free = state_.equipment_free;
    ls.workstations = state_.workstations;
    ls.car_flags = state_.car_flags;
    return ls;
}

void UpperEnv::advance_time(Slice dt) {
    state_.now += dt;
    for (size_t e = 0; e < station_busy_until_.size(); ++e) {
        int free = 0;
        for (Slice until : station_busy_until_[e])
            if (until <= state_.now) ++free;
        state_.equipment_free[e] = free;
    }
    for (size_t c = 0; c < state_.car_flags.size(); ++c)
        state_.car_flags[c] = state_.car_busy_until[c] <= state_.now ? 1 : -1;
    for (TaskRow& row : state_.tasks)
        if (row.running && row.running_until <= state_.now) row.running = false;
}

UpperOutcome UpperEnv::step(int task, LowerPolicy& lower) {
    if (done_) throw Error("step on finished episode");
    if (task < 0 || task >= static_cast<int>(state_.tasks.size()))
        throw Error("task action out of range");
    UpperOutcome out;
    out.m_old = metric();

    TaskRow& row = state_.tasks[static_cast<size_t>(task)];
    if (row.finished) {
        // Invalid selection: graded by how much work was still open.
        out.r_y = -1.0 - static_cast<double>(state_.total_ops - state_.progress) / state_.total_ops;
    } else {
        LowerState ls = derive_lower_state(task);
        const int al = lower.act(ls);
        LowerVerdict v = classify_lower(ls.car_flags, ls.gate(), al);
        out.lower_action = al;
        out.lower_case = v.kind;
        if (v.assign) {
            const int e = ls.op_equipment;
            int w = -1;
            auto& stations = station_busy_until_[static_cast<size_t>(e)];
            for (size_t i = 0; i < stations.size(); ++i) {
                if (stations[i] <= state_.now) {
                    w = static_cast<int>(i);
                    break;
                }
            }
            const Slice start = state_.now;
            const Slice end = start + ls.op_duration;
            records_.push_back(SchemeRecord{task, row.assigned, e, w, al - 1, start, end});
            stations[static_cast<size_t>(w)] = end;
            state_.equipment_free[static_cast<size_t>(e)]--;
            state_.car_busy_until[static_cast<size_t>(al - 1)] = end;
            state_.car_flags[static_cast<size_t>(al - 1)] = -1;
            row.assigned++;
            row.running = true;
            row.running_until = end;
            if (row.assigned == row.total) {
                row.finished = true;
                row.next_equipment = -1;
                row.next_duration = 0;
            } else {
                const Operation& next = scenario_.tasks[static_cast<size_t>(task)]
                                            .ops[static_cast<size_t>(row.assigned)];
                row.next_equipment = next.equipment;
                row.next_duration = next.duration;
            }
            state_.progress++;
            horizon_ = std::max(horizon_, end);
            out.assigned = true;
        } else {
            // Waits and refused dispatches both consume one slice. Only
            // selecting a finished task (above) leaves the clock untouched,
            // so stalled episodes still end at the step budget.
            advance_time(1);
        }
    }

    ++steps_;
    if (complete() || steps_ >= budget_) done_ = true;
    out.m_new = metric();
    out.r_x = (out.m_old - out.m_new) / rewards_.rx_scale;
    out.reward = out.r_x + out.r_y;
    out.done = done_;
    return out;
}

SchedulingScheme UpperEnv::emit_scheme() const {
    if (!complete())
        throw ValidationError("cannot emit scheme: " +
                              std::to_string(state_.total_ops - state_.progress) +
                              " operation(s) unassigned");
    SchedulingScheme s;
    s.records = records_;
    std::sort(s.records.begin(), s.records.end(), [](const SchemeRecord& a, const SchemeRecord& b) {
        return std::tie(a.start, a.task, a.op) < std::tie(b.start, b.task, b.op);
    });
    return s;
}

}  // namespace vsched
