#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vsched/scheme.hpp"

namespace vsched {

struct RewardConfig {
    // r_p: granted to the lower layer when a car assignment succeeds (the
    // task arrives at its target station; transit time is not modeled).
    double task_reward = 10.0;
    // r_x = (M_old - M_new) / rx_scale.
    double rx_scale = 5000.0;
    // Pattern-match weight for r_z = sign * alpha * (mu_match - mu_total/2).
    double alpha = 0.001;
    // Positive correlation by default: matching the historical pattern adds
    // reward. literal_pattern_sign flips the sign.
    bool literal_pattern_sign = false;

    // M construction. ScheduledHorizon: latest end over records emitted so
    // far (0 before the first assignment); an episode's summed r_x then
    // telescopes to -makespan/rx_scale. ProjectedHorizon: current time plus
    // the longest remaining per-task chain.
    enum class Metric { ScheduledHorizon, ProjectedHorizon };
    Metric metric = Metric::ScheduledHorizon;

    double r_z(int mu_match, int mu_total) const {
        double v = alpha * (static_cast<double>(mu_match) - static_cast<double>(mu_total) / 2.0);
        return literal_pattern_sign ? -v : v;
    }

    void validate() const;  // throws ValidationError
    std::string to_json() const;
    // Missing keys keep their defaults; unknown keys are an error.
    static RewardConfig from_json(const std::string& text);
};

// The five mutually exclusive, exhaustive quality-reward cases for a lower
// decision. "Available" means the car is idle and the gate is open (the
// focal operation's equipment has a free station and the task is ready);
// when the gate is closed no car counts as available, so waiting earns +1
// exactly as when every car is busy.
enum class LowerCase {
    SelectAvailable = 1,   // +2  picked an available car
    WaitNoneAvailable = 2, // +1  waited with nothing available
    WaitAvailable = 3,     // -2  waited while a car was available
    SelectNoneAvailable = 4, // -2 picked a car with nothing available
    SelectBusy = 5,        // -2  picked a busy car while another was available
};

struct LowerVerdict {
    LowerCase kind;
    double r_q = 0.0;
    bool assign = false;  // true only for SelectAvailable
};

// action 0 waits; action d in [1, cars] selects car d-1.
LowerVerdict classify_lower(const std::vector<int>& car_flags, bool gate, int action);

struct LowerState {
    int op_equipment = 0;
    Slice op_duration = 0;
    int ops_done = 0;
    int ops_total = 0;
    bool task_ready = true;
    std::vector<int> equipment_free;  // free stations per category
    std::vector<int> workstations;    // capacity per category
    std::vector<int> car_flags;       // 1 idle, -1 busy

    bool gate() const { return task_ready && equipment_free[op_equipment] > 0; }
    int actions() const { return static_cast<int>(car_flags.size()) + 1; }
    std::vector<double> features() const;
    static int feature_size(int n_equipment, int n_cars);
};

struct LowerOutcome {
    double reward = 0.0;  // r_p + r_q
    double r_q = 0.0;
    double r_p = 0.0;
    LowerCase kind = LowerCase::WaitNoneAvailable;
    bool done = false;
};

// Standalone single-task MDP used to train the car-allocation layer. One
// focal task must be driven through its operations; background cars and
// stations toggle busy/idle under a seeded process. A successful assignment
// fast-forwards to the operation's end.
class LowerEnv {
public:
    LowerEnv(const ScenarioConfig& scenario, std::uint64_t seed, double task_reward = 10.0);
    const LowerState& state() const { return state_; }
    bool done() const { return done_; }
    LowerOutcome step(int action);  // throws Error on out-of-range action

private:
    void refresh_state();
    void pass_time(Slice dt);

    ScenarioConfig scenario_;
    Rng rng_;
    double task_reward_ = 10.0;
    int focal_task_ = 0;
    int ops_done_ = 0;
    std::vector<Slice> car_busy_;                 // remaining busy slices per car
    std::vector<std::vector<Slice>> station_busy_;  // per category per station
    LowerState state_;
    bool done_ = false;
    long long steps_ = 0;
    long long budget_ = 0;
};

struct LowerPolicy {
    virtual ~LowerPolicy() = default;
    virtual int act(const LowerState& s) = 0;
};

// Picks the lowest-indexed idle car when the gate is open, otherwise waits.
struct GreedyLowerPolicy : LowerPolicy {
    int act(const LowerState& s) override;
};

struct RandomLowerPolicy : LowerPolicy {
    explicit RandomLowerPolicy(std::uint64_t seed) : rng(seed) {}
    int act(const LowerState& s) override;
    Rng rng;
};

struct TaskRow {
    int next_equipment = -1;  // -1 once finished
    Slice next_duration = 0;
    int assigned = 0;
    int total = 0;
    bool running = false;
    Slice running_until = 0;
    bool finished = false;  // all operations assigned
};

struct UpperState {
    std::vector<TaskRow> tasks;
    std::vector<int> equipment_free;
    std::vector<int> workstations;
    std::vector<int> car_flags;
    std::vector<Slice> car_busy_until;
    int progress = 0;   // operations assigned so far
    int total_ops = 0;
    Slice now = 0;

    std::vector<double> features() const;
    static int feature_size(int n_tasks, int n_equipment, int n_cars);
};

struct UpperOutcome {
    double reward = 0.0;  // r_x + r_y
    double r_x = 0.0;
    double r_y = 0.0;
    double m_old = 0.0;
    double m_new = 0.0;
    bool done = false;
    bool assigned = false;
    int lower_action = -1;  // -1 when the lower layer was not consulted
    std::optional<LowerCase> lower_case;
};

// Hierarchical scheduling environment. The upper action chooses a task; the
// provided lower policy then chooses a car for that task's next operation.
// Only an explicit lower wait advances time (by one slice); selecting a
// finished task costs r_y and advances nothing. The episode ends when every
// operation has been assigned or the step budget (20 * total ops) runs out.
class UpperEnv {
public:
    UpperEnv(const ScenarioConfig& scenario, const RewardConfig& rewards, std::uint64_t seed);

    const UpperState& state() const { return state_; }
    const ScenarioConfig& scenario() const { return scenario_; }
    bool done() const { return done_; }
    bool complete() const { return state_.progress == state_.total_ops; }
    long long steps_taken() const { return steps_; }
    long long budget() const { return budget_; }
    Slice horizon() const { return horizon_; }

    LowerState derive_lower_state(int task) const;
    UpperOutcome step(int task, LowerPolicy& lower);  // throws Error on out-of-range task

    // The scheme produced by this episode. Requires complete().
    SchedulingScheme emit_scheme() const;

private:
    double metric() const;
    void advance_time(Slice dt);

    ScenarioConfig scenario_;
    RewardConfig rewards_;
    UpperState state_;
    std::vector<std::vector<Slice>> station_busy_until_;
    std::vector<SchemeRecord> records_;
    Slice horizon_ = 0;
    bool done_ = false;
    long long steps_ = 0;
    long long budget_ = 0;
};

}  // namespace vsched
