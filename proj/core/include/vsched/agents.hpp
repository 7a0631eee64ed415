#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vsched/env.hpp"
#include "vsched/nn.hpp"
#include "vsched/pattern.hpp"

namespace vsched {

struct Transition {
    std::vector<double> s;
    std::vector<double> s2;
    int a = 0;
    double r = 0.0;
    bool done = false;
};

// Fixed-capacity ring of transitions with uniform without-replacement
// sampling inside one batch.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const { return full_ ? ring_.size() : next_; }
    std::size_t capacity() const { return ring_.size(); }
    const Transition& at(std::size_t i) const { return ring_[i]; }

    // n distinct indices into the buffer. Requires n <= size().
    std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;

private:
    std::vector<Transition> ring_;
    std::size_t next_ = 0;
    bool full_ = false;
};

enum class Algorithm { Dqn, Ddqn, Dueling, Ppo };

Algorithm algorithm_from_name(const std::string& name);  // throws ValidationError
std::string algorithm_name(Algorithm a);
bool is_value_based(Algorithm a);

struct TrainConfig {
    Algorithm algorithm = Algorithm::Dqn;
    long long steps = 40000;
    double learning_rate = 2e-4;
    double gamma = 0.99;

    // Exploration: epsilon decays linearly eps_start -> eps_end over the
    // first eps_frac of the step budget, then stays at eps_end.
    double eps_start = 1.0;
    double eps_end = 0.05;
    double eps_frac = 0.3;

    std::size_t replay_capacity = 20000;
    int batch = 64;
    long long target_sync = 500;  // steps between target-network refreshes
    long long warmup = 1000;      // steps before learning starts

    std::vector<int> hidden = {64, 64};
    // Activation by name ("sigmoid", "tanh", "relu"); empty picks tanh for
    // the policy-gradient learner and sigmoid for the value-based ones.
    std::string activation;
    std::uint64_t seed = 1;

    // Policy-gradient settings.
    int rollout = 512;
    int ppo_epochs = 4;
    int minibatch = 128;
    double clip = 0.2;
    double gae_lambda = 0.95;
    double ent_coef = 0.01;
    double vf_coef = 0.5;
    double grad_clip = 10.0;

    // When > 0: every eval_every steps run one greedy episode and stop early
    // once it completes with makespan <= early_stop_comt.
    long long eval_every = 0;
    double early_stop_comt = 0.0;

    nn::Activation resolved_activation() const;
    void validate() const;  // throws ValidationError
    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
};

double epsilon_at(const TrainConfig& cfg, long long step);

// Bootstrap targets for the taken actions, one per transition. Terminal
// transitions contribute y = r. Dqn and Dueling: y = r + gamma * max_a
// Q_target(s2, a); Ddqn evaluates the online argmax under the target net.
std::vector<double> q_targets(const std::vector<Transition>& batch, const nn::Net& online,
                              const nn::Net& target, Algorithm alg, double gamma);

// One mean-squared-error SGD step fitting Q(s, a) to the targets. Returns the
// batch loss; throws Error when the loss is not finite (divergence).
double backprop_step(nn::Net& net, const std::vector<Transition>& batch,
                     const std::vector<double>& targets, double learning_rate,
                     double grad_clip = 0.0);

// One training- or evaluation-episode summary. cumr sums the environment
// reward (makespan delta plus selection penalties) only; the pattern bonus is
// reported separately in rz so the cumulative-reward/makespan correspondence
// stays visible in the output.
struct EpisodeRow {
    long long episode = 0;
    long long end_step = 0;  // cumulative env steps when the episode ended
    bool complete = false;
    bool verified = false;
    double comt = -1.0;  // makespan in slices; -1 marks did-not-finish
    double cumr = 0.0;
    double rz = 0.0;
    int mu_match = 0;
    int mu_total = 0;
    double dect_total_ms = 0.0;  // summed policy-inference wall time
    double dect_mean_ms = 0.0;   // per decision
};

std::string episode_csv_header();
std::string episode_csv_row(const EpisodeRow& row);
void write_episode_csv(const std::string& path, const std::vector<EpisodeRow>& rows);
std::vector<EpisodeRow> read_episode_csv(const std::string& path);  // throws ParseError

// Greedy wrapper over a trained car-selection network.
struct NetLowerPolicy : LowerPolicy {
    explicit NetLowerPolicy(nn::Net net) : net(std::move(net)) {}
    int act(const LowerState& s) override;
    nn::Net net;
};

struct LowerTrainResult {
    nn::Net policy;  // logits over wait + each car
    nn::Net value;
    long long episodes = 0;
    double mean_rq = 0.0;  // greedy evaluation, mean selection reward per step
    double trat_min = 0.0;
};

// Trains the car-selection layer with the clipped-surrogate policy-gradient
// learner; the result is frozen before the task layer trains on top of it.
LowerTrainResult train_lower(const ScenarioConfig& scenario, const TrainConfig& cfg);

// Mean selection reward per step of the greedy policy over fresh seeded
// episodes (seed0, seed0+1, ...).
double evaluate_lower(const nn::Net& policy, const ScenarioConfig& scenario, int episodes,
                      std::uint64_t seed0);

struct UpperTrainResult {
    nn::Net online;     // value net, or policy net for the policy-gradient learner
    nn::Net secondary;  // target net / value net
    std::vector<EpisodeRow> episodes;
    long long steps = 0;
    // Completed episodes whose scheme verified and received the pattern bonus.
    long long rz_episodes = 0;
    // Completed episodes whose scheme failed verification: the bonus is
    // skipped and this counter increments. It must stay 0 in a correct build.
    long long unverified_complete = 0;
    double trat_min = 0.0;
    bool early_stopped = false;
};

struct Checkpoint {
    std::string kind;  // "upper" or "lower"
    TrainConfig config;
    long long step = 0;
    nn::Net primary;
    nn::Net secondary;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);  // throws Error / ParseError

// Task-layer training. Each decision picks a task, derives the car-layer
// state, queries the frozen lower policy, and steps the environment; the
// reward is the makespan delta plus selection penalty. When an episode
// completes, its scheme is compiled and executed by the verifier; only when
// the verdict is Verified and `historical` is non-null does the terminal
// transition additionally earn the pattern bonus
// alpha * (mu_match - mu_total / 2). Pass historical = nullptr for the
// unguided baseline. Throws Error on divergence (step index in the message).
UpperTrainResult train_upper(const ScenarioConfig& scenario, const RewardConfig& rewards,
                             LowerPolicy& lower, const PriorityPattern* historical,
                             const TrainConfig& cfg, const Checkpoint* resume = nullptr);

struct EvalResult {
    std::vector<EpisodeRow> episodes;
    double mean_comt = -1.0;  // over completed episodes; -1 when none completed
    double mean_cumr = 0.0;   // over completed episodes
    double dect_total_ms = 0.0;
    double dect_mean_ms = 0.0;
    int completed = 0;
    int verified = 0;
};

// Greedy rollouts of a trained task net (argmax over the net output; the
// dueling head and plain logits both rank actions). Every completed episode's
// scheme goes through the verifier; mu fields are filled when a historical
// pattern is supplied.
EvalResult evaluate_upper(const ScenarioConfig& scenario, const RewardConfig& rewards,
                          const nn::Net& upper, LowerPolicy& lower, int episodes,
                          const PriorityPattern* historical = nullptr);

}  // namespace vsched
