#include "vsched/agents.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "vsched/verify.hpp"

namespace vsched {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

double minutes_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count() / 60.0;
}

double parse_double_field(const std::string& field, int line) {
    double v = 0.0;
    auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size())
        throw ParseError(line, 1, "bad numeric field '" + field + "'");
    return v;
}

long long parse_ll_field(const std::string& field, int line) {
    long long v = 0;
    auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size())
        throw ParseError(line, 1, "bad integer field '" + field + "'");
    return v;
}

// Distinct per-purpose RNG streams derived from one seed.
Rng derived_rng(std::uint64_t seed, std::uint64_t purpose) {
    return Rng(splitmix64(seed ^ purpose));
}

constexpr std::uint64_t kStreamLowerEnv = 0x6c6f7745ULL;
constexpr std::uint64_t kStreamLowerNet = 0x6c6f774eULL;
constexpr std::uint64_t kStreamUpperNet = 0x75707045ULL;
constexpr std::uint64_t kStreamExplore = 0x78706c72ULL;

int sample_categorical(const std::vector<double>& probs, Rng& rng) {
    double r = rng.uniform01();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (r < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

void apply_clipped(nn::Net& net, const nn::Net& grads, double lr, double grad_clip) {
    double scale = 1.0;
    if (grad_clip > 0.0) {
        double norm = grads.grad_norm();
        if (norm > grad_clip) scale = grad_clip / norm;
    }
    net.axpy(-lr * scale, grads);
}

// Rescales a gradient accumulator in place so its global norm is at most
// `clip` (no-op when clip <= 0 or the norm is already within bounds).
void clip_to_norm(nn::Net& grads, double clip) {
    if (clip <= 0.0) return;
    const double norm = grads.grad_norm();
    if (norm <= clip) return;
    const double scale = clip / norm;
    for (double* p : grads.param_ptrs()) *p *= scale;
}

// Accumulates the mean-squared TD-regression gradient for a Q network into
// `grads` and returns the batch loss. Shared by the public single-step
// utility and the replay trainers.
double q_batch_grads(const nn::Net& net, const std::vector<Transition>& batch,
                     const std::vector<double>& targets, nn::Net& grads) {
    nn::Net::Cache cache;
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(batch.size());
    std::vector<double> dout(static_cast<std::size_t>(net.outputs()), 0.0);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Transition& t = batch[i];
        std::vector<double> q = net.forward_cached(t.s, cache);
        double err = q[static_cast<std::size_t>(t.a)] - targets[i];
        loss += err * err * inv;
        std::fill(dout.begin(), dout.end(), 0.0);
        dout[static_cast<std::size_t>(t.a)] = 2.0 * err * inv;
        net.backward(cache, dout, grads);
    }
    if (!std::isfinite(loss)) throw Error("non-finite loss (training diverged)");
    return loss;
}

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity) {
    if (capacity == 0) throw ValidationError("replay capacity must be positive");
    ring_.reserve(capacity);
    ring_.resize(capacity);
}

void ReplayBuffer::push(Transition t) {
    ring_[next_] = std::move(t);
    next_ += 1;
    if (next_ == ring_.size()) {
        next_ = 0;
        full_ = true;
    }
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, Rng& rng) const {
    if (n > size()) throw ValidationError("sample larger than replay buffer contents");
    std::vector<std::size_t> out;
    out.reserve(n);
    while (out.size() < n) {
        auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long long>(size()) - 1));
        if (std::find(out.begin(), out.end(), i) == out.end()) out.push_back(i);
    }
    return out;
}

Algorithm algorithm_from_name(const std::string& name) {
    if (name == "dqn") return Algorithm::Dqn;
    if (name == "ddqn") return Algorithm::Ddqn;
    if (name == "dueling") return Algorithm::Dueling;
    if (name == "ppo") return Algorithm::Ppo;
    throw ValidationError("unknown algorithm '" + name + "' (expected dqn, ddqn, dueling, or ppo)");
}

std::string algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::Dqn: return "dqn";
        case Algorithm::Ddqn: return "ddqn";
        case Algorithm::Dueling: return "dueling";
        case Algorithm::Ppo: return "ppo";
    }
    throw Error("unreachable algorithm value");
}

bool is_value_based(Algorithm a) { return a != Algorithm::Ppo; }

nn::Activation TrainConfig::resolved_activation() const {
    if (!activation.empty()) return nn::activation_from_name(activation);
    return algorithm == Algorithm::Ppo ? nn::Activation::Tanh : nn::Activation::Sigmoid;
}

void TrainConfig::validate() const {
    if (steps <= 0) throw ValidationError("steps must be positive");
    if (learning_rate <= 0.0) throw ValidationError("learning_rate must be positive");
    if (gamma <= 0.0 || gamma > 1.0) throw ValidationError("gamma must be in (0, 1]");
    if (eps_frac <= 0.0 || eps_frac > 1.0) throw ValidationError("eps_frac must be in (0, 1]");
    if (eps_start < 0.0 || eps_end < 0.0 || eps_start > 1.0 || eps_end > 1.0)
        throw ValidationError("epsilon bounds must lie in [0, 1]");
    if (replay_capacity == 0) throw ValidationError("replay_capacity must be positive");
    if (batch <= 0) throw ValidationError("batch must be positive");
    if (target_sync <= 0) throw ValidationError("target_sync must be positive");
    if (warmup < 0) throw ValidationError("warmup must be non-negative");
    if (hidden.empty()) throw ValidationError("at least one hidden layer is required");
    for (int h : hidden)
        if (h <= 0) throw ValidationError("hidden layer sizes must be positive");
    if (rollout <= 0 || ppo_epochs <= 0 || minibatch <= 0)
        throw ValidationError("rollout, ppo_epochs, and minibatch must be positive");
    if (clip <= 0.0 || clip >= 1.0) throw ValidationError("clip must be in (0, 1)");
    if (gae_lambda < 0.0 || gae_lambda > 1.0) throw ValidationError("gae_lambda must be in [0, 1]");
    if (ent_coef < 0.0 || vf_coef < 0.0) throw ValidationError("loss coefficients must be non-negative");
    if (grad_clip < 0.0) throw ValidationError("grad_clip must be non-negative");
    if (eval_every < 0) throw ValidationError("eval_every must be non-negative");
    if (!activation.empty()) nn::activation_from_name(activation);  // throws on bad name
}

std::string TrainConfig::to_json() const {
    json j;
    j["algorithm"] = algorithm_name(algorithm);
    j["steps"] = steps;
    j["learning_rate"] = learning_rate;
    j["gamma"] = gamma;
    j["eps_start"] = eps_start;
    j["eps_end"] = eps_end;
    j["eps_frac"] = eps_frac;
    j["replay_capacity"] = replay_capacity;
    j["batch"] = batch;
    j["target_sync"] = target_sync;
    j["warmup"] = warmup;
    j["hidden"] = hidden;
    j["activation"] = activation;
    j["seed"] = seed;
    j["rollout"] = rollout;
    j["ppo_epochs"] = ppo_epochs;
    j["minibatch"] = minibatch;
    j["clip"] = clip;
    j["gae_lambda"] = gae_lambda;
    j["ent_coef"] = ent_coef;
    j["vf_coef"] = vf_coef;
    j["grad_clip"] = grad_clip;
    j["eval_every"] = eval_every;
    j["early_stop_comt"] = early_stop_comt;
    return j.dump(2) + "\n";
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(1, 1, std::string("bad config JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    TrainConfig cfg;
    for (auto& [key, value] : j.items()) {
        try {
            if (key == "algorithm") cfg.algorithm = algorithm_from_name(value.get<std::string>());
            else if (key == "steps") cfg.steps = value.get<long long>();
            else if (key == "learning_rate") cfg.learning_rate = value.get<double>();
            else if (key == "gamma") cfg.gamma = value.get<double>();
            else if (key == "eps_start") cfg.eps_start = value.get<double>();
            else if (key == "eps_end") cfg.eps_end = value.get<double>();
            else if (key == "eps_frac") cfg.eps_frac = value.get<double>();
            else if (key == "replay_capacity") cfg.replay_capacity = value.get<std::size_t>();
            else if (key == "batch") cfg.batch = value.get<int>();
            else if (key == "target_sync") cfg.target_sync = value.get<long long>();
            else if (key == "warmup") cfg.warmup = value.get<long long>();
            else if (key == "hidden") cfg.hidden = value.get<std::vector<int>>();
            else if (key == "activation") cfg.activation = value.get<std::string>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "rollout") cfg.rollout = value.get<int>();
            else if (key == "ppo_epochs") cfg.ppo_epochs = value.get<int>();
            else if (key == "minibatch") cfg.minibatch = value.get<int>();
            else if (key == "clip") cfg.clip = value.get<double>();
            else if (key == "gae_lambda") cfg.gae_lambda = value.get<double>();
            else if (key == "ent_coef") cfg.ent_coef = value.get<double>();
            else if (key == "vf_coef") cfg.vf_coef = value.get<double>();
            else if (key == "grad_clip") cfg.grad_clip = value.get<double>();
            else if (key == "eval_every") cfg.eval_every = value.get<long long>();
            else if (key == "early_stop_comt") cfg.early_stop_comt = value.get<double>();
            else throw ValidationError("unknown config key '" + key + "'");
        } catch (const json::exception& e) {
            throw ValidationError("bad value for config key '" + key + "': " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

double epsilon_at(const TrainConfig& cfg, long long step) {
    auto horizon = static_cast<long long>(static_cast<double>(cfg.steps) * cfg.eps_frac);
    if (horizon < 1) horizon = 1;
    if (step >= horizon) return cfg.eps_end;
    if (step < 0) step = 0;
    double t = static_cast<double>(step) / static_cast<double>(horizon);
    return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * t;
}

std::vector<double> q_targets(const std::vector<Transition>& batch, const nn::Net& online,
                              const nn::Net& target, Algorithm alg, double gamma) {
    if (batch.empty()) throw ValidationError("q_targets needs a non-empty batch");
    std::vector<double> out;
    out.reserve(batch.size());
    for (const Transition& t : batch) {
        if (t.done) {
            out.push_back(t.r);
            continue;
        }
        std::vector<double> qt = target.forward(t.s2);
        double boot = 0.0;
        if (alg == Algorithm::Ddqn) {
            boot = qt[static_cast<std::size_t>(nn::argmax(online.forward(t.s2)))];
        } else {
            boot = *std::max_element(qt.begin(), qt.end());
        }
        out.push_back(t.r + gamma * boot);
    }
    return out;
}

double backprop_step(nn::Net& net, const std::vector<Transition>& batch,
                     const std::vector<double>& targets, double learning_rate, double grad_clip) {
    if (batch.empty() || batch.size() != targets.size())
        throw ValidationError("batch and targets must be non-empty and equally sized");
    nn::Net grads = net.zeros_like();
    double loss = q_batch_grads(net, batch, targets, grads);
    apply_clipped(net, grads, learning_rate, grad_clip);
    return loss;
}

std::string episode_csv_header() {
    return "episode,end_step,complete,verified,comt,cumr,rz,mu_match,mu_total,dect_total_ms,dect_mean_ms";
}

std::string episode_csv_row(const EpisodeRow& row) {
    std::ostringstream os;
    os << row.episode << ',' << row.end_step << ',' << (row.complete ? 1 : 0) << ','
       << (row.verified ? 1 : 0) << ',' << format_double(row.comt) << ','
       << format_double(row.cumr) << ',' << format_double(row.rz) << ',' << row.mu_match << ','
       << row.mu_total << ',' << format_double(row.dect_total_ms) << ','
       << format_double(row.dect_mean_ms);
    return os.str();
}

void write_episode_csv(const std::string& path, const std::vector<EpisodeRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << episode_csv_header() << '\n';
    for (const EpisodeRow& row : rows) out << episode_csv_row(row) << '\n';
    if (!out) throw Error("short write to " + path);
}

std::vector<EpisodeRow> read_episode_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(1, 1, "empty episode CSV");
    if (line == episode_csv_header() + "\r") line.pop_back();
    if (line != episode_csv_header())
        throw ParseError(1, 1, "unexpected episode CSV header '" + line + "'");
    std::vector<EpisodeRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        lineno += 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream fs(line);
        while (std::getline(fs, field, ',')) fields.push_back(field);
        if (fields.size() != 11)
            throw ParseError(lineno, 1, "expected 11 fields, found " + std::to_string(fields.size()));
        EpisodeRow row;
        row.episode = parse_ll_field(fields[0], lineno);
        row.end_step = parse_ll_field(fields[1], lineno);
        row.complete = parse_ll_field(fields[2], lineno) != 0;
        row.verified = parse_ll_field(fields[3], lineno) != 0;
        row.comt = parse_double_field(fields[4], lineno);
        row.cumr = parse_double_field(fields[5], lineno);
        row.rz = parse_double_field(fields[6], lineno);
        row.mu_match = static_cast<int>(parse_ll_field(fields[7], lineno));
        row.mu_total = static_cast<int>(parse_ll_field(fields[8], lineno));
        row.dect_total_ms = parse_double_field(fields[9], lineno);
        row.dect_mean_ms = parse_double_field(fields[10], lineno);
        rows.push_back(row);
    }
    return rows;
}

int NetLowerPolicy::act(const LowerState& s) { return nn::argmax(net.forward(s.features())); }

namespace {

// One rollout slot for the clipped-surrogate update.
struct RolloutStep {
    std::vector<double> s;
    int a = 0;
    double logp = 0.0;
    double value = 0.0;
    double reward = 0.0;
    bool done = false;
};

struct GaeResult {
    std::vector<double> advantage;
    std::vector<double> ret;
};

GaeResult compute_gae(const std::vector<RolloutStep>& steps, double bootstrap, double gamma,
                      double lambda) {
    GaeResult g;
    g.advantage.assign(steps.size(), 0.0);
    g.ret.assign(steps.size(), 0.0);
    double adv = 0.0;
    for (std::size_t i = steps.size(); i-- > 0;) {
        double next_value = (i + 1 < steps.size()) ? steps[i + 1].value : bootstrap;
        double not_done = steps[i].done ? 0.0 : 1.0;
        double delta = steps[i].reward + gamma * next_value * not_done - steps[i].value;
        adv = delta + gamma * lambda * not_done * adv;
        g.advantage[i] = adv;
        g.ret[i] = adv + steps[i].value;
    }
    return g;
}

void normalize_advantages(std::vector<double>& adv) {
    if (adv.empty()) return;
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= static_cast<double>(adv.size());
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    var /= static_cast<double>(adv.size());
    double sd = std::sqrt(var) + 1e-8;
    for (double& a : adv) a = (a - mean) / sd;
}

// One epoch-set of clipped-surrogate updates on a collected rollout. Returns
// the last minibatch's combined loss. Throws Error on a non-finite loss.
double ppo_update(nn::Net& policy, nn::Net& value, nn::Adam& popt, nn::Adam& vopt,
                  const std::vector<RolloutStep>& steps, const GaeResult& gae,
                  const TrainConfig& cfg, Rng& rng) {
    std::vector<std::size_t> order(steps.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    double last_loss = 0.0;
    nn::Net::Cache cache;
    for (int epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long long>(i) - 1));
            std::swap(order[i - 1], order[j]);
        }
        for (std::size_t begin = 0; begin < order.size();
             begin += static_cast<std::size_t>(cfg.minibatch)) {
            std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.minibatch));
            nn::Net pgrads = policy.zeros_like();
            nn::Net vgrads = value.zeros_like();
            double loss = 0.0;
            const double inv = 1.0 / static_cast<double>(end - begin);
            for (std::size_t k = begin; k < end; ++k) {
                const RolloutStep& st = steps[order[k]];
                double adv = gae.advantage[order[k]];
                double ret = gae.ret[order[k]];

                std::vector<double> logits = policy.forward_cached(st.s, cache);
                std::vector<double> logp = nn::log_softmax(logits);
                std::vector<double> probs = nn::softmax(logits);
                double ratio = std::exp(logp[static_cast<std::size_t>(st.a)] - st.logp);
                double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
                double surr = std::min(ratio * adv, clipped * adv);
                double entropy = 0.0;
                for (std::size_t j2 = 0; j2 < probs.size(); ++j2)
                    if (probs[j2] > 0.0) entropy -= probs[j2] * logp[j2];
                loss += (-surr - cfg.ent_coef * entropy) * inv;

                std::vector<double> dlogits(probs.size(), 0.0);
                bool flows = ratio * adv <= clipped * adv;
                for (std::size_t j2 = 0; j2 < probs.size(); ++j2) {
                    double indicator = (static_cast<int>(j2) == st.a) ? 1.0 : 0.0;
                    if (flows) dlogits[j2] += -adv * ratio * (indicator - probs[j2]) * inv;
                    if (probs[j2] > 0.0)
                        dlogits[j2] += cfg.ent_coef * probs[j2] * (logp[j2] + entropy) * inv;
                }
                policy.backward(cache, dlogits, pgrads);

                std::vector<double> v = value.forward_cached(st.s, cache);
                double verr = v[0] - ret;
                loss += cfg.vf_coef * verr * verr * inv;
                std::vector<double> dv{2.0 * cfg.vf_coef * verr * inv};
                value.backward(cache, dv, vgrads);
            }
            if (!std::isfinite(loss)) throw Error("non-finite loss (training diverged)");
            clip_to_norm(pgrads, cfg.grad_clip);
            clip_to_norm(vgrads, cfg.grad_clip);
            popt.step(policy, pgrads, cfg.learning_rate);
            vopt.step(value, vgrads, cfg.learning_rate);
            last_loss = loss;
        }
    }
    return last_loss;
}

}  // namespace

LowerTrainResult train_lower(const ScenarioConfig& scenario, const TrainConfig& cfg) {
    cfg.validate();
    scenario.validate();
    auto t0 = Clock::now();
    int n_equipment = static_cast<int>(scenario.equipment.size());
    int inputs = LowerState::feature_size(n_equipment, scenario.cars);
    int actions = scenario.cars + 1;
    // The car layer always trains with the policy-gradient learner, whatever
    // the task layer runs, so the default activation is tanh.
    nn::Activation act = cfg.activation.empty() ? nn::Activation::Tanh
                                                : nn::activation_from_name(cfg.activation);

    LowerTrainResult result;
    result.policy = nn::Net(nn::Net::Arch::Plain, inputs, cfg.hidden, actions, act,
                            splitmix64(cfg.seed ^ kStreamLowerNet));
    result.value = nn::Net(nn::Net::Arch::Plain, inputs, cfg.hidden, 1, act,
                           splitmix64(cfg.seed ^ kStreamLowerNet) + 1);

    Rng env_rng = derived_rng(cfg.seed, kStreamLowerEnv);
    Rng explore = derived_rng(cfg.seed, kStreamExplore);
    nn::Adam popt(result.policy);
    nn::Adam vopt(result.value);
    LowerEnv env(scenario, env_rng.next());

    long long step = 0;
    std::vector<RolloutStep> rollout;
    rollout.reserve(static_cast<std::size_t>(cfg.rollout));
    try {
        while (step < cfg.steps) {
            rollout.clear();
            while (static_cast<int>(rollout.size()) < cfg.rollout && step < cfg.steps) {
                RolloutStep st;
                st.s = env.state().features();
                std::vector<double> logits = result.policy.forward(st.s);
                std::vector<double> probs = nn::softmax(logits);
                st.a = sample_categorical(probs, explore);
                st.logp = nn::log_softmax(logits)[static_cast<std::size_t>(st.a)];
                st.value = result.value.forward(st.s)[0];
                LowerOutcome out = env.step(st.a);
                st.reward = out.reward;
                st.done = out.done;
                rollout.push_back(std::move(st));
                step += 1;
                if (out.done) {
                    result.episodes += 1;
                    env = LowerEnv(scenario, env_rng.next());
                }
            }
            double bootstrap = rollout.back().done
                                   ? 0.0
                                   : result.value.forward(env.state().features())[0];
            GaeResult gae = compute_gae(rollout, bootstrap, cfg.gamma, cfg.gae_lambda);
            normalize_advantages(gae.advantage);
            ppo_update(result.policy, result.value, popt, vopt, rollout, gae, cfg, explore);
        }
    } catch (const Error& e) {
        throw Error("lower training diverged at step " + std::to_string(step) + ": " + e.what());
    }

    result.mean_rq = evaluate_lower(result.policy, scenario, 20, splitmix64(cfg.seed) + 101);
    result.trat_min = minutes_since(t0);
    return result;
}

double evaluate_lower(const nn::Net& policy, const ScenarioConfig& scenario, int episodes,
                      std::uint64_t seed0) {
    double total_rq = 0.0;
    long long steps = 0;
    for (int e = 0; e < episodes; ++e) {
        LowerEnv env(scenario, seed0 + static_cast<std::uint64_t>(e));
        while (!env.done()) {
            int a = nn::argmax(policy.forward(env.state().features()));
            LowerOutcome out = env.step(a);
            total_rq += out.r_q;
            steps += 1;
        }
    }
    return steps == 0 ? 0.0 : total_rq / static_cast<double>(steps);
}

namespace {

// Shared bookkeeping for one task-layer episode.
struct EpisodeScratch {
    double cumr = 0.0;
    double rz = 0.0;
    int mu_match = 0;
    int mu_total = 0;
    bool verified = false;
    long long decisions = 0;
    double decision_ms = 0.0;
};

// Terminal-step pattern check. Returns the bonus to add to the terminal
// reward (0 unless the episode completed, verified, and a historical pattern
// was supplied). Increments the instrumentation counters.
double terminal_bonus(UpperEnv& env, const ScenarioConfig& scenario, const RewardConfig& rewards,
                      const PriorityPattern* historical, EpisodeScratch& ep,
                      long long& rz_episodes, long long& unverified_complete) {
    if (!env.complete()) return 0.0;
    VerificationReport report = check_scheme(env.emit_scheme(), scenario);
    if (!report.verified()) {
        unverified_complete += 1;
        return 0.0;
    }
    ep.verified = true;
    if (historical == nullptr) return 0.0;
    PriorityPattern own = extract_pattern(report, scenario);
    MatchResult m = match_patterns(own, *historical);
    ep.mu_match = m.mu_match;
    ep.mu_total = m.mu_total;
    ep.rz = rewards.r_z(m.mu_match, m.mu_total);
    rz_episodes += 1;
    return ep.rz;
}

EpisodeRow finish_episode(const UpperEnv& env, const EpisodeScratch& ep, long long episode,
                          long long end_step) {
    EpisodeRow row;
    row.episode = episode;
    row.end_step = end_step;
    row.complete = env.complete();
    row.verified = ep.verified;
    row.comt = env.complete() ? static_cast<double>(env.horizon()) : -1.0;
    row.cumr = ep.cumr;
    row.rz = ep.rz;
    row.mu_match = ep.mu_match;
    row.mu_total = ep.mu_total;
    row.dect_total_ms = ep.decision_ms;
    row.dect_mean_ms = ep.decisions == 0 ? 0.0 : ep.decision_ms / static_cast<double>(ep.decisions);
    return row;
}

// One greedy episode; used for early stopping inside training.
double greedy_comt(const ScenarioConfig& scenario, const RewardConfig& rewards,
                   const nn::Net& net, LowerPolicy& lower) {
    UpperEnv env(scenario, rewards, 0);
    while (!env.done()) {
        int a = nn::argmax(net.forward(env.state().features()));
        env.step(a, lower);
    }
    return env.complete() ? static_cast<double>(env.horizon()) : -1.0;
}

UpperTrainResult train_upper_value(const ScenarioConfig& scenario, const RewardConfig& rewards,
                                   LowerPolicy& lower, const PriorityPattern* historical,
                                   const TrainConfig& cfg, const Checkpoint* resume) {
    auto t0 = Clock::now();
    int n_tasks = static_cast<int>(scenario.tasks.size());
    int inputs = UpperState::feature_size(n_tasks, static_cast<int>(scenario.equipment.size()),
                                          scenario.cars);
    nn::Net::Arch arch =
        cfg.algorithm == Algorithm::Dueling ? nn::Net::Arch::Dueling : nn::Net::Arch::Plain;

    UpperTrainResult result;
    long long start_step = 0;
    if (resume != nullptr) {
        if (resume->kind != "upper") throw ValidationError("checkpoint kind is not 'upper'");
        result.online = resume->primary;
        result.secondary = resume->secondary;
        start_step = resume->step;
    } else {
        result.online = nn::Net(arch, inputs, cfg.hidden, n_tasks, cfg.resolved_activation(),
                                splitmix64(cfg.seed ^ kStreamUpperNet));
        result.secondary = result.online;
    }

    Rng explore = derived_rng(cfg.seed, kStreamExplore);
    // Optimizer moments are not part of the checkpoint format; a resumed run
    // restarts them from zero.
    nn::Adam opt(result.online);
    nn::Net grads = result.online.zeros_like();
    ReplayBuffer buffer(cfg.replay_capacity);
    UpperEnv env(scenario, rewards, cfg.seed);
    EpisodeScratch ep;
    long long episode = 0;

    for (long long step = start_step; step < cfg.steps; ++step) {
        std::vector<double> feat = env.state().features();
        int action;
        if (explore.uniform01() < epsilon_at(cfg, step)) {
            action = static_cast<int>(explore.uniform_int(0, n_tasks - 1));
        } else {
            action = nn::argmax(result.online.forward(feat));
        }
        UpperOutcome out = env.step(action, lower);
        ep.cumr += out.reward;
        ep.decisions += 1;

        double r = out.reward;
        if (out.done)
            r += terminal_bonus(env, scenario, rewards, historical, ep, result.rz_episodes,
                                result.unverified_complete);

        Transition tr;
        tr.s = std::move(feat);
        tr.s2 = env.state().features();
        tr.a = action;
        tr.r = r;
        tr.done = out.done;
        buffer.push(std::move(tr));

        if (out.done) {
            result.episodes.push_back(finish_episode(env, ep, episode, step + 1));
            episode += 1;
            ep = EpisodeScratch{};
            env = UpperEnv(scenario, rewards, cfg.seed + static_cast<std::uint64_t>(episode));
        }

        if (step + 1 >= cfg.warmup && buffer.size() >= static_cast<std::size_t>(cfg.batch)) {
            std::vector<std::size_t> idx =
                buffer.sample_indices(static_cast<std::size_t>(cfg.batch), explore);
            std::vector<Transition> batch;
            batch.reserve(idx.size());
            for (std::size_t i : idx) batch.push_back(buffer.at(i));
            std::vector<double> targets =
                q_targets(batch, result.online, result.secondary, cfg.algorithm, cfg.gamma);
            try {
                grads.zero();
                q_batch_grads(result.online, batch, targets, grads);
                clip_to_norm(grads, cfg.grad_clip);
                opt.step(result.online, grads, cfg.learning_rate);
            } catch (const Error& e) {
                throw Error("training diverged at step " + std::to_string(step) + ": " + e.what());
            }
            if ((step + 1) % cfg.target_sync == 0) result.secondary = result.online;
        }

        result.steps = step + 1;
        if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0) {
            double comt = greedy_comt(scenario, rewards, result.online, lower);
            if (comt >= 0.0 && comt <= cfg.early_stop_comt) {
                result.early_stopped = true;
                break;
            }
        }
    }

    result.trat_min = minutes_since(t0);
    return result;
}

UpperTrainResult train_upper_ppo(const ScenarioConfig& scenario, const RewardConfig& rewards,
                                 LowerPolicy& lower, const PriorityPattern* historical,
                                 const TrainConfig& cfg, const Checkpoint* resume) {
    auto t0 = Clock::now();
    int n_tasks = static_cast<int>(scenario.tasks.size());
    int inputs = UpperState::feature_size(n_tasks, static_cast<int>(scenario.equipment.size()),
                                          scenario.cars);

    UpperTrainResult result;
    long long start_step = 0;
    if (resume != nullptr) {
        if (resume->kind != "upper") throw ValidationError("checkpoint kind is not 'upper'");
        result.online = resume->primary;
        result.secondary = resume->secondary;
        start_step = resume->step;
    } else {
        result.online = nn::Net(nn::Net::Arch::Plain, inputs, cfg.hidden, n_tasks,
                                cfg.resolved_activation(), splitmix64(cfg.seed ^ kStreamUpperNet));
        result.secondary = nn::Net(nn::Net::Arch::Plain, inputs, cfg.hidden, 1,
                                   cfg.resolved_activation(),
                                   splitmix64(cfg.seed ^ kStreamUpperNet) + 1);
    }

    Rng explore = derived_rng(cfg.seed, kStreamExplore);
    // Optimizer moments are not part of the checkpoint format; a resumed run
    // restarts them from zero.
    nn::Adam popt(result.online);
    nn::Adam vopt(result.secondary);
    UpperEnv env(scenario, rewards, cfg.seed);
    EpisodeScratch ep;
    long long episode = 0;
    long long step = start_step;

    std::vector<RolloutStep> rollout;
    rollout.reserve(static_cast<std::size_t>(cfg.rollout));
    bool stop = false;
    while (step < cfg.steps && !stop) {
        rollout.clear();
        while (static_cast<int>(rollout.size()) < cfg.rollout && step < cfg.steps) {
            RolloutStep st;
            st.s = env.state().features();
            std::vector<double> logits = result.online.forward(st.s);
            st.a = sample_categorical(nn::softmax(logits), explore);
            st.logp = nn::log_softmax(logits)[static_cast<std::size_t>(st.a)];
            st.value = result.secondary.forward(st.s)[0];
            UpperOutcome out = env.step(st.a, lower);
            ep.cumr += out.reward;
            ep.decisions += 1;
            st.reward = out.reward;
            st.done = out.done;
            if (out.done)
                st.reward += terminal_bonus(env, scenario, rewards, historical, ep,
                                            result.rz_episodes, result.unverified_complete);
            rollout.push_back(std::move(st));
            step += 1;
            if (out.done) {
                result.episodes.push_back(finish_episode(env, ep, episode, step));
                episode += 1;
                ep = EpisodeScratch{};
                env = UpperEnv(scenario, rewards, cfg.seed + static_cast<std::uint64_t>(episode));
            }
            result.steps = step;
            if (cfg.eval_every > 0 && step % cfg.eval_every == 0) {
                double comt = greedy_comt(scenario, rewards, result.online, lower);
                if (comt >= 0.0 && comt <= cfg.early_stop_comt) {
                    result.early_stopped = true;
                    stop = true;
                    break;
                }
            }
        }
        if (rollout.empty() || stop) break;  // the early-stopped net skips the final update
        double bootstrap =
            rollout.back().done ? 0.0 : result.secondary.forward(env.state().features())[0];
        GaeResult gae = compute_gae(rollout, bootstrap, cfg.gamma, cfg.gae_lambda);
        normalize_advantages(gae.advantage);
        try {
            ppo_update(result.online, result.secondary, popt, vopt, rollout, gae, cfg, explore);
        } catch (const Error& e) {
            throw Error("training diverged at step " + std::to_string(step) + ": " + e.what());
        }
    }

    result.trat_min = minutes_since(t0);
    return result;
}

}  // namespace

UpperTrainResult train_upper(const ScenarioConfig& scenario, const RewardConfig& rewards,
                             LowerPolicy& lower, const PriorityPattern* historical,
                             const TrainConfig& cfg, const Checkpoint* resume) {
    cfg.validate();
    scenario.validate();
    if (is_value_based(cfg.algorithm))
        return train_upper_value(scenario, rewards, lower, historical, cfg, resume);
    return train_upper_ppo(scenario, rewards, lower, historical, cfg, resume);
}

EvalResult evaluate_upper(const ScenarioConfig& scenario, const RewardConfig& rewards,
                          const nn::Net& upper, LowerPolicy& lower, int episodes,
                          const PriorityPattern* historical) {
    EvalResult result;
    double comt_sum = 0.0;
    double cumr_sum = 0.0;
    long long decisions = 0;
    for (int e = 0; e < episodes; ++e) {
        UpperEnv env(scenario, rewards, static_cast<std::uint64_t>(e));
        EpisodeScratch ep;
        while (!env.done()) {
            auto d0 = Clock::now();
            int a = nn::argmax(upper.forward(env.state().features()));
            ep.decision_ms +=
                std::chrono::duration<double, std::milli>(Clock::now() - d0).count();
            ep.decisions += 1;
            UpperOutcome out = env.step(a, lower);
            ep.cumr += out.reward;
        }
        long long rz_episodes = 0;
        long long unverified = 0;
        double bonus = terminal_bonus(env, scenario, rewards, historical, ep, rz_episodes, unverified);
        (void)bonus;
        EpisodeRow row = finish_episode(env, ep, e, env.steps_taken());
        result.episodes.push_back(row);
        result.dect_total_ms += ep.decision_ms;
        decisions += ep.decisions;
        if (row.complete) {
            result.completed += 1;
            comt_sum += row.comt;
            cumr_sum += row.cumr;
        }
        if (row.verified) result.verified += 1;
    }
    if (result.completed > 0) {
        result.mean_comt = comt_sum / result.completed;
        result.mean_cumr = cumr_sum / result.completed;
    }
    if (decisions > 0) result.dect_mean_ms = result.dect_total_ms / static_cast<double>(decisions);
    return result;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    json j;
    j["format"] = 1;
    j["kind"] = ckpt.kind;
    j["step"] = ckpt.step;
    j["config"] = json::parse(ckpt.config.to_json());
    j["primary"] = json::parse(ckpt.primary.to_json());
    j["secondary"] = json::parse(ckpt.secondary.to_json());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw Error("short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    json j;
    try {
        j = json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw ParseError(1, 1, std::string("bad checkpoint JSON: ") + e.what());
    }
    if (!j.is_object() || j.value("format", 0) != 1)
        throw ValidationError("unsupported checkpoint format");
    Checkpoint ckpt;
    ckpt.kind = j.at("kind").get<std::string>();
    ckpt.step = j.at("step").get<long long>();
    ckpt.config = TrainConfig::from_json(j.at("config").dump());
    ckpt.primary = nn::Net::from_json(j.at("primary").dump());
    ckpt.secondary = nn::Net::from_json(j.at("secondary").dump());
    return ckpt;
}

}  // namespace vsched
