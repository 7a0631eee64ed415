#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "doctest.h"
#include "vsched/agents.hpp"
#include "vsched/verify.hpp"

using namespace vsched;

namespace {

// Two-state deterministic MDP used as a value-iteration oracle target.
// State 0: action 0 -> reward 1, state 1; action 1 -> reward 0, stay.
// State 1: either action -> reward 2, terminal.
std::vector<Transition> mdp_transitions() {
    std::vector<double> s0{1.0, 0.0};
    std::vector<double> s1{0.0, 1.0};
    return {
        {s0, s1, 0, 1.0, false},
        {s0, s0, 1, 0.0, false},
        {s1, s1, 0, 2.0, true},
        {s1, s1, 1, 2.0, true},
    };
}

// Exact Q values for the MDP above by tabular value iteration.
std::vector<std::vector<double>> mdp_q_star(double gamma) {
    std::vector<std::vector<double>> q(2, std::vector<double>(2, 0.0));
    for (int iter = 0; iter < 10000; ++iter) {
        auto prev = q;
        q[0][0] = 1.0 + gamma * std::max(prev[1][0], prev[1][1]);
        q[0][1] = 0.0 + gamma * std::max(prev[0][0], prev[0][1]);
        q[1][0] = 2.0;
        q[1][1] = 2.0;
    }
    return q;
}

ScenarioConfig tiny_scenario() {
    ScenarioConfig sc;
    sc.tasks = {Task{{{0, 3}, {1, 2}}}, Task{{{0, 2}, {1, 4}}}};
    sc.equipment = {Equipment{2}, Equipment{1}};
    sc.cars = 2;
    sc.seed = 7;
    return sc;
}

std::string temp_path(const std::string& name) {
    return "/tmp/vsched_test_" + name;
}

}  // namespace

TEST_CASE("replay buffer is a ring with distinct-sample batches") {
    ReplayBuffer buf(4);
    CHECK(buf.capacity() == 4);
    CHECK(buf.size() == 0);
    for (int i = 0; i < 6; ++i) {
        Transition t;
        t.a = i;
        buf.push(t);
        CHECK(buf.size() == static_cast<std::size_t>(std::min(i + 1, 4)));
    }
    // After 6 pushes into capacity 4, entries 4 and 5 overwrote 0 and 1.
    std::set<int> held;
    for (std::size_t i = 0; i < buf.size(); ++i) held.insert(buf.at(i).a);
    CHECK(held == std::set<int>{2, 3, 4, 5});

    Rng rng(3);
    auto idx = buf.sample_indices(4, rng);
    CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == 4);
    CHECK_THROWS_AS(buf.sample_indices(5, rng), ValidationError);
    CHECK_THROWS_AS(ReplayBuffer(0), ValidationError);
}

TEST_CASE("algorithm names round trip") {
    for (Algorithm a : {Algorithm::Dqn, Algorithm::Ddqn, Algorithm::Dueling, Algorithm::Ppo})
        CHECK(algorithm_from_name(algorithm_name(a)) == a);
    CHECK_THROWS_AS(algorithm_from_name("sarsa"), ValidationError);
    CHECK(is_value_based(Algorithm::Dqn));
    CHECK(!is_value_based(Algorithm::Ppo));
}

TEST_CASE("train config round trips through JSON and validates") {
    TrainConfig cfg;
    cfg.algorithm = Algorithm::Dueling;
    cfg.steps = 1234;
    cfg.learning_rate = 3e-4;
    cfg.hidden = {32, 16};
    cfg.activation = "relu";
    cfg.seed = 99;
    cfg.eval_every = 500;
    cfg.early_stop_comt = 12.5;
    TrainConfig back = TrainConfig::from_json(cfg.to_json());
    CHECK(back.algorithm == Algorithm::Dueling);
    CHECK(back.steps == 1234);
    CHECK(back.learning_rate == 3e-4);
    CHECK(back.hidden == std::vector<int>{32, 16});
    CHECK(back.activation == "relu");
    CHECK(back.seed == 99);
    CHECK(back.eval_every == 500);
    CHECK(back.early_stop_comt == 12.5);

    CHECK_THROWS_AS(TrainConfig::from_json("{\"no_such_key\": 1}"), ValidationError);
    CHECK_THROWS_AS(TrainConfig::from_json("{\"learning_rate\": 0}"), ValidationError);
    CHECK_THROWS_AS(TrainConfig::from_json("{\"gamma\": 1.5}"), ValidationError);
    CHECK_THROWS_AS(TrainConfig::from_json("{\"algorithm\": \"sarsa\"}"), ValidationError);
    CHECK_THROWS_AS(TrainConfig::from_json("not json"), ParseError);

    // Default activation: tanh for the policy-gradient learner, sigmoid for
    // the value-based ones, explicit name wins.
    TrainConfig d;
    d.algorithm = Algorithm::Ppo;
    CHECK(d.resolved_activation() == nn::Activation::Tanh);
    d.algorithm = Algorithm::Dqn;
    CHECK(d.resolved_activation() == nn::Activation::Sigmoid);
    d.activation = "relu";
    CHECK(d.resolved_activation() == nn::Activation::Relu);
}

TEST_CASE("epsilon decays linearly over the first fraction of steps") {
    TrainConfig cfg;
    cfg.steps = 1000;
    cfg.eps_start = 1.0;
    cfg.eps_end = 0.05;
    cfg.eps_frac = 0.3;
    CHECK(epsilon_at(cfg, 0) == doctest::Approx(1.0));
    CHECK(epsilon_at(cfg, 150) == doctest::Approx(0.525));  // halfway through the decay
    CHECK(epsilon_at(cfg, 300) == doctest::Approx(0.05));
    CHECK(epsilon_at(cfg, 999) == doctest::Approx(0.05));
}

TEST_CASE("q targets: terminal transitions and zero discount collapse to the reward") {
    nn::Net online(nn::Net::Arch::Plain, 2, {8}, 2, nn::Activation::Tanh, 1);
    nn::Net target(nn::Net::Arch::Plain, 2, {8}, 2, nn::Activation::Tanh, 2);
    auto batch = mdp_transitions();

    for (Algorithm alg : {Algorithm::Dqn, Algorithm::Ddqn, Algorithm::Dueling}) {
        auto y = q_targets(batch, online, target, alg, 0.9);
        CHECK(y[2] == doctest::Approx(2.0));  // done: y = r
        CHECK(y[3] == doctest::Approx(2.0));

        auto y0 = q_targets(batch, online, target, alg, 0.0);
        for (std::size_t i = 0; i < batch.size(); ++i) CHECK(y0[i] == doctest::Approx(batch[i].r));
    }
    CHECK_THROWS_AS(q_targets({}, online, target, Algorithm::Dqn, 0.9), ValidationError);
}

TEST_CASE("double estimation takes the online argmax but the target value") {
    // Rig two nets that disagree about the best action in state s2.
    nn::Net online(nn::Net::Arch::Plain, 2, {8}, 2, nn::Activation::Tanh, 11);
    nn::Net target(nn::Net::Arch::Plain, 2, {8}, 2, nn::Activation::Tanh, 12);
    Transition t;
    t.s = {1.0, 0.0};
    t.s2 = {0.3, -0.8};
    t.a = 0;
    t.r = 0.5;
    t.done = false;

    auto qt = target.forward(t.s2);
    int online_best = nn::argmax(online.forward(t.s2));
    double expect_dqn = t.r + 0.9 * *std::max_element(qt.begin(), qt.end());
    double expect_ddqn = t.r + 0.9 * qt[static_cast<std::size_t>(online_best)];

    CHECK(q_targets({t}, online, target, Algorithm::Dqn, 0.9)[0] == doctest::Approx(expect_dqn));
    CHECK(q_targets({t}, online, target, Algorithm::Ddqn, 0.9)[0] == doctest::Approx(expect_ddqn));
}

TEST_CASE("fitted iteration converges to the tabular fixed point") {
    const double gamma = 0.9;
    auto q_star = mdp_q_star(gamma);
    auto batch = mdp_transitions();

    for (Algorithm alg : {Algorithm::Dqn, Algorithm::Ddqn, Algorithm::Dueling}) {
        CAPTURE(algorithm_name(alg));
        nn::Net::Arch arch =
            alg == Algorithm::Dueling ? nn::Net::Arch::Dueling : nn::Net::Arch::Plain;
        nn::Net net(arch, 2, {32}, 2, nn::Activation::Tanh, 5);
        nn::Net target = net;
        for (int outer = 0; outer < 120; ++outer) {
            auto y = q_targets(batch, net, target, alg, gamma);
            for (int inner = 0; inner < 200; ++inner) backprop_step(net, batch, y, 0.05);
            target = net;
        }
        auto q0 = net.forward({1.0, 0.0});
        auto q1 = net.forward({0.0, 1.0});
        CHECK(std::fabs(q0[0] - q_star[0][0]) < 0.05);
        CHECK(std::fabs(q0[1] - q_star[0][1]) < 0.05);
        CHECK(std::fabs(q1[0] - q_star[1][0]) < 0.05);
        CHECK(std::fabs(q1[1] - q_star[1][1]) < 0.05);
        // The greedy policy in state 0 is action 0 (collect +1 then +2).
        CHECK(nn::argmax(q0) == 0);
    }
}

TEST_CASE("backprop step: zero-error batch leaves the net unchanged") {
    nn::Net net(nn::Net::Arch::Plain, 2, {8}, 2, nn::Activation::Sigmoid, 3);
    nn::Net before = net;
    auto batch = mdp_transitions();
    std::vector<double> y;
    for (const Transition& t : batch) y.push_back(net.forward(t.s)[static_cast<std::size_t>(t.a)]);
    double loss = backprop_step(net, batch, y, 0.1);
    CHECK(loss == doctest::Approx(0.0));
    CHECK(net == before);
}

TEST_CASE("backprop step: repeated batch drives the loss down") {
    nn::Net net(nn::Net::Arch::Plain, 2, {16}, 2, nn::Activation::Tanh, 9);
    auto batch = mdp_transitions();
    std::vector<double> y{0.3, -0.2, 1.0, 0.4};
    std::vector<double> losses;
    for (int i = 0; i < 100; ++i) losses.push_back(backprop_step(net, batch, y, 0.05));
    for (std::size_t i = 10; i + 1 < losses.size(); ++i) CHECK(losses[i + 1] <= losses[i] + 1e-12);
    CHECK(losses.back() < losses.front());

    // A wildly wrong target overflows the squared error and must be reported
    // as divergence, not silently applied.
    std::vector<double> huge(batch.size(), 1e200);
    CHECK_THROWS_AS(backprop_step(net, batch, huge, 0.05), Error);
}

TEST_CASE("episode CSV round trips exactly") {
    std::vector<EpisodeRow> rows(3);
    rows[0] = {0, 120, true, true, 64.0, -0.0128, 0.0125, 30, 60, 1.5, 0.0125};
    rows[1] = {1, 260, false, false, -1.0, -3.75, 0.0, 0, 0, 0.0, 0.0};
    rows[2] = {2, 300, true, true, 57.0, -0.0114, -0.003, 12, 60, 2.25, 0.05625};
    std::string path = temp_path("episodes.csv");
    write_episode_csv(path, rows);
    auto back = read_episode_csv(path);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].episode == rows[i].episode);
        CHECK(back[i].end_step == rows[i].end_step);
        CHECK(back[i].complete == rows[i].complete);
        CHECK(back[i].verified == rows[i].verified);
        CHECK(back[i].comt == rows[i].comt);
        CHECK(back[i].cumr == rows[i].cumr);
        CHECK(back[i].rz == rows[i].rz);
        CHECK(back[i].mu_match == rows[i].mu_match);
        CHECK(back[i].mu_total == rows[i].mu_total);
        CHECK(back[i].dect_total_ms == rows[i].dect_total_ms);
        CHECK(back[i].dect_mean_ms == rows[i].dect_mean_ms);
    }
    std::remove(path.c_str());

    std::string bad = temp_path("episodes_bad.csv");
    {
        std::ofstream out(bad);
        out << "nope\n";
    }
    CHECK_THROWS_AS(read_episode_csv(bad), ParseError);
    std::remove(bad.c_str());
}

TEST_CASE("car-layer training learns the select-when-available rule on one car") {
    ScenarioConfig sc = tiny_scenario();
    sc.cars = 1;

    TrainConfig cfg;
    cfg.algorithm = Algorithm::Ppo;
    cfg.steps = 12000;
    cfg.learning_rate = 1e-3;
    cfg.hidden = {32, 32};
    cfg.seed = 4;
    LowerTrainResult r = train_lower(sc, cfg);

    // Determinism: an identical run reproduces the weights bit for bit.
    LowerTrainResult r2 = train_lower(sc, cfg);
    CHECK(r.policy == r2.policy);
    CHECK(r.value == r2.value);
    CHECK(r.episodes == r2.episodes);

    // Greedy evaluation prefers the rewarded cases, so the per-step average
    // selection reward stays non-negative on held-out seeds.
    CHECK(r.mean_rq >= 0.0);

    // Compare each greedy decision to the optimal selection rule: take the
    // car exactly when it is idle and the operation can start.
    int agree = 0, total = 0;
    for (int e = 0; e < 10; ++e) {
        LowerEnv env(sc, 900 + static_cast<std::uint64_t>(e));
        while (!env.done()) {
            const LowerState& s = env.state();
            int best = (s.gate() && s.car_flags[0] == 1) ? 1 : 0;
            int got = nn::argmax(r.policy.forward(s.features()));
            agree += (best == got);
            total += 1;
            env.step(got);
        }
    }
    CHECK(total > 50);
    CHECK(static_cast<double>(agree) / total >= 0.95);

    // A random policy scores a lower mean selection reward than the trained
    // one on the same evaluation episodes.
    double random_rq = 0.0;
    long long random_steps = 0;
    RandomLowerPolicy rnd(77);
    for (int e = 0; e < 10; ++e) {
        LowerEnv env(sc, 900 + static_cast<std::uint64_t>(e));
        while (!env.done()) {
            LowerOutcome out = env.step(rnd.act(env.state()));
            random_rq += out.r_q;
            random_steps += 1;
        }
    }
    double trained_rq = evaluate_lower(r.policy, sc, 10, 900);
    CHECK(trained_rq > random_rq / static_cast<double>(random_steps));
}

TEST_CASE("task-layer training is deterministic and gates the pattern bonus on verification") {
    ScenarioConfig sc = tiny_scenario();
    GreedyLowerPolicy lower;

    // A reference pattern from a hand-driven completed episode.
    RewardConfig rewards;
    UpperEnv ref(sc, rewards, 0);
    int t = 0;
    while (!ref.done()) {
        ref.step(t % 2, lower);
        t += 1;
    }
    REQUIRE(ref.complete());
    VerificationReport ref_report = check_scheme(ref.emit_scheme(), sc);
    REQUIRE(ref_report.verified());
    PriorityPattern pattern = extract_pattern(ref_report, sc);
    REQUIRE(!pattern.relations.empty());

    TrainConfig cfg;
    cfg.algorithm = Algorithm::Dqn;
    cfg.steps = 1500;
    cfg.warmup = 100;
    cfg.hidden = {16, 16};
    cfg.replay_capacity = 2000;
    cfg.seed = 21;

    UpperTrainResult guided = train_upper(sc, rewards, lower, &pattern, cfg);
    UpperTrainResult guided2 = train_upper(sc, rewards, lower, &pattern, cfg);
    CHECK(guided.online == guided2.online);
    REQUIRE(guided.episodes.size() == guided2.episodes.size());
    for (std::size_t i = 0; i < guided.episodes.size(); ++i) {
        CHECK(guided.episodes[i].comt == guided2.episodes[i].comt);
        CHECK(guided.episodes[i].cumr == guided2.episodes[i].cumr);
        CHECK(guided.episodes[i].rz == guided2.episodes[i].rz);
    }

    // The verifier must accept every completed episode: the bonus was never
    // granted to an unverified scheme, and every completed row is verified.
    CHECK(guided.unverified_complete == 0);
    long long completed = 0;
    for (const EpisodeRow& row : guided.episodes) {
        if (row.complete) {
            completed += 1;
            CHECK(row.verified);
            CHECK(row.mu_total == static_cast<int>(pattern.relations.size()));
        } else {
            CHECK(row.rz == 0.0);
            CHECK(!row.verified);
        }
    }
    CHECK(guided.rz_episodes == completed);

    // Zero-weight guidance is the same run as no guidance at all.
    RewardConfig zero = rewards;
    zero.alpha = 0.0;
    UpperTrainResult ablated = train_upper(sc, zero, lower, &pattern, cfg);
    UpperTrainResult baseline = train_upper(sc, zero, lower, nullptr, cfg);
    CHECK(ablated.online == baseline.online);
    REQUIRE(ablated.episodes.size() == baseline.episodes.size());
    for (std::size_t i = 0; i < ablated.episodes.size(); ++i) {
        CHECK(ablated.episodes[i].comt == baseline.episodes[i].comt);
        CHECK(ablated.episodes[i].cumr == baseline.episodes[i].cumr);
        CHECK(ablated.episodes[i].rz == 0.0);
    }
}

TEST_CASE("policy-gradient task training runs and obeys the same instrumentation") {
    ScenarioConfig sc = tiny_scenario();
    GreedyLowerPolicy lower;
    RewardConfig rewards;

    TrainConfig cfg;
    cfg.algorithm = Algorithm::Ppo;
    cfg.steps = 1200;
    cfg.rollout = 256;
    cfg.minibatch = 64;
    cfg.hidden = {16, 16};
    cfg.seed = 31;

    UpperTrainResult r = train_upper(sc, rewards, lower, nullptr, cfg);
    CHECK(r.steps == cfg.steps);
    CHECK(r.unverified_complete == 0);
    CHECK(r.rz_episodes == 0);  // no historical pattern supplied
    UpperTrainResult r2 = train_upper(sc, rewards, lower, nullptr, cfg);
    CHECK(r.online == r2.online);
    CHECK(r.secondary == r2.secondary);
}

TEST_CASE("matching an episode's own pattern earns exactly half the total at weight alpha") {
    ScenarioConfig sc = tiny_scenario();
    GreedyLowerPolicy lower;
    RewardConfig rewards;

    TrainConfig cfg;
    cfg.algorithm = Algorithm::Dqn;
    cfg.steps = 800;
    cfg.warmup = 100;
    cfg.hidden = {16};
    cfg.replay_capacity = 1000;
    cfg.seed = 8;
    UpperTrainResult trained = train_upper(sc, rewards, lower, nullptr, cfg);

    // Drive one greedy episode by hand to learn what pattern the greedy
    // policy produces.
    UpperEnv env(sc, rewards, 0);
    while (!env.done()) env.step(nn::argmax(trained.online.forward(env.state().features())), lower);
    if (env.complete()) {
        VerificationReport report = check_scheme(env.emit_scheme(), sc);
        REQUIRE(report.verified());
        PriorityPattern own = extract_pattern(report, sc);

        EvalResult eval = evaluate_upper(sc, rewards, trained.online, lower, 1, &own);
        REQUIRE(eval.episodes.size() == 1);
        const EpisodeRow& row = eval.episodes[0];
        REQUIRE(row.complete);
        CHECK(row.mu_match == row.mu_total);
        CHECK(row.rz ==
              doctest::Approx(rewards.alpha * static_cast<double>(row.mu_total) / 2.0));
    }
}

TEST_CASE("evaluation reports did-not-finish when the policy fixates on one task") {
    ScenarioConfig sc = tiny_scenario();
    GreedyLowerPolicy lower;
    RewardConfig rewards;

    // All-zero weights make every decision argmax to task 0; after task 0
    // finishes the policy keeps selecting it until the budget runs out.
    int inputs = UpperState::feature_size(2, 2, sc.cars);
    nn::Net stuck(nn::Net::Arch::Plain, inputs, {4}, 2, nn::Activation::Sigmoid, 1);
    stuck.zero();

    EvalResult eval = evaluate_upper(sc, rewards, stuck, lower, 2);
    CHECK(eval.completed == 0);
    CHECK(eval.mean_comt == -1.0);
    for (const EpisodeRow& row : eval.episodes) {
        CHECK(!row.complete);
        CHECK(row.comt == -1.0);
    }
}

TEST_CASE("checkpoints restore the exact nets and resuming continues the step counter") {
    ScenarioConfig sc = tiny_scenario();
    GreedyLowerPolicy lower;
    RewardConfig rewards;

    TrainConfig cfg;
    cfg.algorithm = Algorithm::Ddqn;
    cfg.steps = 400;
    cfg.warmup = 50;
    cfg.hidden = {16};
    cfg.replay_capacity = 600;
    cfg.seed = 13;
    UpperTrainResult first = train_upper(sc, rewards, lower, nullptr, cfg);

    Checkpoint ckpt;
    ckpt.kind = "upper";
    ckpt.config = cfg;
    ckpt.step = first.steps;
    ckpt.primary = first.online;
    ckpt.secondary = first.secondary;
    std::string path = temp_path("ckpt.json");
    save_checkpoint(path, ckpt);
    Checkpoint back = load_checkpoint(path);
    CHECK(back.kind == "upper");
    CHECK(back.step == first.steps);
    CHECK(back.primary == first.online);
    CHECK(back.secondary == first.secondary);
    CHECK(back.config.algorithm == Algorithm::Ddqn);
    CHECK(back.config.seed == 13);

    TrainConfig longer = cfg;
    longer.steps = 600;
    UpperTrainResult resumed = train_upper(sc, rewards, lower, nullptr, longer, &back);
    CHECK(resumed.steps == 600);

    std::remove(path.c_str());
    CHECK_THROWS_AS(load_checkpoint(temp_path("missing_ckpt.json")), Error);

    Checkpoint wrong = back;
    wrong.kind = "lower";
    CHECK_THROWS_AS(train_upper(sc, rewards, lower, nullptr, longer, &wrong), ValidationError);
}
