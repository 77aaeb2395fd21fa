#include "multistop/closedform.hpp"
#include "multistop/dp.hpp"
#include "multistop/errors.hpp"
#include "multistop/mc.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace multistop;

namespace {

FiniteMarkovModel single_state(double alpha) {
    FiniteMarkovModel m;
    m.states = {0.0};
    m.transition = Eigen::MatrixXd::Ones(1, 1);
    m.step_discount = alpha;
    return m;
}

ThresholdPolicy repeat_rule(const ExerciseRule& r, int n, WaitingModel w) {
    return ThresholdPolicy{std::vector<ExerciseRule>(static_cast<std::size_t>(n), r), std::move(w)};
}

ThresholdPolicy put_policy(std::vector<double> levels, double z0) {
    ThresholdPolicy pol{{}, RefractionSet{{}, z0}};
    for (double l : levels) pol.per_exercise_rules.push_back(ThresholdRule{Direction::below, l});
    return pol;
}

}  // namespace

TEST_CASE("chain MC: immediate exercise of a constant reward is exact") {
    const double alpha = 0.85, c = 4.0;
    for (int delay : {0, 1, 3}) {
        StoppingProblem p{single_state(alpha), TabulatedReward{{c}}, 3, Deterministic{double(delay)}, std::nullopt};
        const auto pol = repeat_rule(StoppingSetRule{{0}}, 3, p.waiting);
        const auto r = mc::evaluate_policy_chain(p, pol, 0, 1000, 1);
        double exact = 0.0;
        for (int j = 0; j < 3; ++j) exact += c * std::pow(alpha, delay * j);
        CHECK(r.estimate == doctest::Approx(exact).epsilon(1e-14));
        CHECK(r.std_error == 0.0);
        CHECK(r.admissibility_violations == 0);
    }
}

TEST_CASE("chain MC: never stopping pays nothing") {
    Rng rng(4);
    const auto p = testing::random_property_instance(rng, 0);
    const auto pol = repeat_rule(StoppingSetRule{}, p.n_exercises, p.waiting);
    const auto r = mc::evaluate_policy_chain(p, pol, 0, 500, 2);
    CHECK(r.estimate == 0.0);
    CHECK(r.std_error == 0.0);
    CHECK(r.truncation_horizon == std::ceil(std::log(1e-10) / std::log(p.chain().step_discount)));
}

TEST_CASE("chain MC: optimal single-right policy reproduces V_1") {
    Rng rng(12);
    auto p = testing::random_property_instance(rng, 0);
    p.n_exercises = 1;
    const auto sol = dp::solve_cascade(p);
    const auto r = mc::evaluate_policy_chain(p, sol.policy, 0, 100000, 77);
    CHECK(std::abs(r.estimate - sol.cascade.values[0](0)) <= 3.0 * r.std_error + 1e-12);
}

TEST_CASE("chain MC: optimal multi-right policies reproduce V_n for every waiting model") {
    for (int kind = 0; kind < 3; ++kind) {
        Rng rng(100 + std::uint64_t(kind));
        auto p = testing::random_property_instance(rng, kind);
        p.n_exercises = 3;
        const auto sol = dp::solve_cascade(p);
        for (std::size_t x0 : {std::size_t(0), p.chain().size() - 1}) {
            const auto r = mc::evaluate_policy_chain(p, sol.policy, x0, 50000, 9);
            CAPTURE(kind);
            CAPTURE(x0);
            CHECK(r.admissibility_violations == 0);
            CHECK(std::abs(r.estimate - sol.cascade.values[2](Eigen::Index(x0))) < 3.0 * r.std_error + 1e-12);
        }
    }
}

TEST_CASE("chain MC: other policies do not beat the optimum") {
    Rng rng(55);
    for (int kind = 0; kind < 3; ++kind) {
        auto p = testing::random_property_instance(rng, kind);
        const auto sol = dp::solve_cascade(p);
        const auto& m = p.chain();
        for (int trial = 0; trial < 3; ++trial) {
            ThresholdPolicy pol{{}, p.waiting};
            for (int i = 0; i < p.n_exercises; ++i) {
                StoppingSetRule r;
                for (std::size_t x = 0; x < m.size(); ++x)
                    if (rng.uniform() < 0.5) r.states.push_back(x);
                pol.per_exercise_rules.push_back(r);
            }
            const auto r = mc::evaluate_policy_chain(p, pol, 0, 20000, 3);
            CHECK(r.estimate <= sol.cascade.values.back()(0) + 3.0 * r.std_error + 1e-12);
        }
    }
}

TEST_CASE("chain MC: reports do not depend on the thread count") {
    Rng rng(6);
    const auto p = testing::random_property_instance(rng, 1);
    const auto pol = dp::solve_cascade(p).policy;
    mc::McOptions one, four;
    one.threads = 1;
    four.threads = 4;
    one.keep_payoffs = four.keep_payoffs = true;
    const auto a = mc::evaluate_policy_chain(p, pol, 0, 3001, 42, one);
    const auto b = mc::evaluate_policy_chain(p, pol, 0, 3001, 42, four);
    CHECK(a.estimate == b.estimate);
    CHECK(a.std_error == b.std_error);
    CHECK(a.payoffs == b.payoffs);
    const auto c = mc::evaluate_policy_chain(p, pol, 0, 3001, 43, one);
    CHECK(c.estimate != a.estimate);
}

TEST_CASE("chain MC: input checks") {
    StoppingProblem p{single_state(0.9), TabulatedReward{{1.0}}, 2, Deterministic{1.0}, std::nullopt};
    const auto pol = repeat_rule(StoppingSetRule{{0}}, 1, p.waiting);
    CHECK_THROWS_AS(mc::evaluate_policy_chain(p, pol, 0, 10, 1), InputError);
    const auto pol2 = repeat_rule(StoppingSetRule{{0}}, 2, p.waiting);
    CHECK_THROWS_AS(mc::evaluate_policy_chain(p, pol2, 1, 10, 1), InputError);
    CHECK_THROWS_AS(mc::evaluate_policy_chain(p, pol2, 0, 0, 1), InputError);
}

TEST_CASE("GBM MC: starting inside the exercise region pays K - x0 exactly") {
    const GbmModel g{50.0, 0.3, 0.05};
    const auto r = mc::evaluate_policy_gbm(g, 100.0, put_policy({100.0 / 1.9}, 100.0), 200, 1e-3, 10.0, 5);
    CHECK(r.estimate == doctest::Approx(50.0).epsilon(1e-14));
    CHECK(r.std_error == 0.0);
    CHECK(r.warnings.size() == 2);   // grid bias, short horizon
}

TEST_CASE("GBM MC: single right near the closed form") {
    const auto sol = closedform::solve_put(100.0, 0.3, 0.05, 100.0, 1);
    const GbmModel g{100.0, 0.3, 0.05};
    const auto r = mc::evaluate_policy_gbm(g, 100.0, put_policy({sol.x_star[0]}, 100.0), 5000, 1e-3, 200.0, 11);
    const double v = sol.v1(100.0);
    CHECK(std::abs(r.estimate - v) < 3.0 * r.std_error + 0.01 * v);
    CHECK(r.admissibility_violations == 0);
}

TEST_CASE("GBM MC: common random numbers across thresholds") {
    const GbmModel g{80.0, 0.3, 0.05};
    mc::McOptions opt;
    opt.keep_payoffs = true;
    const auto a = mc::evaluate_policy_gbm(g, 100.0, put_policy({52.0, 50.0}, 100.0), 2000, 1e-3, 60.0, 21, opt);
    const auto b = mc::evaluate_policy_gbm(g, 100.0, put_policy({54.0, 50.0}, 100.0), 2000, 1e-3, 60.0, 21, opt);
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < a.payoffs.size(); ++i) {
        const double d = a.payoffs[i] - b.payoffs[i];
        s += d;
        s2 += d * d;
    }
    const double n = double(a.payoffs.size());
    const double se_diff = std::sqrt((s2 / n - (s / n) * (s / n)) / (n - 1.0));
    CHECK(se_diff < 0.5 * std::min(a.std_error, b.std_error));
    CHECK(a.admissibility_violations == 0);
    CHECK(b.admissibility_violations == 0);
}

TEST_CASE("GBM MC: input checks") {
    const GbmModel g{100.0, 0.3, 0.05};
    CHECK_THROWS_AS(mc::evaluate_policy_gbm(GbmModel{100.0, 0.4, 0.05}, 100.0, put_policy({50.0}, 100.0), 10, 1e-3, 1.0, 1),
                    InputError);
    ThresholdPolicy no_level{{ThresholdRule{Direction::below, 50.0}}, RefractionSet{{}, std::nullopt}};
    CHECK_THROWS_AS(mc::evaluate_policy_gbm(g, 100.0, no_level, 10, 1e-3, 1.0, 1), InputError);
    ThresholdPolicy above{{ThresholdRule{Direction::above, 50.0}}, RefractionSet{{}, 100.0}};
    CHECK_THROWS_AS(mc::evaluate_policy_gbm(g, 100.0, above, 10, 1e-3, 1.0, 1), InputError);
}

TEST_CASE("brute force: zero horizon and zero reward") {
    Rng rng(31);
    auto p = mc::random_tiny_problem(rng, 0);
    p.horizon = 0;
    const auto v = mc::brute_force_value(p);
    const auto h = p.reward_table();
    for (std::size_t x = 0; x < v.size(); ++x) CHECK(v[x] == h(Eigen::Index(x)));

    p.horizon = 4;
    for (auto& r : std::get<TabulatedReward>(p.reward).values) r = 0.0;
    for (double x : mc::brute_force_value(p)) CHECK(x == 0.0);
}

TEST_CASE("brute force: two-state chain with unit delay matches the cascade") {
    FiniteMarkovModel m;
    m.states = {0.0, 1.0};
    m.transition.resize(2, 2);
    m.transition << 0.25, 0.75, 0.5, 0.5;
    m.step_discount = 0.9;
    StoppingProblem p{m, TabulatedReward{{2.0, 1.0}}, 2, Deterministic{1.0}, 3};
    const auto brute = mc::brute_force_value(p);
    const auto c = dp::solve_cascade(p).cascade;
    CHECK(std::abs(brute[0] - c.values[1](0)) < 1e-10);
    CHECK(std::abs(brute[1] - c.values[1](1)) < 1e-10);
}

TEST_CASE("brute force: cap and horizon checks") {
    Rng rng(2);
    auto p = mc::random_tiny_problem(rng, 1);
    p.horizon = 5;
    CHECK_THROWS_AS(mc::brute_force_value(p, 3), SolverError);
    p.horizon.reset();
    CHECK_THROWS_AS(mc::brute_force_value(p), InputError);
}

TEST_CASE("oracle check over all waiting models") {
    const auto r = mc::oracle_check(60, 12345);
    CHECK(r.instances == 60);
    CHECK(r.mismatches == 0);
    CHECK(r.max_abs_diff < 1e-10);
    CHECK(r.failures.empty());
}

TEST_CASE("random tiny problems are valid") {
    Rng rng(9);
    for (int i = 0; i < 90; ++i) {
        const auto p = mc::random_tiny_problem(rng, i % 3);
        CHECK(validate_problem(p).empty());
        CHECK(p.chain().size() <= 5);
        CHECK(*p.horizon <= 5);
        CHECK(p.n_exercises <= 2);
    }
}
