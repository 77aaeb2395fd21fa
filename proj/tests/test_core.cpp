#include "multistop/core.hpp"
#include "multistop/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace multistop;

namespace {

StoppingProblem two_state_problem() {
    FiniteMarkovModel m;
    m.states = {0.0, 1.0};
    m.transition.resize(2, 2);
    m.transition << 0.5, 0.5, 0.0, 1.0;
    m.step_discount = 0.9;
    return StoppingProblem{m, TabulatedReward{{0.0, 1.0}}, 2, IndependentDelay{DiscreteDistribution::point_mass(1)},
                           std::nullopt};
}

bool has_field(const std::vector<Violation>& v, const std::string& field) {
    for (const auto& e : v)
        if (e.field == field) return true;
    return false;
}

}  // namespace

TEST_CASE("validate_problem accepts a well-formed finite chain") {
    CHECK(validate_problem(two_state_problem()).empty());
}

TEST_CASE("validate_problem reports beta < sigma^2/2 for GBM dynamics") {
    StoppingProblem p{GbmModel{100.0, 0.4, 0.05}, PutReward{100.0}, 2, RefractionSet{{}, 100.0}, std::nullopt};
    const auto v = validate_problem(p);
    REQUIRE(v.size() == 1);
    CHECK(v[0].field == "dynamics.beta");
    CHECK(v[0].message.find("beta < sigma^2/2") != std::string::npos);

    p.dynamics = GbmModel{100.0, 0.3, 0.05};   // 0.045 <= 0.05
    CHECK(validate_problem(p).empty());
}

TEST_CASE("validate_problem flags an unnormalized delay law") {
    auto p = two_state_problem();
    p.waiting = IndependentDelay{DiscreteDistribution{{{1.0, 0.5}, {2.0, 0.48}}}};
    const auto v = validate_problem(p);
    REQUIRE(v.size() == 1);
    CHECK(v[0].message.find("law not normalized") != std::string::npos);
}

TEST_CASE("validate_problem collects every violation") {
    auto p = two_state_problem();
    auto& m = std::get<FiniteMarkovModel>(p.dynamics);
    m.transition(0, 0) = 0.6;   // row 0 sums to 1.1
    m.step_discount = 1.0;
    p.reward = TabulatedReward{{-1.0, 1.0}};
    p.n_exercises = 0;
    p.waiting = IndependentDelay{DiscreteDistribution{{{0.0, 1.0}}}};
    const auto v = validate_problem(p);
    CHECK(has_field(v, "dynamics.transition[0]"));
    CHECK(has_field(v, "dynamics.step_discount"));
    CHECK(has_field(v, "reward"));
    CHECK(has_field(v, "n_exercises"));
    CHECK(has_field(v, "waiting.law"));
    CHECK_THROWS_AS(require_valid(p), InputError);
}

TEST_CASE("validate_problem checks waiting-model shapes") {
    auto p = two_state_problem();
    p.waiting = RefractionSet{};
    CHECK(has_field(validate_problem(p), "waiting.B"));
    p.waiting = RefractionSet{{5}, std::nullopt};
    CHECK(has_field(validate_problem(p), "waiting.B"));
    p.waiting = Deterministic{1.5};
    CHECK(has_field(validate_problem(p), "waiting.delta"));
    p.waiting = Deterministic{0.0};
    CHECK(validate_problem(p).empty());

    StoppingProblem put{GbmModel{100.0, 0.3, 0.05}, PutReward{100.0}, 2, RefractionSet{{}, 90.0}, std::nullopt};
    CHECK(has_field(validate_problem(put), "waiting.B"));   // z0 < K
}

TEST_CASE("validate_problem is pure") {
    auto p = two_state_problem();
    p.n_exercises = 0;
    CHECK(validate_problem(p) == validate_problem(p));
}

TEST_CASE("sample_delay: degenerate laws") {
    Rng rng(1);
    CHECK(sample_delay(Deterministic{2.0}, rng) == 2.0);
    const WaitingModel three = IndependentDelay{DiscreteDistribution::point_mass(3.0)};
    for (int i = 0; i < 10; ++i) CHECK(sample_delay(three, rng) == 3.0);
}

TEST_CASE("sample_delay: geometric(0.5) draws have mean 2") {
    const auto law = DiscreteDistribution::geometric(0.5, 64);
    CHECK(check_distribution(law).empty());

    // Analytic mean 1/p, cross-checked by summing k p (1-p)^(k-1) directly.
    const double p = 0.5;
    double direct = 0.0;
    for (int k = 1; k <= 200; ++k) direct += k * p * std::pow(1.0 - p, k - 1);
    CHECK(direct == doctest::Approx(1.0 / p).epsilon(1e-14));
    CHECK(law.mean() == doctest::Approx(direct).epsilon(1e-14));

    const WaitingModel w = IndependentDelay{law};
    Rng rng(20240601);
    const int draws = 1'000'000;
    double sum = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double d = sample_delay(w, rng);
        REQUIRE(d >= 1.0);
        sum += d;
    }
    const double sd = std::sqrt(1.0 - p) / p;
    CHECK(std::abs(sum / draws - 2.0) < 3.0 * sd / std::sqrt(double(draws)));
}

TEST_CASE("sample_delay is reproducible from the same state") {
    const WaitingModel w = IndependentDelay{DiscreteDistribution::geometric(0.3, 80)};
    Rng a(99), b(99);
    for (int i = 0; i < 1000; ++i) REQUIRE(sample_delay(w, a) == sample_delay(w, b));
    CHECK(a == b);
}

TEST_CASE("sample_delay rejects refraction sets") {
    Rng rng(1);
    CHECK_THROWS_WITH_AS(sample_delay(RefractionSet{{0}, std::nullopt}, rng),
                         "delay is path-dependent; use hitting-time sampler", InputError);
}

TEST_CASE("distribution constructors keep normalization within 1e-12") {
    for (double p : {0.05, 0.3, 0.5, 0.9, 1.0}) {
        for (int k : {1, 3, 50, 400}) {
            const auto law = DiscreteDistribution::geometric(p, k);
            CHECK(std::abs(law.total_mass() - 1.0) <= kStochasticTol);
        }
    }
    for (std::size_t n : {2u, 11u, 101u, 1001u})
        CHECK(std::abs(DiscreteDistribution::uniform_grid(0.0, 1.0, n).total_mass() - 1.0) <= kStochasticTol);
    const auto g = DiscreteDistribution::geometric(0.5, 4);
    CHECK(g.folded_tail == doctest::Approx(1.0 / 16.0));
    CHECK(g.support.back().probability == doctest::Approx(1.0 / 8.0));
}

TEST_CASE("substreams depend only on seed and index") {
    Rng a = Rng::substream(7, 3), b = Rng::substream(7, 3), c = Rng::substream(7, 4), d = Rng::substream(8, 3);
    const double va = a.uniform();
    CHECK(va == b.uniform());
    CHECK(va != c.uniform());
    CHECK(va != d.uniform());
}

TEST_CASE("delay_discount matches E[alpha^delta]") {
    const auto law = DiscreteDistribution::geometric(0.5, 400);
    CHECK(delay_discount(IndependentDelay{law}, 0.9) == doctest::Approx(0.45 / 0.55).epsilon(1e-14));
    CHECK(delay_discount(Deterministic{3.0}, 0.9) == doctest::Approx(0.729));
}

TEST_CASE("threshold and set rules") {
    const ExerciseRule above = ThresholdRule{Direction::above, 0.5};
    const ExerciseRule below = ThresholdRule{Direction::below, 0.5};
    const ExerciseRule set = StoppingSetRule{{1, 4}};
    CHECK(rule_stops(above, 0, 0.5));
    CHECK_FALSE(rule_stops(above, 0, 0.49));
    CHECK(rule_stops(below, 0, 0.5));
    CHECK_FALSE(rule_stops(below, 0, 0.51));
    CHECK(rule_stops(set, 4, -1.0));
    CHECK_FALSE(rule_stops(set, 2, 0.0));
}
