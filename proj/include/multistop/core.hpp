/**
 * @file core.hpp
 * @brief Problem data model for multiple stopping with random refraction times.
 *
 * A StoppingProblem bundles Markov dynamics, a nonnegative reward, the number of
 * exercise rights and the waiting model that separates consecutive exercises.
 * The types here are plain values; validation is a separate pure function so that
 * malformed input can be reported in full rather than rejected at the first error.
 */

#ifndef MULTISTOP_CORE_HPP
#define MULTISTOP_CORE_HPP

#include <Eigen/Dense>
#include <boost/random/mersenne_twister.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace multistop {

/// Absolute tolerance for normalization of laws and transition rows.
inline constexpr double kStochasticTol = 1e-12;

/// Seed used whenever the caller does not provide one.
inline constexpr std::uint64_t kDefaultSeed = 0xC0FFEE;

/**
 * Explicit random stream. Every sampler takes an Rng& and advances it; there is
 * no hidden global state. Copying an Rng forks the stream.
 */
class Rng {
public:
    using engine_type = boost::random::mt19937_64;

    explicit Rng(std::uint64_t seed = kDefaultSeed);

    /// Independent stream for work item `index` under a master seed; the
    /// result depends only on (seed, index).
    static Rng substream(std::uint64_t seed, std::uint64_t index);

    /// Uniform double on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    engine_type& engine() { return engine_; }

    bool operator==(const Rng& other) const { return engine_ == other.engine_; }

private:
    engine_type engine_;
};

struct Atom {
    double value;
    double probability;
};

/// Finitely supported law given as (value, probability) atoms.
struct DiscreteDistribution {
    std::vector<Atom> support;
    /// Probability mass that was folded into the largest atom when an
    /// infinite law was truncated; 0 for laws that are exact.
    double folded_tail = 0.0;

    static DiscreteDistribution point_mass(double value);
    /// Geometric law on {1, 2, ...} with success probability p, truncated at
    /// k_max with the tail mass P(G >= k_max) placed on k_max.
    static DiscreteDistribution geometric(double p, int k_max);
    /// Geometric law truncated where the discount alpha^k drops below 1e-10.
    static DiscreteDistribution geometric_for_discount(double p, double alpha);
    /// Equal weights on `points` equispaced values spanning [a, b].
    static DiscreteDistribution uniform_grid(double a, double b, std::size_t points);

    double total_mass() const;
    double mean() const;
    double min_value() const;
    double max_value() const;
    /// E[f(X)].
    template <class F>
    double expect(F&& f) const {
        double acc = 0.0;
        for (const auto& a : support) acc += a.probability * f(a.value);
        return acc;
    }
    /// Inverse-CDF draw.
    double sample(Rng& rng) const;
};

/// Human-readable violations of the DiscreteDistribution invariants.
std::vector<std::string> check_distribution(const DiscreteDistribution& law);

struct FiniteMarkovModel {
    std::vector<double> states;   ///< real-valued state labels
    Eigen::MatrixXd transition;   ///< row-stochastic, states x states
    double step_discount = 0.9;   ///< alpha in (0, 1)

    std::size_t size() const { return states.size(); }
};

/// Geometric Brownian motion A(t) = x0 exp(sigma W_t + (beta - sigma^2/2) t),
/// discounted at rate beta.
struct GbmModel {
    double x0 = 1.0;
    double sigma = 0.2;
    double beta = 0.05;
};

/// Model 1: i.i.d. delays independent of the reward chain.
struct IndependentDelay {
    DiscreteDistribution law;
};

/// Model 2: after an exercise at s, the next one is allowed from
/// inf{t > s : X_t in B} on. B is a state subset for finite chains and the
/// half-line [level, inf) for GBM dynamics.
struct RefractionSet {
    std::vector<std::size_t> states;
    std::optional<double> level;

    bool contains(std::size_t state) const;
};

/// Classical fixed refraction period.
struct Deterministic {
    double delta = 1.0;
};

using WaitingModel = std::variant<IndependentDelay, RefractionSet, Deterministic>;

struct TabulatedReward {
    std::vector<double> values;
};

/// h(x) = (K - x)^+.
struct PutReward {
    double strike = 1.0;
    double operator()(double x) const { return x < strike ? strike - x : 0.0; }
};

using Reward = std::variant<TabulatedReward, PutReward>;
using Dynamics = std::variant<FiniteMarkovModel, GbmModel>;

struct StoppingProblem {
    Dynamics dynamics;
    Reward reward;
    int n_exercises = 1;
    WaitingModel waiting;
    std::optional<int> horizon;   ///< nullopt = infinite horizon

    bool is_finite_chain() const { return std::holds_alternative<FiniteMarkovModel>(dynamics); }
    const FiniteMarkovModel& chain() const;
    const GbmModel& gbm() const;
    /// Tabulated reward as a state vector (finite chains only).
    Eigen::VectorXd reward_table() const;
};

struct StoppingSetRule {
    std::vector<std::size_t> states;   ///< sorted state indices where the rule stops
};

enum class Direction { above, below };

struct ThresholdRule {
    Direction direction = Direction::above;
    double level = 0.0;
};

using ExerciseRule = std::variant<StoppingSetRule, ThresholdRule>;

/// Stationary exercise strategy. per_exercise_rules[i] governs the (i+1)-th
/// exercise, i.e. the one taken with n - i rights remaining.
struct ThresholdPolicy {
    std::vector<ExerciseRule> per_exercise_rules;
    WaitingModel waiting;
};

/// Does `rule` stop at the state with the given index and label?
bool rule_stops(const ExerciseRule& rule, std::size_t state_index, double state_label);

/// Value tables of the cascade, indexed by number of remaining rights:
/// values[k-1] = V_k, g_tables[k-1] = g_k, composite_rewards[k-1] = h_k
/// (so composite_rewards[0] is h itself).
struct ValueCascade {
    std::vector<Eigen::VectorXd> values;
    std::vector<Eigen::VectorXd> g_tables;
    std::vector<Eigen::VectorXd> composite_rewards;
    std::vector<std::vector<bool>> stop;   ///< stop[k-1][x]: stop with k rights left
};

struct Violation {
    std::string field;
    std::string message;
    bool operator==(const Violation&) const = default;
};

/// Every violated invariant of `p`; empty when the problem is valid.
std::vector<Violation> validate_problem(const StoppingProblem& p);

/// Throws InputError listing all violations if the problem is invalid.
void require_valid(const StoppingProblem& p);

/// Draw one refraction delay. Deterministic(d) always returns d.
/// Throws InputError for RefractionSet, whose delay depends on the path.
double sample_delay(const WaitingModel& w, Rng& rng);

/// E[alpha^delta] for Model 1 laws and deterministic delays.
double delay_discount(const WaitingModel& w, double alpha);

}  // namespace multistop

#endif  // MULTISTOP_CORE_HPP
