/**
 * @file mc.hpp
 * @brief Monte Carlo evaluation of exercise policies and an exhaustive oracle.
 *
 * Path i always draws from Rng::substream(seed, i), so reports are bit-identical
 * for a given seed whatever the thread count, and two policies evaluated with
 * the same seed share their random numbers.
 */

#ifndef MULTISTOP_MC_HPP
#define MULTISTOP_MC_HPP

#include "multistop/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace multistop::mc {

struct EvalReport {
    double estimate = 0.0;            ///< mean discounted total payoff
    double std_error = 0.0;
    std::size_t n_paths = 0;
    std::uint64_t seed = kDefaultSeed;
    double truncation_horizon = 0.0;  ///< last simulated time
    double truncation_bound = 0.0;    ///< bound on payoff mass beyond it
    /// Exercise pairs that broke the waiting constraint; an audit, expected 0.
    std::size_t admissibility_violations = 0;
    std::vector<std::string> warnings;
    std::vector<double> payoffs;      ///< per path, only when requested
};

struct McOptions {
    unsigned threads = 0;         ///< 0 = MULTISTOP_THREADS, else hardware concurrency
    bool keep_payoffs = false;
};

/// Worker count after applying the MULTISTOP_THREADS cap.
unsigned resolve_threads(unsigned requested);

/// Simulate a finite chain from `initial_state` under `pol`. Admissibility
/// follows the problem's waiting model; unexercised rights pay 0. Infinite
/// horizons are truncated where alpha^T < 1e-10.
EvalReport evaluate_policy_chain(const StoppingProblem& p, const ThresholdPolicy& pol, std::size_t initial_state,
                                 std::size_t n_paths, std::uint64_t seed, const McOptions& opt = {});

/// Simulate GBM exactly on the grid 0, dt, ..., t_max and exercise the put
/// (K - A)^+ with "below level" rules; after each exercise the next one waits
/// for the first grid time with A >= z0 (the policy's refraction level).
EvalReport evaluate_policy_gbm(const GbmModel& g, double strike, const ThresholdPolicy& pol, std::size_t n_paths,
                               double dt, double t_max, std::uint64_t seed, const McOptions& opt = {});

/// Optimal value at each initial state by exhaustive backward induction over
/// the full history tree (time, state, rights, waiting status). Needs a finite
/// horizon; throws SolverError beyond `node_cap` evaluated histories.
std::vector<double> brute_force_value(const StoppingProblem& p, std::size_t node_cap = 10'000'000);

/// Random tiny instance: <= 5 states, horizon <= 5, n <= 2. `kind` selects the
/// waiting model (0 independent delay, 1 refraction set, 2 deterministic).
StoppingProblem random_tiny_problem(Rng& rng, int kind);

struct OracleCheckResult {
    std::size_t instances = 0;
    std::size_t mismatches = 0;
    double max_abs_diff = 0.0;
    std::vector<std::string> failures;
};

/// Compare brute_force_value with the dp cascade on random tiny instances.
OracleCheckResult oracle_check(std::size_t instances, std::uint64_t seed, double tol = 1e-10);

}  // namespace multistop::mc

#endif  // MULTISTOP_MC_HPP
