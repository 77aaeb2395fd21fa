/**
 * @file dp.hpp
 * @brief Exact dynamic programming on finite discrete-time Markov chains.
 *
 * The n-right problem is solved as a cascade of single stopping problems:
 * V_1 is the Snell value of h, and for k >= 2 the composite reward
 * h_k = h + g_{k-1} folds in the discounted (k-1)-right value expected at the
 * moment the refraction period ends.
 */

#ifndef MULTISTOP_DP_HPP
#define MULTISTOP_DP_HPP

#include "multistop/core.hpp"

#include <algorithm>
#include <cmath>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace multistop::dp {

struct SolveOptions {
    int max_iterations = 100000;
    double convergence_tol = 1e-12;   ///< sup-norm change between sweeps
    std::optional<int> horizon;       ///< nullopt = infinite horizon
};

/// Relative tolerance used to decide V(x) == reward(x).
inline constexpr double kStopTol = 1e-9;

/// Stopping-set membership: value within kStopTol (relative) of the reward.
/// Ties resolve to stop.
inline bool is_stop(double value, double reward) {
    return value - reward <= kStopTol * std::max(std::abs(value), std::abs(reward));
}

struct SingleStopResult {
    Eigen::VectorXd value;
    std::vector<bool> stop;
    int iterations = 0;
    double residual = 0.0;   ///< last sup-norm change (0 for finite horizon)
};

/// Least fixed point of V = max(reward, alpha P V) by Jacobi value iteration
/// from V_0 = reward. With a finite horizon H, exactly H backward steps.
/// Throws SolverError after max_iterations without convergence.
SingleStopResult single_stop_value(const FiniteMarkovModel& m, const Eigen::VectorXd& reward,
                                   const SolveOptions& opt = {});

/// g(x) = sum_k law(k) alpha^k (P^k v_prev)(x) for a law on positive integers.
Eigen::VectorXd g_operator_independent_delay(const FiniteMarkovModel& m, const Eigen::VectorXd& v_prev,
                                             const DiscreteDistribution& law);

/// g(x) = E_x[alpha^rho v_prev(X_rho)] with rho the first entry into B after time 0.
/// Throws SolverError naming the states from which B is not reached a.s.
Eigen::VectorXd g_operator_refraction_set(const FiniteMarkovModel& m, const Eigen::VectorXd& v_prev,
                                          const std::vector<std::size_t>& refraction_states,
                                          const SolveOptions& opt = {});

/// States from which the first entry time into B after 0 is infinite with
/// positive probability (empty when B is reached a.s. from everywhere).
std::vector<std::size_t> states_missing_refraction_set(const FiniteMarkovModel& m,
                                                       const std::vector<std::size_t>& refraction_states);

struct CascadeResult {
    ValueCascade cascade;
    ThresholdPolicy policy;              ///< stopping-set rules, first exercise first
    std::vector<std::string> warnings;
};

/// Solve the n-right problem on a finite chain. The problem's own horizon
/// overrides opt.horizon. For finite horizons the reported tables and stopping
/// sets are those at time 0.
CascadeResult solve_cascade(const StoppingProblem& p, const SolveOptions& opt = {});

/// One row per state: state,V_1..V_n,g_1..g_{n-1},h_2..h_n,stop_1..stop_n.
void write_cascade_csv(std::ostream& os, const FiniteMarkovModel& m, const ValueCascade& c);

}  // namespace multistop::dp

#endif  // MULTISTOP_DP_HPP
