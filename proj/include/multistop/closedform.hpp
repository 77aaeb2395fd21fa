/**
 * @file closedform.hpp
 * @brief Analytic solutions of two multiple stopping examples.
 *
 *  - Multiple house selling: i.i.d. offers discounted by alpha per period, i.i.d.
 *    closing delays. Each extra right shifts the offer law by a constant d_k.
 *  - Perpetual put on GBM where the next exercise waits for the price to climb
 *    back to a level z0 >= K. V_{k+1}(x) = V_1((1 - c_k) x).
 */

#ifndef MULTISTOP_CLOSEDFORM_HPP
#define MULTISTOP_CLOSEDFORM_HPP

#include "multistop/core.hpp"

#include <variant>
#include <vector>

namespace multistop::closedform {

/// Continuous uniform offer law on [a, b].
struct UniformLaw {
    double a = 0.0;
    double b = 1.0;
};

using OfferLaw = std::variant<DiscreteDistribution, UniformLaw>;

double offer_mean(const OfferLaw& law);
/// E[(X - c)^+].
double expected_excess(const OfferLaw& law, double c);

/// Unique root t of (1 - alpha)/alpha = E[((X + shift)/t - 1)^+], by bisection
/// to machine precision. Rejects alpha outside (0, 1), negative support, and single-point laws.
double house_threshold(const OfferLaw& offer_law, double alpha, double shift);

/// Residual (1 - alpha)/alpha - E[((X + shift)/t - 1)^+].
double house_residual(const OfferLaw& offer_law, double alpha, double shift, double t);

struct HouseLevel {
    double shift;            ///< d_{k-1}; d_0 = 0
    double threshold;        ///< t_k: with k rights left, accept X when X + shift >= t_k
    double expected_value;   ///< E[V_k(X_1)]

    /// Smallest raw offer accepted with k rights left.
    double offer_cutoff() const { return threshold - shift; }
};

struct HouseSolution {
    double alpha;
    OfferLaw offer_law;
    double delay_discount;           ///< m = E[alpha^delta]
    std::vector<HouseLevel> levels;  ///< levels[k-1] for k = 1..n

    /// d_k = EV_k * m.
    double next_shift(std::size_t k) const { return levels.at(k - 1).expected_value * delay_discount; }
    /// V_k at current offer x: max(x + d_{k-1}, t_k).
    double value(std::size_t k, double offer) const;
};

/// Delay law must live on {1, 2, ...}.
HouseSolution solve_house(const OfferLaw& offer_law, double alpha, const DiscreteDistribution& delay_law, int n);

struct PutSolution {
    double strike;
    double sigma;
    double beta;
    double z0;
    double gamma;                ///< -2 beta / sigma^2
    std::vector<double> x_star;  ///< x_1*, ..., x_n*
    std::vector<double> c;       ///< c_1, ..., c_{n-1}

    /// Single-right perpetual put value.
    double v1(double x) const;
    /// k-right value V_k(x) = V_1((1 - c_{k-1}) x), c_0 = 0.
    double value(std::size_t k, double x) const;
    /// g_k(x): c_k x below z0, V_k(x) above.
    double g(std::size_t k, double x) const;
};

/// Throws InputError on beta < sigma^2/2, z0 < K or nonpositive inputs, and
/// SolverError when (1 - c_k) z0 < x_1* for some k < n.
PutSolution solve_put(double strike, double sigma, double beta, double z0, int n);

}  // namespace multistop::closedform

#endif  // MULTISTOP_CLOSEDFORM_HPP
