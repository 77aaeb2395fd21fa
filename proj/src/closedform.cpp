#include "multistop/closedform.hpp"

#include "internal.hpp"
#include "multistop/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace multistop::closedform {

using detail::overloaded;

double offer_mean(const OfferLaw& law) {
    return std::visit(overloaded{
                          [](const DiscreteDistribution& d) { return d.mean(); },
                          [](const UniformLaw& u) { return 0.5 * (u.a + u.b); },
                      },
                      law);
}

double expected_excess(const OfferLaw& law, double c) {
    return std::visit(overloaded{
                          [&](const DiscreteDistribution& d) {
                              return d.expect([&](double x) { return x > c ? x - c : 0.0; });
                          },
                          [&](const UniformLaw& u) {
                              if (c <= u.a) return 0.5 * (u.a + u.b) - c;
                              if (c >= u.b) return 0.0;
                              return (u.b - c) * (u.b - c) / (2.0 * (u.b - u.a));
                          },
                      },
                      law);
}

namespace {

double offer_sup(const OfferLaw& law) {
    return std::visit(overloaded{
                          [](const DiscreteDistribution& d) { return d.max_value(); },
                          [](const UniformLaw& u) { return u.b; },
                      },
                      law);
}

void check_offer_law(const OfferLaw& law) {
    std::visit(overloaded{
                   [](const DiscreteDistribution& d) {
                       if (auto v = check_distribution(d); !v.empty()) throw InputError("offer law: " + v.front());
                       std::set<double> atoms;
                       for (const auto& a : d.support) {
                           if (a.value < 0.0) throw InputError("offer law has negative support");
                           if (a.probability > 0.0) atoms.insert(a.value);
                       }
                       if (atoms.size() < 2)
                           throw InputError("law must assign positive mass above any candidate threshold");
                   },
                   [](const UniformLaw& u) {
                       if (!std::isfinite(u.a) || !std::isfinite(u.b) || u.a < 0.0)
                           throw InputError("offer law has negative support");
                       if (!(u.b > u.a)) throw InputError("law must assign positive mass above any candidate threshold");
                   },
               },
               law);
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
}

}  // namespace

double house_residual(const OfferLaw& offer_law, double alpha, double shift, double t) {
    return (1.0 - alpha) / alpha - expected_excess(offer_law, t - shift) / t;
}

double house_threshold(const OfferLaw& offer_law, double alpha, double shift) {
    check_alpha(alpha);
    check_offer_law(offer_law);
    if (!(shift >= 0.0) || !std::isfinite(shift)) throw InputError("shift must be finite and >= 0");

    // psi(t) = t (1 - alpha)/alpha - E[(X + shift - t)^+] is continuous and
    // strictly increasing, negative at 0 and positive at sup X + shift.
    const double ratio = (1.0 - alpha) / alpha;
    auto psi = [&](double t) { return t * ratio - expected_excess(offer_law, t - shift); };
    double lo = 0.0;
    double hi = offer_sup(offer_law) + shift;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (psi(mid) < 0.0) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

double HouseSolution::value(std::size_t k, double offer) const {
    const auto& l = levels.at(k - 1);
    return std::max(offer + l.shift, l.threshold);
}

HouseSolution solve_house(const OfferLaw& offer_law, double alpha, const DiscreteDistribution& delay_law, int n) {
    check_alpha(alpha);
    if (n < 1) throw InputError("need at least one right");
    if (auto v = check_distribution(delay_law); !v.empty()) throw InputError("delay law: " + v.front());
    for (const auto& a : delay_law.support)
        if (!(a.value >= 1.0) || std::floor(a.value) != a.value)
            throw InputError("delay law must live on {1, 2, ...}");

    HouseSolution sol{alpha, offer_law, delay_law.expect([&](double k) { return std::pow(alpha, k); }), {}};
    double shift = 0.0;
    for (int k = 1; k <= n; ++k) {
        const double t = house_threshold(offer_law, alpha, shift);
        const double ev = t + expected_excess(offer_law, t - shift);
        sol.levels.push_back({shift, t, ev});
        shift = ev * sol.delay_discount;
    }
    return sol;
}

// ---------------------------------------------------------------------------

double PutSolution::v1(double x) const {
    const double x1 = x_star.front();
    if (x <= x1) return strike - x;
    return (strike - x1) * std::pow(x / x1, gamma);
}

double PutSolution::value(std::size_t k, double x) const {
    if (k < 1 || k > x_star.size()) throw InputError("right index out of range");
    const double ck = k == 1 ? 0.0 : c[k - 2];
    return v1((1.0 - ck) * x);
}

double PutSolution::g(std::size_t k, double x) const {
    if (k < 1 || k > c.size()) throw InputError("g index out of range");
    return x <= z0 ? c[k - 1] * x : value(k, x);
}

PutSolution solve_put(double strike, double sigma, double beta, double z0, int n) {
    if (!(strike > 0.0)) throw InputError("strike K must be positive");
    if (!(sigma > 0.0)) throw InputError("sigma must be positive");
    if (!(beta > 0.0)) throw InputError("beta must be positive");
    if (beta < 0.5 * sigma * sigma)
        throw InputError("beta < sigma^2/2: refraction times are not a.s. finite (require beta >= sigma^2/2)");
    if (!(z0 >= strike) || !std::isfinite(z0)) throw InputError("refraction level z0 must satisfy z0 >= K");
    if (n < 1) throw InputError("need at least one right");

    PutSolution s{strike, sigma, beta, z0, -2.0 * beta / (sigma * sigma), {}, {}};
    const double x1 = strike / (1.0 + sigma * sigma / (2.0 * beta));
    s.x_star.push_back(x1);
    for (int k = 1; k < n; ++k) {
        const double ck = s.value(static_cast<std::size_t>(k), z0) / z0;
        if ((1.0 - ck) * z0 < x1) {
            std::ostringstream os;
            os << "induction branch invalid for these parameters: (1 - c_" << k << ") z0 = " << (1.0 - ck) * z0
               << " < x_1* = " << x1;
            throw SolverError(os.str());
        }
        s.c.push_back(ck);
        s.x_star.push_back(x1 / (1.0 - ck));
    }
    return s;
}

}  // namespace multistop::closedform
