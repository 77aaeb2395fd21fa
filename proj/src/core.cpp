#include "multistop/core.hpp"

#include "multistop/errors.hpp"
#include "internal.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace multistop {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

bool is_integer(double v) { return std::isfinite(v) && std::floor(v) == v; }

}  // namespace

using detail::overloaded;

Rng::Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    std::seed_seq seq{splitmix64(s), splitmix64(s), splitmix64(s), splitmix64(s)};
    engine_.seed(seq);
}

Rng Rng::substream(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t s = seed;
    const std::uint64_t a = splitmix64(s);
    std::uint64_t t = index ^ 0xD1B54A32D192ED03ULL;
    const std::uint64_t b = splitmix64(t);
    return Rng(a ^ (b * 0xFF51AFD7ED558CCDULL) ^ (b >> 29));
}

// ---------------------------------------------------------------------------
// DiscreteDistribution

DiscreteDistribution DiscreteDistribution::point_mass(double value) {
    return DiscreteDistribution{{{value, 1.0}}, 0.0};
}

DiscreteDistribution DiscreteDistribution::geometric(double p, int k_max) {
    if (!(p > 0.0 && p <= 1.0)) throw InputError("geometric law needs p in (0, 1]");
    if (k_max < 1) throw InputError("geometric law needs k_max >= 1");
    DiscreteDistribution law;
    double survive = 1.0;   // P(G >= k)
    for (int k = 1; k < k_max; ++k) {
        law.support.push_back({static_cast<double>(k), survive * p});
        survive *= (1.0 - p);
    }
    law.support.push_back({static_cast<double>(k_max), survive});
    law.folded_tail = survive * (1.0 - p);
    // Renormalize against accumulated rounding so the invariant holds to 1e-12.
    const double total = law.total_mass();
    law.support.back().probability += 1.0 - total;
    return law;
}

DiscreteDistribution DiscreteDistribution::geometric_for_discount(double p, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
    const int k_max = static_cast<int>(std::ceil(std::log(1e-10) / std::log(alpha)));
    return geometric(p, std::max(k_max, 1));
}

DiscreteDistribution DiscreteDistribution::uniform_grid(double a, double b, std::size_t points) {
    if (points < 2 || !(b > a)) throw InputError("uniform grid needs b > a and at least 2 points");
    DiscreteDistribution law;
    const double w = 1.0 / static_cast<double>(points);
    for (std::size_t i = 0; i < points; ++i) {
        const double v = a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1);
        law.support.push_back({v, w});
    }
    return law;
}

double DiscreteDistribution::total_mass() const {
    double s = 0.0;
    for (const auto& a : support) s += a.probability;
    return s;
}

double DiscreteDistribution::mean() const {
    return expect([](double x) { return x; });
}

double DiscreteDistribution::min_value() const {
    double m = support.at(0).value;
    for (const auto& a : support) m = std::min(m, a.value);
    return m;
}

double DiscreteDistribution::max_value() const {
    double m = support.at(0).value;
    for (const auto& a : support) m = std::max(m, a.value);
    return m;
}

double DiscreteDistribution::sample(Rng& rng) const {
    const double u = rng.uniform();
    double cum = 0.0;
    for (const auto& a : support) {
        cum += a.probability;
        if (u < cum) return a.value;
    }
    // u landed in the rounding gap above the last partial sum.
    for (auto it = support.rbegin(); it != support.rend(); ++it)
        if (it->probability > 0.0) return it->value;
    return support.back().value;
}

std::vector<std::string> check_distribution(const DiscreteDistribution& law) {
    std::vector<std::string> out;
    if (law.support.empty()) {
        out.emplace_back("law has empty support");
        return out;
    }
    for (const auto& a : law.support) {
        if (!std::isfinite(a.value)) out.emplace_back("support value is not finite");
        if (!(a.probability >= 0.0 && a.probability <= 1.0))
            out.emplace_back("probability outside [0, 1]");
    }
    const double total = law.total_mass();
    if (!(std::abs(total - 1.0) <= kStochasticTol)) {
        std::ostringstream os;
        os.precision(17);
        os << "law not normalized (total mass " << total << ")";
        out.push_back(os.str());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Problem

bool RefractionSet::contains(std::size_t state) const {
    return std::find(states.begin(), states.end(), state) != states.end();
}

const FiniteMarkovModel& StoppingProblem::chain() const {
    if (const auto* m = std::get_if<FiniteMarkovModel>(&dynamics)) return *m;
    throw InputError("problem dynamics is not a finite Markov chain");
}

const GbmModel& StoppingProblem::gbm() const {
    if (const auto* m = std::get_if<GbmModel>(&dynamics)) return *m;
    throw InputError("problem dynamics is not a GBM model");
}

Eigen::VectorXd StoppingProblem::reward_table() const {
    const auto* r = std::get_if<TabulatedReward>(&reward);
    if (r == nullptr) throw InputError("reward is not tabulated per state");
    return Eigen::Map<const Eigen::VectorXd>(r->values.data(), static_cast<Eigen::Index>(r->values.size()));
}

bool rule_stops(const ExerciseRule& rule, std::size_t state_index, double state_label) {
    return std::visit(overloaded{
                          [&](const StoppingSetRule& s) {
                              return std::binary_search(s.states.begin(), s.states.end(), state_index);
                          },
                          [&](const ThresholdRule& t) {
                              return t.direction == Direction::above ? state_label >= t.level
                                                                     : state_label <= t.level;
                          },
                      },
                      rule);
}

namespace {

void check_chain(const FiniteMarkovModel& m, std::vector<Violation>& out) {
    const auto n = static_cast<Eigen::Index>(m.size());
    if (n == 0) out.push_back({"dynamics.states", "state space is empty"});
    for (double s : m.states)
        if (!std::isfinite(s)) out.push_back({"dynamics.states", "state label is not finite"});
    if (m.transition.rows() != n || m.transition.cols() != n) {
        out.push_back({"dynamics.transition", "transition matrix must be states x states"});
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            bool entries_ok = true;
            for (Eigen::Index j = 0; j < n; ++j) {
                const double p = m.transition(i, j);
                if (!(p >= 0.0 && p <= 1.0)) entries_ok = false;
            }
            if (!entries_ok)
                out.push_back({"dynamics.transition[" + std::to_string(i) + "]",
                               "transition entries must lie in [0, 1]"});
            if (!(std::abs(m.transition.row(i).sum() - 1.0) <= kStochasticTol))
                out.push_back({"dynamics.transition[" + std::to_string(i) + "]",
                               "transition row does not sum to 1"});
        }
    }
    if (!(m.step_discount > 0.0 && m.step_discount < 1.0))
        out.push_back({"dynamics.step_discount", "step discount must lie in (0, 1)"});
}

void check_gbm(const GbmModel& g, std::vector<Violation>& out) {
    if (!(g.x0 > 0.0)) out.push_back({"dynamics.x0", "initial price must be positive"});
    if (!(g.sigma > 0.0)) out.push_back({"dynamics.sigma", "volatility must be positive"});
    if (!(g.beta > 0.0)) out.push_back({"dynamics.beta", "discount rate must be positive"});
    if (g.sigma > 0.0 && g.beta > 0.0 && g.beta < 0.5 * g.sigma * g.sigma)
        out.push_back({"dynamics.beta",
                       "beta < sigma^2/2: refraction times are not a.s. finite (require beta >= sigma^2/2)"});
}

void check_delay_law(const DiscreteDistribution& law, bool integral, std::vector<Violation>& out) {
    for (auto& msg : check_distribution(law)) out.push_back({"waiting.law", msg});
    for (const auto& a : law.support) {
        if (!(a.value > 0.0)) {
            out.push_back({"waiting.law", "delay must be positive"});
            break;
        }
    }
    if (integral) {
        for (const auto& a : law.support) {
            if (!is_integer(a.value)) {
                out.push_back({"waiting.law", "delays of a discrete-time chain must be integers"});
                break;
            }
        }
    }
}

}  // namespace

std::vector<Violation> validate_problem(const StoppingProblem& p) {
    std::vector<Violation> out;
    const bool finite = p.is_finite_chain();

    if (finite) {
        const auto& m = std::get<FiniteMarkovModel>(p.dynamics);
        check_chain(m, out);
        if (const auto* r = std::get_if<TabulatedReward>(&p.reward)) {
            if (r->values.size() != m.size())
                out.push_back({"reward", "reward table length differs from number of states"});
            for (double v : r->values) {
                if (!std::isfinite(v) || v < 0.0) {
                    out.push_back({"reward", "reward must be finite and nonnegative"});
                    break;
                }
            }
        } else {
            out.push_back({"reward", "finite chains need a tabulated reward"});
        }
    } else {
        check_gbm(std::get<GbmModel>(p.dynamics), out);
        if (const auto* r = std::get_if<PutReward>(&p.reward)) {
            if (!(r->strike > 0.0)) out.push_back({"reward", "strike must be positive"});
        } else {
            out.push_back({"reward", "GBM dynamics need the put(K) reward"});
        }
        if (p.horizon) out.push_back({"horizon", "GBM problems are perpetual; horizon must be infinite"});
    }

    if (p.n_exercises < 1) out.push_back({"n_exercises", "need at least one exercise right"});
    if (p.horizon && *p.horizon < 0) out.push_back({"horizon", "horizon must be nonnegative"});

    std::visit(overloaded{
                   [&](const IndependentDelay& d) { check_delay_law(d.law, finite, out); },
                   [&](const RefractionSet& b) {
                       if (finite) {
                           const auto n = std::get<FiniteMarkovModel>(p.dynamics).size();
                           if (b.states.empty())
                               out.push_back({"waiting.B", "refraction set must be nonempty"});
                           for (auto s : b.states)
                               if (s >= n) out.push_back({"waiting.B", "refraction state index out of range"});
                           if (b.level) out.push_back({"waiting.B", "finite chains take a state subset, not a level"});
                       } else {
                           if (!b.level || !std::isfinite(*b.level)) {
                               out.push_back({"waiting.B", "GBM refraction needs a finite level z0"});
                           } else if (const auto* r = std::get_if<PutReward>(&p.reward);
                                      r && *b.level < r->strike) {
                               out.push_back({"waiting.B", "refraction level z0 must be >= strike K"});
                           }
                       }
                   },
                   [&](const Deterministic& d) {
                       if (!(d.delta >= 0.0) || !std::isfinite(d.delta))
                           out.push_back({"waiting.delta", "deterministic delay must be finite and >= 0"});
                       else if (finite && !is_integer(d.delta))
                           out.push_back({"waiting.delta", "delays of a discrete-time chain must be integers"});
                   },
               },
               p.waiting);
    return out;
}

void require_valid(const StoppingProblem& p) {
    const auto v = validate_problem(p);
    if (v.empty()) return;
    std::string msg = "invalid problem:";
    for (const auto& e : v) msg += "\n  " + e.field + ": " + e.message;
    throw InputError(msg);
}

double sample_delay(const WaitingModel& w, Rng& rng) {
    return std::visit(overloaded{
                          [&](const IndependentDelay& d) { return d.law.sample(rng); },
                          [](const Deterministic& d) { return d.delta; },
                          [](const RefractionSet&) -> double {
                              throw InputError("delay is path-dependent; use hitting-time sampler");
                          },
                      },
                      w);
}

double delay_discount(const WaitingModel& w, double alpha) {
    return std::visit(overloaded{
                          [&](const IndependentDelay& d) {
                              return d.law.expect([&](double k) { return std::pow(alpha, k); });
                          },
                          [&](const Deterministic& d) { return std::pow(alpha, d.delta); },
                          [](const RefractionSet&) -> double {
                              throw InputError("delay discount of a refraction set depends on the state");
                          },
                      },
                      w);
}

}  // namespace multistop
