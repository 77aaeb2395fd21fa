// Shared fixtures and random instance generators for the test suites.
#ifndef MULTISTOP_TESTS_SUPPORT_HPP
#define MULTISTOP_TESTS_SUPPORT_HPP

#include "multistop/core.hpp"

#include <cmath>
#include <vector>

namespace multistop::testing {

/// Chain whose rows all equal the offer law: the state is today's offer.
inline FiniteMarkovModel iid_offer_chain(const DiscreteDistribution& offers, double alpha) {
    FiniteMarkovModel m;
    const auto n = static_cast<Eigen::Index>(offers.support.size());
    m.transition.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        m.states.push_back(offers.support[static_cast<std::size_t>(j)].value);
        for (Eigen::Index i = 0; i < n; ++i) m.transition(i, j) = offers.support[static_cast<std::size_t>(j)].probability;
    }
    m.step_discount = alpha;
    return m;
}

inline std::vector<double> labels_as_reward(const FiniteMarkovModel& m) { return m.states; }

/// Random infinite-horizon instance for property tests. `kind` picks the
/// waiting model: 0 independent delay, 1 refraction set, 2 deterministic.
/// Refraction instances use strictly positive rows so B is reached a.s.
inline StoppingProblem random_property_instance(Rng& rng, int kind) {
    auto uniform_int = [&](int lo, int hi) { return lo + static_cast<int>(rng.uniform() * (hi - lo + 1)); };
    const int S = uniform_int(2, 12);
    FiniteMarkovModel m;
    m.step_discount = 0.5 + 0.48 * rng.uniform();
    m.transition = Eigen::MatrixXd::Zero(S, S);
    for (int x = 0; x < S; ++x) {
        m.states.push_back(static_cast<double>(x));
        double total = 0.0;
        for (int y = 0; y < S; ++y) {
            const double w = (kind != 1 && rng.uniform() < 0.4) ? 0.0 : 0.05 + rng.uniform();
            m.transition(x, y) = w;
            total += w;
        }
        if (total == 0.0) {
            m.transition(x, x) = 1.0;
            total = 1.0;
        }
        m.transition.row(x) /= total;
        m.transition(x, S - 1) += 1.0 - m.transition.row(x).sum();
        if (m.transition(x, S - 1) < 0.0) m.transition(x, S - 1) = 0.0;
    }
    TabulatedReward h;
    for (int x = 0; x < S; ++x) h.values.push_back(rng.uniform() < 0.25 ? 0.0 : 10.0 * rng.uniform());

    WaitingModel w;
    if (kind == 0) {
        DiscreteDistribution law;
        for (int d = 1; d <= 4; ++d)
            if (rng.uniform() < 0.5 || (d == 4 && law.support.empty())) law.support.push_back({double(d), 0.1 + rng.uniform()});
        double total = law.total_mass();
        for (auto& a : law.support) a.probability /= total;
        law.support.back().probability += 1.0 - law.total_mass();
        w = IndependentDelay{law};
    } else if (kind == 1) {
        RefractionSet b;
        for (int x = 0; x < S; ++x)
            if (rng.uniform() < 0.4) b.states.push_back(static_cast<std::size_t>(x));
        if (b.states.empty()) b.states.push_back(0);
        w = b;
    } else {
        w = Deterministic{static_cast<double>(uniform_int(0, 3))};
    }
    return StoppingProblem{m, h, uniform_int(1, 4), w, std::nullopt};
}

}  // namespace multistop::testing

#endif
