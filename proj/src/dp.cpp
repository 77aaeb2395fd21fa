#include "multistop/dp.hpp"

#include "internal.hpp"
#include "multistop/errors.hpp"

#include <deque>
#include <iomanip>
#include <locale>
#include <map>
#include <ostream>
#include <sstream>

namespace multistop::dp {

namespace {

using detail::overloaded;
using Eigen::VectorXd;

std::vector<bool> stop_mask(const VectorXd& value, const VectorXd& reward) {
    std::vector<bool> out(static_cast<std::size_t>(value.size()));
    for (Eigen::Index i = 0; i < value.size(); ++i) out[static_cast<std::size_t>(i)] = is_stop(value(i), reward(i));
    return out;
}

std::vector<bool> membership(std::size_t n, const std::vector<std::size_t>& states) {
    std::vector<bool> in(n, false);
    for (auto s : states) {
        if (s >= n) throw InputError("refraction state index out of range");
        in[s] = true;
    }
    return in;
}

/// Delay law as integer lag -> probability (Model 1 and deterministic delays).
std::map<int, double> lag_weights(const WaitingModel& w) {
    std::map<int, double> out;
    std::visit(overloaded{
                   [&](const IndependentDelay& d) {
                       for (const auto& a : d.law.support) out[static_cast<int>(a.value)] += a.probability;
                   },
                   [&](const Deterministic& d) { out[static_cast<int>(d.delta)] = 1.0; },
                   [](const RefractionSet&) {},
               },
               w);
    return out;
}

std::string join_states(const std::vector<std::size_t>& s) {
    std::ostringstream os;
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
    return os.str();
}

// --- finite horizon: tables indexed by time 0..H -----------------------------

using TimeTables = std::vector<VectorXd>;

TimeTables snell_finite(const FiniteMarkovModel& m, const TimeTables& reward) {
    const std::size_t H = reward.size() - 1;
    TimeTables v(H + 1);
    v[H] = reward[H];
    for (std::size_t t = H; t-- > 0;)
        v[t] = reward[t].cwiseMax(m.step_discount * (m.transition * v[t + 1]));
    return v;
}

TimeTables g_finite_lags(const FiniteMarkovModel& m, const TimeTables& v_prev, const std::map<int, double>& lags) {
    const int H = static_cast<int>(v_prev.size()) - 1;
    const double a = m.step_discount;
    TimeTables g(v_prev.size());
    for (int t = 0; t <= H; ++t) {
        VectorXd acc = VectorXd::Zero(v_prev[0].size());
        const int j_max = std::min(lags.empty() ? 0 : lags.rbegin()->first, H - t);
        // Horner: a P (c_1 V[t+1] + a P (c_2 V[t+2] + ...)).
        for (int j = j_max; j >= 1; --j) {
            const auto it = lags.find(j);
            if (it != lags.end()) acc += it->second * v_prev[static_cast<std::size_t>(t + j)];
            acc = a * (m.transition * acc);
        }
        if (const auto it = lags.find(0); it != lags.end()) acc += it->second * v_prev[static_cast<std::size_t>(t)];
        g[static_cast<std::size_t>(t)] = std::move(acc);
    }
    return g;
}

TimeTables g_finite_refraction(const FiniteMarkovModel& m, const TimeTables& v_prev, const std::vector<bool>& in_b) {
    const std::size_t H = v_prev.size() - 1;
    const auto n = static_cast<Eigen::Index>(m.size());
    TimeTables g(H + 1);
    g[H] = VectorXd::Zero(n);
    for (std::size_t t = H; t-- > 0;) {
        VectorXd next(n);
        for (Eigen::Index y = 0; y < n; ++y)
            next(y) = in_b[static_cast<std::size_t>(y)] ? v_prev[t + 1](y) : g[t + 1](y);
        g[t] = m.step_discount * (m.transition * next);
    }
    return g;
}

CascadeResult solve_finite_horizon(const StoppingProblem& p, int H) {
    const auto& m = p.chain();
    const VectorXd h = p.reward_table();
    const int n = p.n_exercises;
    const TimeTables h_t(static_cast<std::size_t>(H) + 1, h);

    CascadeResult out;
    auto& c = out.cascade;
    TimeTables v = snell_finite(m, h_t);
    c.values.push_back(v[0]);
    c.composite_rewards.push_back(h);
    c.stop.push_back(stop_mask(v[0], h));

    const bool refraction = std::holds_alternative<RefractionSet>(p.waiting);
    const auto in_b = refraction ? membership(m.size(), std::get<RefractionSet>(p.waiting).states)
                                 : std::vector<bool>{};
    const auto lags = lag_weights(p.waiting);

    for (int k = 2; k <= n; ++k) {
        const TimeTables g = refraction ? g_finite_refraction(m, v, in_b) : g_finite_lags(m, v, lags);
        TimeTables hk(g.size());
        for (std::size_t t = 0; t < g.size(); ++t) hk[t] = h + g[t];
        v = snell_finite(m, hk);
        c.g_tables.push_back(g[0]);
        c.composite_rewards.push_back(hk[0]);
        c.values.push_back(v[0]);
        c.stop.push_back(stop_mask(v[0], hk[0]));
    }
    return out;
}

}  // namespace

SingleStopResult single_stop_value(const FiniteMarkovModel& m, const VectorXd& reward, const SolveOptions& opt) {
    if (reward.size() != static_cast<Eigen::Index>(m.size())) throw InputError("reward size differs from state count");
    if (!(opt.convergence_tol > 0.0) || opt.max_iterations < 1) throw InputError("invalid solve options");

    SingleStopResult r;
    const double a = m.step_discount;
    VectorXd v = reward;
    if (opt.horizon) {
        if (*opt.horizon < 0) throw InputError("horizon must be nonnegative");
        for (int t = 0; t < *opt.horizon; ++t) v = reward.cwiseMax(a * (m.transition * v));
        r.iterations = *opt.horizon;
    } else {
        double res = 0.0;
        int it = 0;
        for (; it < opt.max_iterations; ++it) {
            VectorXd next = reward.cwiseMax(a * (m.transition * v));
            res = (next - v).cwiseAbs().maxCoeff();
            v = std::move(next);
            if (res < opt.convergence_tol) break;
        }
        if (it == opt.max_iterations) {
            std::ostringstream os;
            os << "value iteration did not converge in " << opt.max_iterations << " iterations (residual " << res
               << ")";
            throw SolverError(os.str(), res);
        }
        r.iterations = it + 1;
        r.residual = res;
    }
    r.stop = stop_mask(v, reward);
    r.value = std::move(v);
    return r;
}

VectorXd g_operator_independent_delay(const FiniteMarkovModel& m, const VectorXd& v_prev,
                                      const DiscreteDistribution& law) {
    std::map<int, double> lags;
    for (const auto& a : law.support) {
        if (!(a.value > 0.0)) throw InputError("delay must be positive");
        if (std::floor(a.value) != a.value) throw InputError("delays of a discrete-time chain must be integers");
        lags[static_cast<int>(a.value)] += a.probability;
    }
    VectorXd g = VectorXd::Zero(v_prev.size());
    VectorXd w = v_prev;
    int k = 0;
    for (const auto& [lag, prob] : lags) {
        for (; k < lag; ++k) w = m.step_discount * (m.transition * w);
        g += prob * w;
    }
    return g;
}

std::vector<std::size_t> states_missing_refraction_set(const FiniteMarkovModel& m,
                                                       const std::vector<std::size_t>& refraction_states) {
    const std::size_t n = m.size();
    const auto in_b = membership(n, refraction_states);
    std::vector<std::vector<std::size_t>> pred(n);
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = 0; y < n; ++y)
            if (m.transition(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) > 0.0) pred[y].push_back(x);

    // can_reach[x]: some path of length >= 1 from x enters B.
    std::vector<bool> can_reach(n, false);
    std::deque<std::size_t> queue;
    auto mark = [&](std::vector<bool>& flag, std::size_t x) {
        if (!flag[x]) {
            flag[x] = true;
            queue.push_back(x);
        }
    };
    for (std::size_t b = 0; b < n; ++b)
        if (in_b[b])
            for (auto x : pred[b]) mark(can_reach, x);
    while (!queue.empty()) {
        const auto y = queue.front();
        queue.pop_front();
        if (in_b[y]) continue;
        for (auto x : pred[y]) mark(can_reach, x);
    }

    // leads_to_trap[x]: a B-avoiding path of length >= 1 from x reaches a
    // state outside B that can never enter B.
    std::vector<bool> leads_to_trap(n, false);
    for (std::size_t z = 0; z < n; ++z)
        if (!in_b[z] && !can_reach[z])
            for (auto x : pred[z]) mark(leads_to_trap, x);
    while (!queue.empty()) {
        const auto y = queue.front();
        queue.pop_front();
        if (in_b[y]) continue;
        for (auto x : pred[y]) mark(leads_to_trap, x);
    }

    std::vector<std::size_t> bad;
    for (std::size_t x = 0; x < n; ++x)
        if (!can_reach[x] || leads_to_trap[x]) bad.push_back(x);
    return bad;
}

VectorXd g_operator_refraction_set(const FiniteMarkovModel& m, const VectorXd& v_prev,
                                   const std::vector<std::size_t>& refraction_states, const SolveOptions& opt) {
    const auto n = static_cast<Eigen::Index>(m.size());
    if (refraction_states.empty()) throw InputError("refraction set must be nonempty");
    const auto in_b = membership(m.size(), refraction_states);
    if (const auto bad = states_missing_refraction_set(m, refraction_states); !bad.empty())
        throw SolverError("refraction set is not reached almost surely from states {" + join_states(bad) + "}");

    const double a = m.step_discount;
    VectorXd v_on_b = VectorXd::Zero(n);
    Eigen::VectorXd outside = Eigen::VectorXd::Zero(n);
    for (Eigen::Index y = 0; y < n; ++y) {
        if (in_b[static_cast<std::size_t>(y)]) v_on_b(y) = v_prev(y);
        else outside(y) = 1.0;
    }
    // g = a P (1_B v + 1_C g)  <=>  (I - a P D_C) g = a P 1_B v.
    const VectorXd rhs = a * (m.transition * v_on_b);
    const Eigen::MatrixXd k_c = a * m.transition * outside.asDiagonal();
    if (n <= 2000) {
        const Eigen::MatrixXd sys = Eigen::MatrixXd::Identity(n, n) - k_c;
        return sys.partialPivLu().solve(rhs);
    }
    VectorXd g = rhs;
    double res = 0.0;
    for (int it = 0; it < opt.max_iterations; ++it) {
        VectorXd next = rhs + k_c * g;
        res = (next - g).cwiseAbs().maxCoeff();
        g = std::move(next);
        if (res < opt.convergence_tol) return g;
    }
    throw SolverError("refraction-set g iteration did not converge", res);
}

CascadeResult solve_cascade(const StoppingProblem& p, const SolveOptions& opt) {
    require_valid(p);
    const auto& m = p.chain();

    CascadeResult out;
    if (const auto* d = std::get_if<IndependentDelay>(&p.waiting); d && d->law.folded_tail > 0.0) {
        const double tail_discount = std::pow(m.step_discount, d->law.max_value());
        if (tail_discount > 1e-10) {
            std::ostringstream os;
            os << "delay law was truncated at " << d->law.max_value() << " where alpha^k = " << tail_discount
               << " > 1e-10; g carries truncation error";
            out.warnings.push_back(os.str());
        }
    }

    if (p.horizon) {
        auto fin = solve_finite_horizon(p, *p.horizon);
        out.cascade = std::move(fin.cascade);
    } else {
        SolveOptions o = opt;
        o.horizon.reset();
        const VectorXd h = p.reward_table();
        auto& c = out.cascade;
        auto r = single_stop_value(m, h, o);
        c.values.push_back(r.value);
        c.composite_rewards.push_back(h);
        c.stop.push_back(r.stop);
        for (int k = 2; k <= p.n_exercises; ++k) {
            const VectorXd& v_prev = c.values.back();
            VectorXd g = std::visit(
                overloaded{
                    [&](const IndependentDelay& d) { return g_operator_independent_delay(m, v_prev, d.law); },
                    [&](const RefractionSet& b) { return g_operator_refraction_set(m, v_prev, b.states, o); },
                    [&](const Deterministic& d) {
                        if (d.delta == 0.0) return VectorXd(v_prev);
                        return g_operator_independent_delay(m, v_prev, DiscreteDistribution::point_mass(d.delta));
                    },
                },
                p.waiting);
            VectorXd hk = h + g;
            auto rk = single_stop_value(m, hk, o);
            c.g_tables.push_back(std::move(g));
            c.composite_rewards.push_back(std::move(hk));
            c.values.push_back(std::move(rk.value));
            c.stop.push_back(std::move(rk.stop));
        }
    }

    out.policy.waiting = p.waiting;
    for (int i = 0; i < p.n_exercises; ++i) {
        const auto& mask = out.cascade.stop[static_cast<std::size_t>(p.n_exercises - 1 - i)];
        StoppingSetRule rule;
        for (std::size_t x = 0; x < mask.size(); ++x)
            if (mask[x]) rule.states.push_back(x);
        out.policy.per_exercise_rules.emplace_back(std::move(rule));
    }
    return out;
}

void write_cascade_csv(std::ostream& os, const FiniteMarkovModel& m, const ValueCascade& c) {
    const std::size_t n = c.values.size();
    std::ostringstream buf;
    buf.imbue(std::locale::classic());
    buf << std::setprecision(17);
    buf << "state";
    for (std::size_t k = 1; k <= n; ++k) buf << ",V_" << k;
    for (std::size_t k = 1; k < n; ++k) buf << ",g_" << k;
    for (std::size_t k = 2; k <= n; ++k) buf << ",h_" << k;
    for (std::size_t k = 1; k <= n; ++k) buf << ",stop_" << k;
    buf << '\n';
    for (std::size_t x = 0; x < m.size(); ++x) {
        const auto i = static_cast<Eigen::Index>(x);
        buf << m.states[x];
        for (std::size_t k = 0; k < n; ++k) buf << ',' << c.values[k](i);
        for (std::size_t k = 0; k + 1 < n; ++k) buf << ',' << c.g_tables[k](i);
        for (std::size_t k = 1; k < n; ++k) buf << ',' << c.composite_rewards[k](i);
        for (std::size_t k = 0; k < n; ++k) buf << ',' << (c.stop[k][x] ? 1 : 0);
        buf << '\n';
    }
    os << buf.str();
}

}  // namespace multistop::dp
