#include "multistop/mc.hpp"

#include "internal.hpp"
#include "multistop/dp.hpp"
#include "multistop/errors.hpp"

#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

namespace multistop::mc {

using detail::overloaded;

unsigned resolve_threads(unsigned requested) {
    unsigned n = requested;
    if (n == 0) {
        n = std::max(1u, std::thread::hardware_concurrency());
        if (const char* env = std::getenv("MULTISTOP_THREADS")) {
            const long cap = std::strtol(env, nullptr, 10);
            if (cap > 0) n = std::min(n, static_cast<unsigned>(cap));
        }
    }
    return n;
}

namespace {

/// Runs body(i) for i in [0, n) over contiguous blocks, one block per worker.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t block = (n + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
        const std::size_t lo = w * block;
        const std::size_t hi = std::min(n, lo + block);
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

/// Mean and standard error, shifted by the first payoff so that constant
/// samples give their value exactly and a zero error.
void summarize(const std::vector<double>& payoffs, EvalReport& r) {
    const std::size_t n = payoffs.size();
    const double shift = payoffs.front();
    std::vector<double> tmp(n);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = payoffs[i] - shift;
    const double mean_dev = detail::pairwise_sum(tmp) / static_cast<double>(n);
    r.estimate = shift + mean_dev;
    if (n > 1) {
        for (std::size_t i = 0; i < n; ++i) {
            const double d = payoffs[i] - shift - mean_dev;
            tmp[i] = d * d;
        }
        const double var = detail::pairwise_sum(tmp) / static_cast<double>(n - 1);
        r.std_error = std::sqrt(var / static_cast<double>(n));
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Finite chains

EvalReport evaluate_policy_chain(const StoppingProblem& p, const ThresholdPolicy& pol, std::size_t initial_state,
                                 std::size_t n_paths, std::uint64_t seed, const McOptions& opt) {
    require_valid(p);
    const auto& m = p.chain();
    if (n_paths == 0) throw InputError("need at least one path");
    if (pol.per_exercise_rules.size() != static_cast<std::size_t>(p.n_exercises))
        throw InputError("policy length differs from the number of exercise rights");
    if (initial_state >= m.size()) throw InputError("initial state out of range");

    const std::size_t S = m.size();
    const int n = p.n_exercises;
    const double alpha = m.step_discount;
    const Eigen::VectorXd h = p.reward_table();

    std::vector<std::vector<double>> cdf(S, std::vector<double>(S));
    for (std::size_t x = 0; x < S; ++x) {
        double c = 0.0;
        for (std::size_t y = 0; y < S; ++y) {
            c += m.transition(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
            cdf[x][y] = c;
        }
    }
    std::vector<std::vector<bool>> stops(static_cast<std::size_t>(n), std::vector<bool>(S));
    for (int i = 0; i < n; ++i)
        for (std::size_t x = 0; x < S; ++x)
            stops[static_cast<std::size_t>(i)][x] = rule_stops(pol.per_exercise_rules[static_cast<std::size_t>(i)], x, m.states[x]);

    const bool refraction = std::holds_alternative<RefractionSet>(p.waiting);
    std::vector<bool> in_b(S, false);
    if (refraction)
        for (auto s : std::get<RefractionSet>(p.waiting).states) in_b[s] = true;

    EvalReport rep;
    rep.n_paths = n_paths;
    rep.seed = seed;
    long T = 0;
    const double h_max = h.maxCoeff();
    if (p.horizon) {
        T = *p.horizon;
    } else {
        T = static_cast<long>(std::ceil(std::log(1e-10) / std::log(alpha)));
        rep.truncation_bound = n * std::pow(alpha, static_cast<double>(T + 1)) * h_max;
    }
    rep.truncation_horizon = static_cast<double>(T);

    auto next_state = [&](std::size_t x, Rng& rng) {
        const double u = rng.uniform();
        const auto& row = cdf[x];
        auto it = std::upper_bound(row.begin(), row.end(), u);
        std::size_t y = static_cast<std::size_t>(it - row.begin());
        if (y >= S) {   // u above a row sum rounded below 1
            y = S - 1;
            while (m.transition(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) == 0.0) --y;
        }
        return y;
    };

    std::vector<double> payoffs(n_paths);
    std::vector<std::size_t> violations(n_paths, 0);
    parallel_for(n_paths, resolve_threads(opt.threads), [&](std::size_t path) {
        Rng rng = Rng::substream(seed, path);
        std::size_t x = initial_state;
        double disc = 1.0;
        double total = 0.0;
        int used = 0;
        long next_allowed = 0;   // Model 1 / deterministic
        bool blocked = false;    // Model 2
        std::vector<long> ex_time;
        std::vector<long> ex_delay;
        std::vector<std::size_t> trail{x};
        for (long t = 0;; ++t) {
            while (used < n && (refraction ? !blocked : t >= next_allowed) && stops[static_cast<std::size_t>(used)][x]) {
                total += disc * h(static_cast<Eigen::Index>(x));
                ex_time.push_back(t);
                ++used;
                if (used == n) break;
                if (refraction) {
                    blocked = true;
                    ex_delay.push_back(0);
                } else {
                    const auto d = static_cast<long>(sample_delay(p.waiting, rng));
                    ex_delay.push_back(d);
                    next_allowed = t + d;
                }
            }
            if (used == n || t == T) break;
            x = next_state(x, rng);
            disc *= alpha;
            if (refraction) {
                trail.push_back(x);
                if (blocked && in_b[x]) blocked = false;
            }
        }
        // Independent audit of the waiting constraint on the recorded trace.
        for (std::size_t i = 0; i + 1 < ex_time.size(); ++i) {
            if (refraction) {
                bool entered = false;
                for (long s = ex_time[i] + 1; s <= ex_time[i + 1]; ++s) entered = entered || in_b[trail[static_cast<std::size_t>(s)]];
                if (!entered) ++violations[path];
            } else if (ex_time[i] + ex_delay[i] > ex_time[i + 1]) {
                ++violations[path];
            }
        }
        payoffs[path] = total;
    });

    for (auto v : violations) rep.admissibility_violations += v;
    summarize(payoffs, rep);
    if (opt.keep_payoffs) rep.payoffs = std::move(payoffs);
    return rep;
}

// ---------------------------------------------------------------------------
// GBM

EvalReport evaluate_policy_gbm(const GbmModel& g, double strike, const ThresholdPolicy& pol, std::size_t n_paths,
                               double dt, double t_max, std::uint64_t seed, const McOptions& opt) {
    if (!(g.x0 > 0.0) || !(g.sigma > 0.0) || !(g.beta > 0.0)) throw InputError("invalid GBM parameters");
    if (g.beta < 0.5 * g.sigma * g.sigma)
        throw InputError("beta < sigma^2/2: refraction times are not a.s. finite (require beta >= sigma^2/2)");
    if (!(strike > 0.0)) throw InputError("strike must be positive");
    if (!(dt > 0.0) || !(t_max >= dt) || !std::isfinite(t_max)) throw InputError("invalid time grid");
    if (n_paths == 0) throw InputError("need at least one path");
    if (pol.per_exercise_rules.empty()) throw InputError("policy has no exercise rules");
    const auto* refr = std::get_if<RefractionSet>(&pol.waiting);
    if (refr == nullptr || !refr->level) throw InputError("GBM policy needs a RefractionSet level z0");
    const double z0 = *refr->level;

    std::vector<double> log_level;
    for (const auto& r : pol.per_exercise_rules) {
        const auto* t = std::get_if<ThresholdRule>(&r);
        if (t == nullptr || t->direction != Direction::below || !(t->level > 0.0))
            throw InputError("GBM policy rules must be positive 'below' thresholds");
        log_level.push_back(std::log(t->level));
    }
    const std::size_t n = log_level.size();
    const auto steps = static_cast<long>(std::llround(t_max / dt));
    const double drift = (g.beta - 0.5 * g.sigma * g.sigma) * dt;
    const double vol = g.sigma * std::sqrt(dt);
    const double log_z0 = std::log(z0);
    const double log_x0 = std::log(g.x0);

    EvalReport rep;
    rep.n_paths = n_paths;
    rep.seed = seed;
    rep.truncation_horizon = static_cast<double>(steps) * dt;
    rep.truncation_bound = static_cast<double>(n) * strike * std::exp(-g.beta * rep.truncation_horizon);
    {
        std::ostringstream os;
        os << "exercise and refraction monitored on a grid with dt = " << dt
           << "; level crossings between grid points are missed (bias of order sigma*sqrt(dt))";
        rep.warnings.push_back(os.str());
        if (std::exp(-g.beta * t_max) * strike > 1e-4 * strike) {
            std::ostringstream tw;
            tw << "horizon truncation: exp(-beta*T_max)*K = " << std::exp(-g.beta * t_max) * strike
               << " exceeds 1e-4*K; increase T_max";
            rep.warnings.push_back(tw.str());
        }
    }

    std::vector<double> payoffs(n_paths);
    std::vector<std::size_t> violations(n_paths, 0);
    parallel_for(n_paths, resolve_threads(opt.threads), [&](std::size_t path) {
        Rng rng = Rng::substream(seed, path);
        boost::random::normal_distribution<double> normal;
        auto& eng = rng.engine();
        double y = log_x0;
        double total = 0.0;
        std::size_t used = 0;
        bool blocked = false;
        double max_since = std::numeric_limits<double>::infinity();
        long j = 0;
        while (true) {
            if (!blocked && y <= log_level[used]) {
                if (max_since < log_z0) ++violations[path];
                const double a = std::exp(y);
                total += std::exp(-g.beta * static_cast<double>(j) * dt) * std::max(strike - a, 0.0);
                if (++used == n) break;
                blocked = true;
                max_since = -std::numeric_limits<double>::infinity();
            }
            if (j == steps) break;
            if (blocked) {
                // Refraction: advance until the first grid time with A >= z0.
                while (j < steps) {
                    y += drift + vol * normal(eng);
                    ++j;
                    max_since = std::max(max_since, y);
                    if (y >= log_z0) {
                        blocked = false;
                        break;
                    }
                }
                continue;
            }
            const double lvl = log_level[used];
            while (j < steps) {
                y += drift + vol * normal(eng);
                ++j;
                if (y <= lvl) break;
            }
        }
        payoffs[path] = total;
    });

    for (auto v : violations) rep.admissibility_violations += v;
    summarize(payoffs, rep);
    if (opt.keep_payoffs) rep.payoffs = std::move(payoffs);
    return rep;
}

// ---------------------------------------------------------------------------
// Brute force

namespace {

class HistoryTree {
public:
    HistoryTree(const StoppingProblem& p, std::size_t cap)
        : m_(p.chain()), h_(p.reward_table()), horizon_(*p.horizon), cap_(cap) {
        std::visit(overloaded{
                       [&](const IndependentDelay& d) {
                           for (const auto& a : d.law.support)
                               if (a.probability > 0.0) delays_.push_back({static_cast<int>(a.value), a.probability});
                       },
                       [&](const Deterministic& d) { delays_.push_back({static_cast<int>(d.delta), 1.0}); },
                       [&](const RefractionSet& b) {
                           refraction_ = true;
                           in_b_.assign(m_.size(), false);
                           for (auto s : b.states) in_b_[s] = true;
                       },
                   },
                   p.waiting);
    }

    /// Best expected payoff, discounted to time 0, from a node where `wait`
    /// is the number of steps until exercising is allowed (Model 1) or 1 while
    /// re-entry into B is pending (Model 2).
    double node(int t, std::size_t x, int rights, int wait) {
        if (++visited_ > cap_) throw SolverError("brute force exceeded its cap of evaluated histories");
        if (rights == 0) return 0.0;
        double best = 0.0;
        if (t < horizon_) {
            double cont = 0.0;
            for (std::size_t y = 0; y < m_.size(); ++y) {
                const double pr = m_.transition(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
                if (pr == 0.0) continue;
                int next_wait = 0;
                if (refraction_) next_wait = (wait != 0 && !in_b_[y]) ? 1 : 0;
                else next_wait = std::max(wait - 1, 0);
                cont += pr * node(t + 1, y, rights, next_wait);
            }
            best = cont;
        }
        if (wait == 0) {
            double ex = std::pow(m_.step_discount, t) * h_(static_cast<Eigen::Index>(x));
            if (rights > 1) {
                if (refraction_) {
                    ex += node(t, x, rights - 1, 1);
                } else {
                    // The delay is revealed at the moment of exercise.
                    for (const auto& [d, pr] : delays_) ex += pr * node(t, x, rights - 1, d);
                }
            }
            best = std::max(best, ex);
        }
        return best;
    }

private:
    const FiniteMarkovModel& m_;
    Eigen::VectorXd h_;
    int horizon_;
    std::size_t cap_;
    std::size_t visited_ = 0;
    bool refraction_ = false;
    std::vector<bool> in_b_;
    std::vector<std::pair<int, double>> delays_;
};

}  // namespace

std::vector<double> brute_force_value(const StoppingProblem& p, std::size_t node_cap) {
    require_valid(p);
    if (!p.horizon) throw InputError("brute force needs a finite horizon");
    HistoryTree tree(p, node_cap);
    std::vector<double> out;
    for (std::size_t x = 0; x < p.chain().size(); ++x) out.push_back(tree.node(0, x, p.n_exercises, 0));
    return out;
}

StoppingProblem random_tiny_problem(Rng& rng, int kind) {
    auto uniform_int = [&](int lo, int hi) { return lo + static_cast<int>(rng.uniform() * (hi - lo + 1)); };
    const int S = uniform_int(1, 5);

    FiniteMarkovModel m;
    m.step_discount = 0.5 + 0.49 * rng.uniform();
    m.transition = Eigen::MatrixXd::Zero(S, S);
    for (int x = 0; x < S; ++x) {
        m.states.push_back(static_cast<double>(x));
        std::vector<double> w(static_cast<std::size_t>(S));
        double total = 0.0;
        for (auto& v : w) {
            v = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
            total += v;
        }
        if (total == 0.0) {
            w[static_cast<std::size_t>(uniform_int(0, S - 1))] = 1.0;
            total = 1.0;
        }
        int last = S - 1;
        while (w[static_cast<std::size_t>(last)] == 0.0) --last;
        double acc = 0.0;
        for (int y = 0; y < S; ++y) {
            if (y == last) continue;
            m.transition(x, y) = w[static_cast<std::size_t>(y)] / total;
            acc += m.transition(x, y);
        }
        m.transition(x, last) = 1.0 - acc;
    }

    TabulatedReward h;
    for (int x = 0; x < S; ++x) h.values.push_back(rng.uniform() < 0.2 ? 0.0 : 10.0 * rng.uniform());

    WaitingModel w;
    switch (kind) {
        case 0: {
            DiscreteDistribution law;
            double total = 0.0;
            for (int d = 1; d <= 3; ++d) {
                if (rng.uniform() < 0.6 || (d == 3 && law.support.empty())) {
                    const double pw = 0.1 + rng.uniform();
                    law.support.push_back({static_cast<double>(d), pw});
                    total += pw;
                }
            }
            double acc = 0.0;
            for (std::size_t i = 0; i + 1 < law.support.size(); ++i) {
                law.support[i].probability /= total;
                acc += law.support[i].probability;
            }
            law.support.back().probability = 1.0 - acc;
            w = IndependentDelay{law};
            break;
        }
        case 1: {
            RefractionSet b;
            for (int x = 0; x < S; ++x)
                if (rng.uniform() < 0.5) b.states.push_back(static_cast<std::size_t>(x));
            if (b.states.empty()) b.states.push_back(static_cast<std::size_t>(uniform_int(0, S - 1)));
            w = b;
            break;
        }
        default:
            w = Deterministic{static_cast<double>(uniform_int(0, 2))};
    }

    StoppingProblem p{m, h, uniform_int(1, 2), w, uniform_int(0, 5)};
    return p;
}

OracleCheckResult oracle_check(std::size_t instances, std::uint64_t seed, double tol) {
    OracleCheckResult res;
    Rng rng(seed);
    for (std::size_t i = 0; i < instances; ++i) {
        const auto p = random_tiny_problem(rng, static_cast<int>(i % 3));
        const auto brute = brute_force_value(p);
        const auto dp = dp::solve_cascade(p);
        const auto& v = dp.cascade.values.back();
        ++res.instances;
        double worst = 0.0;
        for (std::size_t x = 0; x < brute.size(); ++x)
            worst = std::max(worst, std::abs(brute[x] - v(static_cast<Eigen::Index>(x))));
        res.max_abs_diff = std::max(res.max_abs_diff, worst);
        if (!(worst <= tol)) {
            ++res.mismatches;
            std::ostringstream os;
            os << "instance " << i << ": |brute - dp| = " << worst;
            res.failures.push_back(os.str());
        }
    }
    return res;
}

}  // namespace multistop::mc
