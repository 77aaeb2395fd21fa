#include "multistop/io.hpp"

#include "internal.hpp"
#include "multistop/errors.hpp"

#include <fstream>
#include <regex>
#include <sstream>

namespace multistop::io {

using detail::overloaded;

namespace {

const json& field(const json& j, const char* key, const std::string& where) {
    if (!j.is_object()) throw InputError(where + ": expected an object");
    const auto it = j.find(key);
    if (it == j.end()) throw InputError(where + "." + key + ": missing field");
    return *it;
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) throw InputError(where + ": expected a number");
    return j.get<double>();
}

long integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) throw InputError(where + ": expected an integer");
    return j.get<long>();
}

std::string text(const json& j, const std::string& where) {
    if (!j.is_string()) throw InputError(where + ": expected a string");
    return j.get<std::string>();
}

std::vector<double> numbers(const json& j, const std::string& where) {
    if (!j.is_array()) throw InputError(where + ": expected an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

std::vector<std::size_t> indices(const json& j, const std::string& where) {
    if (!j.is_array()) throw InputError(where + ": expected an array of state indices");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const long v = integer(j[i], where + "[" + std::to_string(i) + "]");
        if (v < 0) throw InputError(where + "[" + std::to_string(i) + "]: negative state index");
        out.push_back(static_cast<std::size_t>(v));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::string format_number(double v) { return json(v).dump(); }

}  // namespace

json to_json(const DiscreteDistribution& d) {
    json support = json::array();
    for (const auto& a : d.support) support.push_back({{"value", a.value}, {"probability", a.probability}});
    return {{"support", support}};
}

DiscreteDistribution distribution_from_json(const json& j, const std::string& where) {
    const auto& s = field(j, "support", where);
    if (!s.is_array()) throw InputError(where + ".support: expected an array");
    DiscreteDistribution d;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const std::string w = where + ".support[" + std::to_string(i) + "]";
        d.support.push_back({number(field(s[i], "value", w), w + ".value"),
                             number(field(s[i], "probability", w), w + ".probability")});
    }
    return d;
}

json to_json(const WaitingModel& w) {
    return std::visit(overloaded{
                          [](const IndependentDelay& d) -> json {
                              return {{"type", "IndependentDelay"}, {"law", to_json(d.law)}};
                          },
                          [](const RefractionSet& b) -> json {
                              if (b.level) return {{"type", "RefractionSet"}, {"B", {{"level", *b.level}}}};
                              return {{"type", "RefractionSet"}, {"B", b.states}};
                          },
                          [](const Deterministic& d) -> json {
                              return {{"type", "Deterministic"}, {"delta", d.delta}};
                          },
                      },
                      w);
}

WaitingModel waiting_from_json(const json& j, const std::string& where) {
    const auto type = text(field(j, "type", where), where + ".type");
    if (type == "IndependentDelay") return IndependentDelay{distribution_from_json(field(j, "law", where), where + ".law")};
    if (type == "Deterministic") return Deterministic{number(field(j, "delta", where), where + ".delta")};
    if (type == "RefractionSet") {
        const auto& b = field(j, "B", where);
        RefractionSet r;
        if (b.is_object()) r.level = number(field(b, "level", where + ".B"), where + ".B.level");
        else r.states = indices(b, where + ".B");
        return r;
    }
    throw InputError(where + ".type: unknown waiting model '" + type + "'");
}

json to_json(const StoppingProblem& p) {
    json j;
    j["dynamics"] = std::visit(overloaded{
                                   [](const FiniteMarkovModel& m) -> json {
                                       json rows = json::array();
                                       for (Eigen::Index i = 0; i < m.transition.rows(); ++i) {
                                           json row = json::array();
                                           for (Eigen::Index k = 0; k < m.transition.cols(); ++k) row.push_back(m.transition(i, k));
                                           rows.push_back(row);
                                       }
                                       return {{"type", "FiniteMarkovModel"},
                                               {"states", m.states},
                                               {"transition", rows},
                                               {"step_discount", m.step_discount}};
                                   },
                                   [](const GbmModel& g) -> json {
                                       return {{"type", "GbmModel"}, {"x0", g.x0}, {"sigma", g.sigma}, {"beta", g.beta}};
                                   },
                               },
                               p.dynamics);
    j["reward"] = std::visit(overloaded{
                                 [](const TabulatedReward& r) -> json { return r.values; },
                                 [](const PutReward& r) -> json { return "put(" + format_number(r.strike) + ")"; },
                             },
                             p.reward);
    j["n_exercises"] = p.n_exercises;
    j["waiting"] = to_json(p.waiting);
    j["horizon"] = p.horizon ? json(*p.horizon) : json("inf");
    return j;
}

StoppingProblem problem_from_json(const json& j) {
    StoppingProblem p;
    const auto& dyn = field(j, "dynamics", "problem");
    const auto type = text(field(dyn, "type", "dynamics"), "dynamics.type");
    if (type == "FiniteMarkovModel") {
        FiniteMarkovModel m;
        m.states = numbers(field(dyn, "states", "dynamics"), "dynamics.states");
        const auto& rows = field(dyn, "transition", "dynamics");
        if (!rows.is_array()) throw InputError("dynamics.transition: expected an array of rows");
        const auto n = static_cast<Eigen::Index>(rows.size());
        m.transition.resize(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const std::string w = "dynamics.transition[" + std::to_string(i) + "]";
            const auto row = numbers(rows[static_cast<std::size_t>(i)], w);
            if (static_cast<Eigen::Index>(row.size()) != n) throw InputError(w + ": row length differs from row count");
            for (Eigen::Index k = 0; k < n; ++k) m.transition(i, k) = row[static_cast<std::size_t>(k)];
        }
        m.step_discount = number(field(dyn, "step_discount", "dynamics"), "dynamics.step_discount");
        p.dynamics = std::move(m);
    } else if (type == "GbmModel") {
        p.dynamics = GbmModel{number(field(dyn, "x0", "dynamics"), "dynamics.x0"),
                              number(field(dyn, "sigma", "dynamics"), "dynamics.sigma"),
                              number(field(dyn, "beta", "dynamics"), "dynamics.beta")};
    } else {
        throw InputError("dynamics.type: unknown dynamics '" + type + "'");
    }

    const auto& rew = field(j, "reward", "problem");
    if (rew.is_string()) {
        static const std::regex put_re(R"(^\s*put\(\s*([^)\s]+)\s*\)\s*$)");
        const auto s = rew.get<std::string>();
        std::smatch match;
        if (!std::regex_match(s, match, put_re)) throw InputError("reward: expected a table or \"put(K)\"");
        try {
            p.reward = PutReward{std::stod(match[1].str())};
        } catch (const std::exception&) {
            throw InputError("reward: strike in \"" + s + "\" is not a number");
        }
    } else {
        p.reward = TabulatedReward{numbers(rew, "reward")};
    }

    p.n_exercises = static_cast<int>(integer(field(j, "n_exercises", "problem"), "n_exercises"));
    p.waiting = waiting_from_json(field(j, "waiting", "problem"));

    const auto it = j.find("horizon");
    if (it == j.end() || it->is_null() || (it->is_string() && it->get<std::string>() == "inf")) p.horizon.reset();
    else p.horizon = static_cast<int>(integer(*it, "horizon"));
    return p;
}

json to_json(const ThresholdPolicy& p) {
    json rules = json::array();
    for (const auto& r : p.per_exercise_rules) {
        rules.push_back(std::visit(overloaded{
                                       [](const StoppingSetRule& s) -> json {
                                           return {{"type", "StoppingSet"}, {"states", s.states}};
                                       },
                                       [](const ThresholdRule& t) -> json {
                                           return {{"type", "Threshold"},
                                                   {"direction", t.direction == Direction::above ? "above" : "below"},
                                                   {"level", t.level}};
                                       },
                                   },
                                   r));
    }
    return {{"per_exercise_rules", rules}, {"waiting", to_json(p.waiting)}};
}

ThresholdPolicy policy_from_json(const json& j) {
    ThresholdPolicy pol;
    const auto& rules = field(j, "per_exercise_rules", "policy");
    if (!rules.is_array()) throw InputError("policy.per_exercise_rules: expected an array");
    for (std::size_t i = 0; i < rules.size(); ++i) {
        const std::string w = "policy.per_exercise_rules[" + std::to_string(i) + "]";
        const auto type = text(field(rules[i], "type", w), w + ".type");
        if (type == "StoppingSet") {
            pol.per_exercise_rules.emplace_back(StoppingSetRule{indices(field(rules[i], "states", w), w + ".states")});
        } else if (type == "Threshold") {
            const auto dir = text(field(rules[i], "direction", w), w + ".direction");
            if (dir != "above" && dir != "below") throw InputError(w + ".direction: expected 'above' or 'below'");
            const double level = number(field(rules[i], "level", w), w + ".level");
            if (!std::isfinite(level)) throw InputError(w + ".level: threshold must be finite");
            pol.per_exercise_rules.emplace_back(ThresholdRule{dir == "above" ? Direction::above : Direction::below, level});
        } else {
            throw InputError(w + ".type: unknown rule '" + type + "'");
        }
    }
    pol.waiting = waiting_from_json(field(j, "waiting", "policy"), "policy.waiting");
    return pol;
}

json to_json(const mc::EvalReport& r) {
    return {{"estimate", r.estimate},
            {"std_error", r.std_error},
            {"n_paths", r.n_paths},
            {"seed", r.seed},
            {"truncation_horizon", r.truncation_horizon},
            {"truncation_bound", r.truncation_bound},
            {"admissibility_violations", r.admissibility_violations},
            {"warnings", r.warnings}};
}

json to_json(const closedform::HouseSolution& s) {
    json law = std::visit(overloaded{
                              [](const DiscreteDistribution& d) { return to_json(d); },
                              [](const closedform::UniformLaw& u) -> json {
                                  return {{"type", "Uniform"}, {"a", u.a}, {"b", u.b}};
                              },
                          },
                          s.offer_law);
    json levels = json::array();
    for (std::size_t k = 0; k < s.levels.size(); ++k) {
        const auto& l = s.levels[k];
        levels.push_back({{"k", k + 1},
                          {"shift", l.shift},
                          {"threshold", l.threshold},
                          {"offer_cutoff", l.offer_cutoff()},
                          {"expected_value", l.expected_value}});
    }
    return {{"alpha", s.alpha}, {"offer_law", law}, {"delay_discount", s.delay_discount}, {"levels", levels}};
}

json to_json(const closedform::PutSolution& s) {
    return {{"K", s.strike}, {"sigma", s.sigma}, {"beta", s.beta}, {"z0", s.z0},
            {"gamma", s.gamma}, {"x_star", s.x_star}, {"c", s.c}};
}

json to_json(const ValueCascade& c) {
    auto vecs = [](const std::vector<Eigen::VectorXd>& v) {
        json out = json::array();
        for (const auto& t : v) out.push_back(std::vector<double>(t.data(), t.data() + t.size()));
        return out;
    };
    json stop = json::array();
    for (const auto& s : c.stop) stop.push_back(std::vector<bool>(s));
    return {{"values", vecs(c.values)},
            {"g_tables", vecs(c.g_tables)},
            {"composite_rewards", vecs(c.composite_rewards)},
            {"stop", stop}};
}

json parse(const std::string& content, const std::string& source) {
    try {
        return json::parse(content);
    } catch (const json::parse_error& e) {
        // Translate the byte offset into line and column.
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < content.size(); ++i) {
            if (content[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw InputError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
    }
}

json read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace multistop::io
