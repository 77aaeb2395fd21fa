#include "multistop/cli.hpp"

#include "multistop/closedform.hpp"
#include "multistop/dp.hpp"
#include "multistop/errors.hpp"
#include "multistop/io.hpp"
#include "multistop/mc.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <locale>
#include <ostream>
#include <sstream>

namespace multistop::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write '" + path.string() + "'");
    f << content;
}

std::ostringstream table_stream() {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    return os;
}

void check_format(const std::string& f) {
    if (f != "csv" && f != "json" && f != "table") throw InputError("--format must be csv, json or table");
}

int solve_dp(const RunConfig& cfg, std::ostream& out) {
    const auto problem = io::problem_from_json(io::read_file(cfg.input));
    const auto res = dp::solve_cascade(problem);
    const auto& m = problem.chain();

    std::ostringstream csv;
    dp::write_cascade_csv(csv, m, res.cascade);
    const fs::path dir(cfg.output_dir);
    write_text(dir / "cascade.csv", csv.str());
    write_text(dir / "policy.json", io::dump(io::to_json(res.policy)));

    if (cfg.format == "csv") {
        out << csv.str();
    } else if (cfg.format == "json") {
        out << io::dump({{"cascade", io::to_json(res.cascade)}, {"policy", io::to_json(res.policy)}});
    } else {
        auto os = table_stream();
        const std::size_t n = res.cascade.values.size();
        os << std::setw(12) << "state";
        for (std::size_t k = 1; k <= n; ++k) os << std::setw(14) << ("V_" + std::to_string(k));
        for (std::size_t k = 1; k <= n; ++k) os << std::setw(8) << ("stop_" + std::to_string(k));
        os << '\n' << std::setprecision(8);
        for (std::size_t x = 0; x < m.size(); ++x) {
            os << std::setw(12) << m.states[x];
            for (std::size_t k = 0; k < n; ++k) os << std::setw(14) << res.cascade.values[k](static_cast<Eigen::Index>(x));
            for (std::size_t k = 0; k < n; ++k) os << std::setw(8) << (res.cascade.stop[k][x] ? 1 : 0);
            os << '\n';
        }
        out << os.str();
    }
    for (const auto& w : res.warnings) out << "warning: " << w << '\n';
    return kOk;
}

int solve_house(const RunConfig& cfg, std::ostream& out) {
    closedform::OfferLaw offer = closedform::UniformLaw{cfg.uniform_a, cfg.uniform_b};
    if (!cfg.offer_law_file.empty()) offer = io::distribution_from_json(io::read_file(cfg.offer_law_file), "offer_law");
    const DiscreteDistribution delay = cfg.delay_law_file.empty()
                                           ? DiscreteDistribution::geometric_for_discount(cfg.delay_geometric_p, cfg.alpha)
                                           : io::distribution_from_json(io::read_file(cfg.delay_law_file), "delay_law");
    const auto sol = closedform::solve_house(offer, cfg.alpha, delay, cfg.n);

    io::json doc = io::to_json(sol);
    doc["input"] = {{"alpha", cfg.alpha}, {"n", cfg.n}, {"delay_law", io::to_json(delay)}};
    write_text(fs::path(cfg.output_dir) / "house_solution.json", io::dump(doc));

    if (cfg.format == "json") {
        out << io::dump(doc);
        return kOk;
    }
    auto os = table_stream();
    os << std::setprecision(10);
    os << std::setw(4) << "k" << std::setw(16) << "threshold" << std::setw(16) << "shift" << std::setw(16)
       << "offer_cutoff" << std::setw(16) << "E[V_k(X)]" << '\n';
    for (std::size_t k = 0; k < sol.levels.size(); ++k) {
        const auto& l = sol.levels[k];
        os << std::setw(4) << k + 1 << std::setw(16) << l.threshold << std::setw(16) << l.shift << std::setw(16)
           << l.offer_cutoff() << std::setw(16) << l.expected_value << '\n';
    }
    os << "delay discount E[alpha^delta] = " << sol.delay_discount << '\n';
    out << os.str();
    return kOk;
}

int solve_put(const RunConfig& cfg, std::ostream& out) {
    const double z0 = cfg.z0.value_or(cfg.strike);
    const auto sol = closedform::solve_put(cfg.strike, cfg.sigma, cfg.beta, z0, cfg.n);
    const double x0 = cfg.x0.value_or(z0);

    io::json doc = io::to_json(sol);
    doc["input"] = {{"K", cfg.strike}, {"sigma", cfg.sigma}, {"beta", cfg.beta}, {"z0", z0}, {"n", cfg.n}, {"x0", x0}};
    io::json values = io::json::array();
    for (std::size_t k = 1; k <= sol.x_star.size(); ++k) values.push_back(sol.value(k, x0));
    doc["value_at_x0"] = values;
    write_text(fs::path(cfg.output_dir) / "put_solution.json", io::dump(doc));

    if (cfg.format == "json") {
        out << io::dump(doc);
        return kOk;
    }
    auto os = table_stream();
    os << std::setprecision(10);
    os << std::setw(4) << "k" << std::setw(16) << "x_k*" << std::setw(16) << "c_{k-1}" << std::setw(16) << "V_k(x0)"
       << '\n';
    for (std::size_t k = 1; k <= sol.x_star.size(); ++k)
        os << std::setw(4) << k << std::setw(16) << sol.x_star[k - 1] << std::setw(16)
           << (k == 1 ? 0.0 : sol.c[k - 2]) << std::setw(16) << sol.value(k, x0) << '\n';
    os << "gamma = " << sol.gamma << ", x0 = " << x0 << '\n';
    out << os.str();
    return kOk;
}

int simulate(const RunConfig& cfg, std::ostream& out) {
    const auto problem = io::problem_from_json(io::read_file(cfg.input));
    require_valid(problem);
    mc::McOptions opt;
    opt.keep_payoffs = !cfg.payoffs_csv.empty();

    mc::EvalReport rep;
    if (problem.is_finite_chain()) {
        const ThresholdPolicy pol = cfg.policy_file.empty() ? dp::solve_cascade(problem).policy
                                                            : io::policy_from_json(io::read_file(cfg.policy_file));
        rep = mc::evaluate_policy_chain(problem, pol, cfg.initial_state, cfg.paths, cfg.seed, opt);
    } else {
        const auto& g = problem.gbm();
        const double strike = std::get<PutReward>(problem.reward).strike;
        ThresholdPolicy pol;
        if (cfg.policy_file.empty()) {
            const auto* b = std::get_if<RefractionSet>(&problem.waiting);
            if (b == nullptr || !b->level) throw InputError("waiting: GBM simulation needs a RefractionSet level");
            const auto sol = closedform::solve_put(strike, g.sigma, g.beta, *b->level, problem.n_exercises);
            for (std::size_t i = sol.x_star.size(); i-- > 0;)
                pol.per_exercise_rules.emplace_back(ThresholdRule{Direction::below, sol.x_star[i]});
            pol.waiting = problem.waiting;
        } else {
            pol = io::policy_from_json(io::read_file(cfg.policy_file));
        }
        rep = mc::evaluate_policy_gbm(g, strike, pol, cfg.paths, cfg.dt, cfg.t_max, cfg.seed, opt);
    }

    write_text(fs::path(cfg.output_dir) / "eval_report.json", io::dump(io::to_json(rep)));
    if (!cfg.payoffs_csv.empty()) {
        auto os = table_stream();
        os << std::setprecision(17) << "path,payoff\n";
        for (std::size_t i = 0; i < rep.payoffs.size(); ++i) os << i << ',' << rep.payoffs[i] << '\n';
        write_text(cfg.payoffs_csv, os.str());
    }
    if (cfg.format == "json") {
        out << io::dump(io::to_json(rep));
    } else {
        auto os = table_stream();
        os << std::setprecision(8) << "estimate " << rep.estimate << " +/- " << 1.96 * rep.std_error
           << " (95%, " << rep.n_paths << " paths, seed " << rep.seed << ")\n";
        for (const auto& w : rep.warnings) os << "warning: " << w << '\n';
        out << os.str();
    }
    return kOk;
}

int oracle_check(const RunConfig& cfg, std::ostream& out) {
    const auto res = mc::oracle_check(cfg.instances, cfg.seed);
    auto os = table_stream();
    os << "oracle-check: " << res.instances << " instances, " << res.mismatches
       << " mismatches, max |brute - dp| = " << std::setprecision(3) << res.max_abs_diff << '\n';
    for (const auto& f : res.failures) os << "  " << f << '\n';
    out << os.str();
    return res.mismatches == 0 ? kOk : kOracleMismatch;
}

}  // namespace

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        check_format(cfg.format);
        if (cfg.command == "solve-dp") return solve_dp(cfg, out);
        if (cfg.command == "solve-house") return solve_house(cfg, out);
        if (cfg.command == "solve-put") return solve_put(cfg, out);
        if (cfg.command == "simulate") return simulate(cfg, out);
        if (cfg.command == "oracle-check") return oracle_check(cfg, out);
        throw InputError("unknown command '" + cfg.command + "'");
    } catch (const InputError& e) {
        err << "input error: " << e.what() << '\n';
        return kInputError;
    } catch (const SolverError& e) {
        err << "solver error: " << e.what() << '\n';
        return kSolverError;
    } catch (const fs::filesystem_error& e) {
        err << "input error: " << e.what() << '\n';
        return kInputError;
    }
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Optimal multiple stopping with random refraction times"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto common = [&](CLI::App* sub) {
        sub->add_option("-o,--output-dir", cfg.output_dir, "Directory for written artifacts");
        sub->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
        sub->add_option("--format", cfg.format, "csv | json | table")->check(CLI::IsMember({"csv", "json", "table"}));
    };

    auto* dp_cmd = app.add_subcommand("solve-dp", "Exact cascade DP for a finite-chain problem");
    dp_cmd->add_option("-i,--input", cfg.input, "Problem JSON")->required();
    common(dp_cmd);

    auto* house = app.add_subcommand("solve-house", "Closed-form multiple house-selling solution");
    house->add_option("--alpha", cfg.alpha, "Per-period discount factor");
    house->add_option("--uniform-a", cfg.uniform_a, "Lower bound of uniform offers");
    house->add_option("--uniform-b", cfg.uniform_b, "Upper bound of uniform offers");
    house->add_option("--offer-law", cfg.offer_law_file, "Discrete offer law JSON");
    house->add_option("--delay-geometric", cfg.delay_geometric_p, "Geometric delay parameter p on {1,2,...}");
    house->add_option("--delay-law", cfg.delay_law_file, "Discrete delay law JSON");
    house->add_option("--n", cfg.n, "Number of houses");
    common(house);

    auto* put = app.add_subcommand("solve-put", "Closed-form perpetual put with level-triggered refraction");
    put->add_option("--strike", cfg.strike, "Strike K");
    put->add_option("--sigma", cfg.sigma, "Volatility");
    put->add_option("--beta", cfg.beta, "Discount rate");
    put->add_option("--z0", cfg.z0, "Refraction level (default K)");
    put->add_option("--x0", cfg.x0, "Price at which to report values (default z0)");
    put->add_option("--n", cfg.n, "Number of exercise rights");
    common(put);

    auto* sim = app.add_subcommand("simulate", "Monte Carlo evaluation of a policy");
    sim->add_option("-i,--input", cfg.input, "Problem JSON")->required();
    sim->add_option("--policy", cfg.policy_file, "Policy JSON (default: optimal policy)");
    sim->add_option("--paths", cfg.paths, "Number of paths");
    sim->add_option("--initial-state", cfg.initial_state, "Initial state index (finite chains)");
    sim->add_option("--dt", cfg.dt, "GBM grid step");
    sim->add_option("--t-max", cfg.t_max, "GBM horizon");
    sim->add_option("--payoffs-csv", cfg.payoffs_csv, "Write per-path payoffs here");
    common(sim);

    auto* oracle = app.add_subcommand("oracle-check", "Brute-force vs DP on random tiny instances");
    oracle->add_option("--instances", cfg.instances, "Number of random instances");
    common(oracle);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "input error: " << e.what() << '\n';
        return kInputError;
    }
    cfg.command = app.get_subcommands().front()->get_name();
    return run(cfg, out, err);
}

}  // namespace multistop::cli
