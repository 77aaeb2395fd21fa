#ifndef MULTISTOP_CLI_HPP
#define MULTISTOP_CLI_HPP

#include "multistop/core.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace multistop::cli {

enum ExitCode : int { kOk = 0, kInputError = 1, kSolverError = 2, kOracleMismatch = 3 };

struct RunConfig {
    std::string command;                // solve-dp | solve-house | solve-put | simulate | oracle-check
    std::string input;                  // problem JSON (solve-dp, simulate)
    std::string output_dir = ".";
    std::uint64_t seed = kDefaultSeed;
    std::string format = "table";       // csv | json | table

    // solve-house
    double alpha = 0.9;
    double uniform_a = 0.0;
    double uniform_b = 1.0;
    std::string offer_law_file;         // discrete offer law; overrides the uniform bounds
    double delay_geometric_p = 0.5;
    std::string delay_law_file;         // discrete delay law; overrides the geometric p
    int n = 1;

    // solve-put
    double strike = 100.0;
    double sigma = 0.3;
    double beta = 0.05;
    std::optional<double> z0;           // defaults to the strike
    std::optional<double> x0;           // value column; defaults to z0

    // simulate
    std::string policy_file;            // defaults to the optimal policy
    std::size_t paths = 100000;
    std::size_t initial_state = 0;
    double dt = 1e-3;
    double t_max = 400.0;
    std::string payoffs_csv;

    // oracle-check
    std::size_t instances = 200;
};

/// Execute one command; artifacts go to cfg.output_dir, human output to `out`,
/// diagnostics to `err`. Returns an ExitCode.
int run(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Parse argv into a RunConfig and run it.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace multistop::cli

#endif  // MULTISTOP_CLI_HPP
