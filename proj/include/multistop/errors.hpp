#ifndef MULTISTOP_ERRORS_HPP
#define MULTISTOP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace multistop {

/// Malformed or inadmissible input: bad parameters, invalid laws, unparsable files.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A solver could not produce a trustworthy answer (non-convergence,
/// invalid induction branch, size cap exceeded).
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& what, double residual = 0.0)
        : std::runtime_error(what), residual_(residual) {}

    /// Last sup-norm residual for iterative failures, 0 otherwise.
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

}  // namespace multistop

#endif  // MULTISTOP_ERRORS_HPP
