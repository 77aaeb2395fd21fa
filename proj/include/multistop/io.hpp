/**
 * @file io.hpp
 * @brief JSON documents for problems, policies, solutions and reports.
 *
 * Objects are emitted with sorted keys, so serialize(parse(doc)) is a fixed
 * point. Parsing errors throw InputError naming the offending field.
 */

#ifndef MULTISTOP_IO_HPP
#define MULTISTOP_IO_HPP

#include "multistop/closedform.hpp"
#include "multistop/core.hpp"
#include "multistop/mc.hpp"

#include <json.hpp>

#include <string>

namespace multistop::io {

using nlohmann::json;

json to_json(const DiscreteDistribution& d);
DiscreteDistribution distribution_from_json(const json& j, const std::string& where = "law");

json to_json(const WaitingModel& w);
WaitingModel waiting_from_json(const json& j, const std::string& where = "waiting");

json to_json(const StoppingProblem& p);
StoppingProblem problem_from_json(const json& j);

json to_json(const ThresholdPolicy& p);
ThresholdPolicy policy_from_json(const json& j);

json to_json(const mc::EvalReport& r);
json to_json(const closedform::HouseSolution& s);
json to_json(const closedform::PutSolution& s);
json to_json(const ValueCascade& c);

/// Parse text; syntax errors become InputError with line and column.
json parse(const std::string& text, const std::string& source = "input");
json read_file(const std::string& path);
/// Canonical text form: sorted keys, two-space indent, trailing newline.
std::string dump(const json& j);

}  // namespace multistop::io

#endif  // MULTISTOP_IO_HPP
