#pragma once

#include <vector>

#include "qa/qa.hpp"

namespace straptor::qa::detail {

// Turns a plan step into a tree operation, resolving {"ref": k} against the
// outputs of earlier steps. Throws InvalidPlan for malformed literals and
// TypeMismatch/EmptyInput when a reference has the wrong shape.
tree::TreeOperation lower_step(const SubOperation& step, const std::vector<tree::OpResult>& outputs,
                               const tree::HOTree& t);

// Static argument checks that need no earlier outputs.
void check_literals(const SubOperation& step);

json value_json(const tree::Value& v);
json op_json(const tree::TreeOperation& op);

std::vector<long long> refs_of(const json& args);

}  // namespace straptor::qa::detail
