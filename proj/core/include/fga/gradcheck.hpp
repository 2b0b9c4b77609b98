#pragma once

#include <functional>

#include "fga/tape.hpp"

namespace fga {

/// A scalar-valued program under test: builds ops on the given tape from the
/// perturbed leaf and returns the scalar output node.
using ScalarProgram = std::function<NodeId(Tape&, NodeId)>;

/// Central-difference gradient check. Returns
///   max over coordinates of |analytic - numeric| / max(1, |numeric|).
double finite_diff_check(const ScalarProgram& f, const Tensor& x, double step = 1e-6);

} // namespace fga
