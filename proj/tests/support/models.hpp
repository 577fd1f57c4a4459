#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "libration/variational.hpp"

namespace libration::testing {

Model make_model(const std::string& potential, const std::string& deformation = "");

/// V = 1/2 y^2 + a3 y^3 + x^2 b(y) + x^3 d(y) + x^4 c(y), b, d, c cubic in y
/// with b(0) in [0.3, 1] and small remaining coefficients, so that a
/// libration well exists up to energy 0.3.
std::string random_potential(std::uint64_t seed);

/// Deformations that keep the plane x = px = 0 invariant.
const std::vector<std::string>& preserving_deformations();

}  // namespace libration::testing
