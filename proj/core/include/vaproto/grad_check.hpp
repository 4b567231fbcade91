#pragma once

#include <functional>
#include <span>

#include "vaproto/numeric.hpp"

namespace vaproto {

// Central-difference check of `analytic` against the loss closure. Every
// entry of every parameter vector is perturbed in place by +/-step; the
// closure is evaluated at the perturbed points and parameters restored.
// Returns max over entries of |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|),
// or 0 over an empty parameter set. Non-finite losses raise NumericError.
double finite_diff_check(const std::function<double()>& loss,
                         std::span<Vector* const> params,
                         std::span<const Vector> analytic, double step);

}  // namespace vaproto
