#include "vaproto/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "vaproto/errors.hpp"

namespace vaproto {

double finite_diff_check(const std::function<double()>& loss,
                         std::span<Vector* const> params,
                         std::span<const Vector> analytic, double step) {
  if (step <= 0.0) throw UsageError("finite_diff_check: step must be > 0");
  if (params.size() != analytic.size()) {
    throw UsageError("finite_diff_check: parameter/gradient count mismatch");
  }
  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Vector& tensor = *params[t];
    if (tensor.size() != analytic[t].size()) {
      throw UsageError("finite_diff_check: gradient shape mismatch");
    }
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double saved = tensor[i];
      tensor[i] = saved + step;
      const double up = loss();
      tensor[i] = saved - step;
      const double down = loss();
      tensor[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("finite_diff_check: non-finite loss");
      }
      const double fd = (up - down) / (2.0 * step);
      const double ad = analytic[t][i];
      const double rel =
          std::abs(ad - fd) / std::max(1e-8, std::abs(ad) + std::abs(fd));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace vaproto
