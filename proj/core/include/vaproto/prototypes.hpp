#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vaproto/numeric.hpp"

namespace vaproto {

enum class CovKind { Diagonal, Isotropic };

std::string to_string(CovKind kind);
CovKind cov_kind_from_string(const std::string& name);

// Gaussian class summary: mean plus a diagonal covariance. The isotropic
// kind stores the single shared variance `alpha` and materializes the
// diagonal on demand.
struct ClassGaussian {
  Vector mean;
  CovKind kind = CovKind::Diagonal;
  Vector var;           // per-dimension variances; empty when isotropic
  double alpha = 0.0;   // shared variance when isotropic
  std::uint32_t support_count = 0;

  std::size_t dim() const { return mean.size(); }
  double var_at(std::size_t i) const {
    return kind == CovKind::Isotropic ? alpha : var[i];
  }
  double trace() const;
  double var_frobenius() const;  // sqrt(sum of squared variances)
  Vector variances() const;      // materialized diagonal

  // Zero-covariance Gaussian (a point mass) at `mean`.
  static ClassGaussian point(Vector mean);
};

struct DistanceMatrix {
  std::size_t queries = 0;
  std::size_t classes = 0;
  std::vector<double> d2;  // row-major, squared distances

  double at(std::size_t q, std::size_t c) const { return d2[q * classes + c]; }
};

// Mean and per-dimension unbiased sample variance (m-1 denominator; a
// singleton support yields zero variance). The isotropic kind replaces
// the diagonal by its average.
ClassGaussian class_stats(std::span<const Vector> support, CovKind kind);

// Squared distance from a Gaussian to a point mass:
// ||mean - q||^2 + trace of the covariance.
double wasserstein_dirac_sq(const ClassGaussian& g, const Vector& q);

// Squared 2-Wasserstein distance between diagonal Gaussians:
// ||m1 - m2||^2 + sum_i (s1_i + s2_i - 2*sqrt(s1_i*s2_i)), each summand
// clamped at 0 against rounding.
double bures_sq(const ClassGaussian& a, const ClassGaussian& b);

DistanceMatrix distance_matrix(std::span<const Vector> queries,
                               std::span<const ClassGaussian> classes);

// Row-wise softmax of negated squared distances; rows ~ queries,
// columns ~ classes.
Matrix class_probabilities(std::span<const Vector> queries,
                           std::span<const ClassGaussian> classes);

// Argmax class per query; ties go to the lowest class index.
std::vector<std::size_t> predict(std::span<const Vector> queries,
                                 std::span<const ClassGaussian> classes);

}  // namespace vaproto
