#include "vaproto/prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vaproto {

std::string to_string(CovKind kind) {
  return kind == CovKind::Isotropic ? "isotropic" : "diagonal";
}

CovKind cov_kind_from_string(const std::string& name) {
  if (name == "diagonal") return CovKind::Diagonal;
  if (name == "isotropic") return CovKind::Isotropic;
  throw UsageError("unknown covariance kind '" + name +
                   "' (expected diagonal or isotropic)");
}

double ClassGaussian::trace() const {
  if (kind == CovKind::Isotropic) {
    return alpha * static_cast<double>(mean.size());
  }
  double acc = 0.0;
  for (double x : var) acc += x;
  return acc;
}

double ClassGaussian::var_frobenius() const {
  if (kind == CovKind::Isotropic) {
    return std::abs(alpha) * std::sqrt(static_cast<double>(mean.size()));
  }
  double acc = 0.0;
  for (double x : var) acc += x * x;
  return std::sqrt(acc);
}

Vector ClassGaussian::variances() const {
  if (kind == CovKind::Isotropic) return Vector(mean.size(), alpha);
  return var;
}

ClassGaussian ClassGaussian::point(Vector mean) {
  ClassGaussian g;
  g.var.assign(mean.size(), 0.0);
  g.mean = std::move(mean);
  g.kind = CovKind::Diagonal;
  g.support_count = 1;
  return g;
}

ClassGaussian class_stats(std::span<const Vector> support, CovKind kind) {
  if (support.empty()) throw UsageError("class_stats: empty support set");
  const std::size_t dim = support[0].size();
  for (const auto& v : support) {
    if (v.size() != dim) throw UsageError("class_stats: dimension mismatch");
  }
  const std::size_t m = support.size();

  ClassGaussian g;
  g.support_count = static_cast<std::uint32_t>(m);
  g.mean.assign(dim, 0.0);
  for (const auto& v : support) {
    for (std::size_t i = 0; i < dim; ++i) g.mean[i] += v[i];
  }
  for (double& x : g.mean) x /= static_cast<double>(m);

  Vector var(dim, 0.0);
  if (m >= 2) {
    for (const auto& v : support) {
      for (std::size_t i = 0; i < dim; ++i) {
        const double d = v[i] - g.mean[i];
        var[i] += d * d;
      }
    }
    for (double& x : var) x /= static_cast<double>(m - 1);
  }

  if (kind == CovKind::Isotropic) {
    g.kind = CovKind::Isotropic;
    g.alpha = dim == 0 ? 0.0 : sum(var) / static_cast<double>(dim);
  } else {
    g.kind = CovKind::Diagonal;
    g.var = std::move(var);
  }
  return g;
}

double wasserstein_dirac_sq(const ClassGaussian& g, const Vector& q) {
  if (g.dim() != q.size()) {
    throw UsageError("wasserstein_dirac_sq: dimension mismatch");
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double d = g.mean[i] - q[i];
    d2 += d * d;
  }
  double tr = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) tr += g.var_at(i);
  return d2 + tr;
}

double bures_sq(const ClassGaussian& a, const ClassGaussian& b) {
  if (a.dim() != b.dim()) throw UsageError("bures_sq: dimension mismatch");
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double d = a.mean[i] - b.mean[i];
    d2 += d * d;
  }
  // (sqrt(s) - sqrt(t))^2 computed as s + t - 2*sqrt(s*t); exact when one
  // side is zero, clamped at 0 against rounding when s == t.
  double tr = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double s = a.var_at(i);
    const double t = b.var_at(i);
    tr += std::max(0.0, s + t - 2.0 * std::sqrt(s * t));
  }
  return d2 + tr;
}

DistanceMatrix distance_matrix(std::span<const Vector> queries,
                               std::span<const ClassGaussian> classes) {
  if (classes.empty()) throw UsageError("distance_matrix: no classes");
  DistanceMatrix out;
  out.queries = queries.size();
  out.classes = classes.size();
  out.d2.resize(queries.size() * classes.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    for (std::size_t c = 0; c < classes.size(); ++c) {
      out.d2[q * classes.size() + c] =
          wasserstein_dirac_sq(classes[c], queries[q]);
    }
  }
  return out;
}

Matrix class_probabilities(std::span<const Vector> queries,
                           std::span<const ClassGaussian> classes) {
  const DistanceMatrix d = distance_matrix(queries, classes);
  Matrix probs(queries.size(), classes.size());
  Vector logits(classes.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    for (std::size_t c = 0; c < classes.size(); ++c) {
      logits[c] = -d.at(q, c);
    }
    const Vector row = softmax(logits);
    for (std::size_t c = 0; c < classes.size(); ++c) probs.at(q, c) = row[c];
  }
  return probs;
}

std::vector<std::size_t> predict(std::span<const Vector> queries,
                                 std::span<const ClassGaussian> classes) {
  const DistanceMatrix d = distance_matrix(queries, classes);
  std::vector<std::size_t> out(queries.size(), 0);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    std::size_t best = 0;
    double best_d2 = d.at(q, 0);
    for (std::size_t c = 1; c < classes.size(); ++c) {
      if (d.at(q, c) < best_d2) {
        best_d2 = d.at(q, c);
        best = c;
      }
    }
    out[q] = best;
  }
  return out;
}

}  // namespace vaproto
