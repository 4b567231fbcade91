#include "vaproto/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vaproto {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

Vector matvec(const Matrix& m, const Vector& v) {
  if (m.cols != v.size()) {
    throw UsageError("matvec: matrix has " + std::to_string(m.cols) +
                     " columns but vector has " + std::to_string(v.size()) +
                     " entries");
  }
  Vector out(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = m.data.data() + r * m.cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) acc += row[c] * v[c];
    out[r] = acc;
  }
  return out;
}

Vector relu(const Vector& v) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
  return out;
}

Vector softmax(const Vector& logits) {
  if (logits.empty()) throw UsageError("softmax: empty logits");
  const double hi = *std::max_element(logits.begin(), logits.end());
  Vector out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - hi);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

double cross_entropy(const Vector& probs, std::size_t target) {
  if (target >= probs.size()) {
    throw UsageError("cross_entropy: target " + std::to_string(target) +
                     " out of range for " + std::to_string(probs.size()) +
                     " classes");
  }
  return -std::log(std::max(probs[target], kLogClamp));
}

double squared_distance(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw UsageError("squared_distance: dimension mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

double l2_norm(const Vector& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

double sum(const Vector& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc;
}

double mean(const Vector& v) {
  if (v.empty()) throw UsageError("mean: empty vector");
  return sum(v) / static_cast<double>(v.size());
}

bool all_finite(std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void ensure_finite(std::span<const double> xs, const char* what) {
  if (!all_finite(xs)) {
    throw NumericError(std::string(what) + ": non-finite value");
  }
}

}  // namespace vaproto
