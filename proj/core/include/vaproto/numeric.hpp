#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vaproto/errors.hpp"

namespace vaproto {

// All numeric state is 64-bit. Public operations keep entries finite;
// contracts that depend on it call ensure_finite explicitly.
using Vector = std::vector<double>;

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vector data;  // row-major, rows*cols entries

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  static Matrix identity(std::size_t n);
};

// Probabilities below this are clamped before taking logs.
inline constexpr double kLogClamp = 1e-12;

Vector matvec(const Matrix& m, const Vector& v);

// Elementwise max(0, x). The subgradient at 0 is taken as 0 everywhere.
Vector relu(const Vector& v);

// Max-shifted softmax; entries in (0, 1], row sum within 1e-12 of 1.
Vector softmax(const Vector& logits);

// -log(probs[target]) with the probability clamped at kLogClamp.
double cross_entropy(const Vector& probs, std::size_t target);

double squared_distance(const Vector& a, const Vector& b);
double l2_norm(const Vector& v);
double sum(const Vector& v);
double mean(const Vector& v);

bool all_finite(std::span<const double> xs);
void ensure_finite(std::span<const double> xs, const char* what);

}  // namespace vaproto
