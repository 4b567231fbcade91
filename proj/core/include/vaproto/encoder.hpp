#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vaproto/numeric.hpp"
#include "vaproto/rng.hpp"

namespace vaproto {

// Two-layer feed-forward encoder: relu(W1 x + b1) -> W2 h + b2, with
// dropout applied after the final layer during training only.
struct EncoderParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t embed_dim = 0;
  double dropout_rate = 0.0;

  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;

  // He-normal weights, zero biases.
  static EncoderParams init(std::size_t input_dim, std::size_t hidden_dim,
                            std::size_t embed_dim, double dropout_rate,
                            Rng& rng);

  // Inference path; dropout off.
  Vector forward(const Vector& x) const;

  // Parameter tensors in update order: w1, b1, w2, b2.
  std::vector<Vector*> tensors();
  std::vector<const Vector*> tensors() const;
  std::size_t parameter_count() const;

  bool finite() const;

  // fnv1a64 over the raw parameter bytes in tensor order, as 16 hex digits.
  std::string fingerprint() const;
};

void save_checkpoint(const EncoderParams& params,
                     const std::filesystem::path& path);
EncoderParams load_checkpoint(const std::filesystem::path& path);

}  // namespace vaproto
