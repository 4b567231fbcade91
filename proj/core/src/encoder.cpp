#include "vaproto/encoder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "vaproto/hexfloat.hpp"

namespace vaproto {

using nlohmann::json;

namespace {
constexpr int kCheckpointVersion = 1;
}

EncoderParams EncoderParams::init(std::size_t input_dim, std::size_t hidden_dim,
                                  std::size_t embed_dim, double dropout_rate,
                                  Rng& rng) {
  if (input_dim == 0 || hidden_dim == 0 || embed_dim == 0) {
    throw UsageError("encoder: dimensions must be positive");
  }
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw UsageError("encoder: dropout rate must be in [0, 1)");
  }
  EncoderParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.embed_dim = embed_dim;
  p.dropout_rate = dropout_rate;
  p.w1 = Matrix(hidden_dim, input_dim);
  p.b1.assign(hidden_dim, 0.0);
  p.w2 = Matrix(embed_dim, hidden_dim);
  p.b2.assign(embed_dim, 0.0);
  const double s1 = std::sqrt(2.0 / static_cast<double>(input_dim));
  for (auto& w : p.w1.data) w = s1 * rng.normal();
  const double s2 = std::sqrt(2.0 / static_cast<double>(hidden_dim));
  for (auto& w : p.w2.data) w = s2 * rng.normal();
  return p;
}

Vector EncoderParams::forward(const Vector& x) const {
  Vector h = matvec(w1, x);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] += b1[i];
  h = relu(h);
  Vector e = matvec(w2, h);
  for (std::size_t i = 0; i < e.size(); ++i) e[i] += b2[i];
  return e;
}

std::vector<Vector*> EncoderParams::tensors() {
  return {&w1.data, &b1, &w2.data, &b2};
}

std::vector<const Vector*> EncoderParams::tensors() const {
  return {&w1.data, &b1, &w2.data, &b2};
}

std::size_t EncoderParams::parameter_count() const {
  return w1.data.size() + b1.size() + w2.data.size() + b2.size();
}

bool EncoderParams::finite() const {
  for (const Vector* t : tensors()) {
    if (!all_finite(*t)) return false;
  }
  return true;
}

std::string EncoderParams::fingerprint() const {
  std::string bytes;
  bytes.reserve(parameter_count() * sizeof(double));
  for (const Vector* t : tensors()) {
    const auto* raw = reinterpret_cast<const char*>(t->data());
    bytes.append(raw, t->size() * sizeof(double));
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return std::string(buf);
}

void save_checkpoint(const EncoderParams& params,
                     const std::filesystem::path& path) {
  json doc;
  doc["format_version"] = kCheckpointVersion;
  doc["type"] = "vaproto-encoder";
  doc["input_dim"] = params.input_dim;
  doc["hidden_dim"] = params.hidden_dim;
  doc["embed_dim"] = params.embed_dim;
  doc["dropout_rate_hex"] = f64_to_hex(params.dropout_rate);
  doc["dropout_rate"] = params.dropout_rate;
  doc["w1_hex"] = encode_hex(params.w1.data);
  doc["b1_hex"] = encode_hex(params.b1);
  doc["w2_hex"] = encode_hex(params.w2.data);
  doc["b2_hex"] = encode_hex(params.b2);
  doc["fingerprint"] = params.fingerprint();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << doc.dump(2) << '\n';
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

EncoderParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("checkpoint '" + path.string() + "': parse error at byte " +
                    std::to_string(e.byte) + " (" + e.what() + ")");
  }
  if (!doc.contains("format_version") ||
      doc["format_version"].get<int>() != kCheckpointVersion) {
    throw DataError("checkpoint '" + path.string() +
                    "': unsupported format_version (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  EncoderParams p;
  try {
    p.input_dim = doc.at("input_dim").get<std::size_t>();
    p.hidden_dim = doc.at("hidden_dim").get<std::size_t>();
    p.embed_dim = doc.at("embed_dim").get<std::size_t>();
    p.dropout_rate = f64_from_hex(doc.at("dropout_rate_hex").get<std::string>());
    p.w1 = Matrix(p.hidden_dim, p.input_dim);
    p.w1.data = decode_hex(doc.at("w1_hex").get<std::vector<std::string>>());
    p.b1 = decode_hex(doc.at("b1_hex").get<std::vector<std::string>>());
    p.w2 = Matrix(p.embed_dim, p.hidden_dim);
    p.w2.data = decode_hex(doc.at("w2_hex").get<std::vector<std::string>>());
    p.b2 = decode_hex(doc.at("b2_hex").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw DataError("checkpoint '" + path.string() + "': " + e.what());
  }
  if (p.w1.data.size() != p.hidden_dim * p.input_dim ||
      p.b1.size() != p.hidden_dim ||
      p.w2.data.size() != p.embed_dim * p.hidden_dim ||
      p.b2.size() != p.embed_dim) {
    throw DataError("checkpoint '" + path.string() + "': tensor shape mismatch");
  }
  if (!p.finite()) {
    throw DataError("checkpoint '" + path.string() + "': non-finite weights");
  }
  return p;
}

}  // namespace vaproto
