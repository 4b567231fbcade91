#include "vaproto/hexfloat.hpp"

#include <bit>
#include <cstdint>

#include "vaproto/errors.hpp"

namespace vaproto {

namespace {
constexpr char kDigits[] = "0123456789abcdef";
}

std::string f64_to_hex(double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  std::string out(16, '0');
  for (int i = 0; i < 16; ++i) {
    out[15 - i] = kDigits[(bits >> (4 * i)) & 0xf];
  }
  return out;
}

double f64_from_hex(std::string_view hex) {
  if (hex.size() != 16) {
    throw DataError("hex float must be 16 digits, got '" + std::string(hex) +
                    "'");
  }
  std::uint64_t bits = 0;
  for (char c : hex) {
    bits <<= 4;
    if (c >= '0' && c <= '9') {
      bits |= static_cast<std::uint64_t>(c - '0');
    } else if (c >= 'a' && c <= 'f') {
      bits |= static_cast<std::uint64_t>(c - 'a' + 10);
    } else if (c >= 'A' && c <= 'F') {
      bits |= static_cast<std::uint64_t>(c - 'A' + 10);
    } else {
      throw DataError("invalid hex float digit in '" + std::string(hex) + "'");
    }
  }
  return std::bit_cast<double>(bits);
}

std::vector<std::string> encode_hex(const Vector& xs) {
  std::vector<std::string> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(f64_to_hex(x));
  return out;
}

Vector decode_hex(const std::vector<std::string>& xs) {
  Vector out;
  out.reserve(xs.size());
  for (const auto& s : xs) out.push_back(f64_from_hex(s));
  return out;
}

}  // namespace vaproto
