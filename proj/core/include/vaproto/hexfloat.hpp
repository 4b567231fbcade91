#pragma once

#include <string>
#include <string_view>

#include "vaproto/numeric.hpp"

namespace vaproto {

// Lossless float text encoding: the 16 lowercase hex digits of the IEEE
// bit pattern. Decimal text can drop bits; the hex form never does.
std::string f64_to_hex(double x);
double f64_from_hex(std::string_view hex);

std::vector<std::string> encode_hex(const Vector& xs);
Vector decode_hex(const std::vector<std::string>& xs);

}  // namespace vaproto
