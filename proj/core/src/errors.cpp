#include "vaproto/errors.hpp"

#include <cstdio>

namespace vaproto {

void warn(const std::string& message) {
  std::fprintf(stderr, "warning: %s\n", message.c_str());
}

}  // namespace vaproto
