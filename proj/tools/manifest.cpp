#include "manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "vaproto/errors.hpp"
#include "vaproto/rng.hpp"
#include "vaproto/version.hpp"

namespace vaproto_cli {

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw vaproto::DataError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string bytes = buffer.str();
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx",
                static_cast<unsigned long long>(vaproto::fnv1a64(bytes)));
  return std::string(out);
}

void write_manifest(const std::filesystem::path& out_dir,
                    const std::string& command, const nlohmann::json& config,
                    std::uint64_t master_seed,
                    const std::map<std::string, std::string>& input_hashes,
                    const std::vector<std::string>& outputs,
                    double wall_clock_seconds) {
  nlohmann::json doc;
  doc["command"] = command;
  doc["tool_version"] = VAPROTO_VERSION;
  doc["master_seed"] = master_seed;
  doc["config"] = config;
  doc["inputs"] = input_hashes;
  doc["outputs"] = outputs;
  doc["wall_clock_seconds"] = wall_clock_seconds;
  const auto path = out_dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw vaproto::DataError("cannot write '" + path.string() + "'");
  out << doc.dump(2) << '\n';
  if (!out) throw vaproto::DataError("write failed for '" + path.string() + "'");
}

}  // namespace vaproto_cli
