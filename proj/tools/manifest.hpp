#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace vaproto_cli {

// fnv1a64 of the file bytes as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

// Every command run emits exactly one manifest.json in the output
// directory: command name, resolved config, master seed, input file
// hashes, produced artifact names, wall clock, and tool version.
// `vaproto rerun` replays the command from the stored config.
void write_manifest(const std::filesystem::path& out_dir,
                    const std::string& command, const nlohmann::json& config,
                    std::uint64_t master_seed,
                    const std::map<std::string, std::string>& input_hashes,
                    const std::vector<std::string>& outputs,
                    double wall_clock_seconds);

}  // namespace vaproto_cli
