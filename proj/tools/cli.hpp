#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cpath::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `cpath` tool; returns the process exit code.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

/// Seed precedence: --seed flag, then CONTRASTIVE_PATH_SEED, then config.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, const char* env, std::uint64_t config_seed);

}  // namespace cpath::cli
