#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace prototrace::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Exit statuses shared by every subcommand.
enum ExitCode : int { kSuccess = 0, kUsageError = 1, kDataError = 2 };

/// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes);
/// FNV-1a digest of a file's contents as 16 lowercase hex digits.
std::string file_digest(const std::filesystem::path& path);

/// Runs one command line (args excludes the program name). Diagnostics and
/// help go to `err`/`out`; all data goes to the files named by the flags.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace prototrace::cli
