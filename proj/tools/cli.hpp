#ifndef MSDE_TOOLS_CLI_HPP
#define MSDE_TOOLS_CLI_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace msde::cli {

/// Runs `msde <subcommand> ...` with args excluding the program name.
/// Returns the process exit code: 0 success, 1 usage, 2 data, 3 numeric.
/// Errors are written to err as a single line `MSDE-ERR <module>: <detail>`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace msde::cli

#endif  // MSDE_TOOLS_CLI_HPP
