#ifndef ATL_CLI_HPP
#define ATL_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace atl {

/// Command-line entry point. Without a subcommand it runs a prequential
/// experiment; `generate` writes a synthetic drift stream to CSV.
/// Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace atl

#endif  // ATL_CLI_HPP
