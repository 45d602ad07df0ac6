#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace jnd::cli {

/// Process exit statuses of the jndsur tool.
enum ExitCode : int {
    kOk = 0,
    kUsage = 1,          ///< bad command line
    kInputError = 2,     ///< unreadable, unwritable or malformed file
    kNotConverged = 3,   ///< fit finished without meeting the tolerance (outputs still written)
    kDomainError = 4,    ///< invalid value: unknown content/group, target outside (0,1), bad range, ...
    kDataError = 5,      ///< data cannot support the fit: empty rows, every subject rejected, ...
};

/// Runs one command line (args[0] is the program name) and returns the exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace jnd::cli
