#pragma once

#include <string>
#include <vector>

namespace neurodecode {

// Reads NEURODECODE_LOG (error | info | debug, default info) and routes log
// output to stderr.
void init_logging();

// Entry point of the `neurodecode` tool. `args` excludes the program name.
// Returns 0 on success, 1 on usage errors, 2 on runtime failures.
int run_cli(const std::vector<std::string>& args);

}  // namespace neurodecode
