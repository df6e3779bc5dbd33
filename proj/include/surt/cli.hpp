#pragma once

#include <string>
#include <vector>

namespace surt {

// Full command-line entry point, shared by the binary and by in-process
// tests. Returns the process exit code: 0 on success, 2 on validation
// failure, 3 on numerical failure. Commands that got as far as an output
// directory leave a manifest there even when they fail, plus error.json
// carrying the stable error code.
int cli_main(int argc, const char* const* argv);

// Convenience overload; `args` excludes the program name.
int cli_main(const std::vector<std::string>& args);

}  // namespace surt
