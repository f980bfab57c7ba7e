#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace crowdmot::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Runs one command line (args[0] is the program name). Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main_entry(int argc, char** argv);

}  // namespace crowdmot::cli
