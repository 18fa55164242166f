#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tandem {

int run_cli(int argc, char** argv);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tandem
