#pragma once

#include <ostream>

namespace spiked {

// Entry point of the spiked_lab tool. Returns 0 on success, 1 on a
// configuration error and 2 on a numerical failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace spiked
