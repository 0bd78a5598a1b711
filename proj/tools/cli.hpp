#pragma once

#include <ostream>

namespace rgmm::cli {

/// Runs one command line. Returns 0 on success, 1 on invalid input or usage,
/// 2 on numerical failure.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rgmm::cli
