#pragma once

#include "config.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace pointpan::cli {

/// Parses argv-style arguments (without the program name), runs the command and
/// returns its exit code: 0 ok, 2 validation error, 3 I/O error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Per-image seed used wherever a dataset stem needs its own random stream.
std::uint64_t stem_seed(std::uint64_t seed, const std::string& stem);

/// 64-bit FNV-1a, recorded per output file in run manifests.
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace pointpan::cli
