#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace detscale {

/// Prefix log-determinants l_q = log|det M[I_q, I_q]| and their signs,
/// stored zero-based (entry q-1 is l_q).
struct PrefixTrace {
  std::vector<double> logabsdet;
  std::vector<int> sign;

  std::size_t size() const { return logabsdet.size(); }
};

/// Sidecar format, little-endian:
///   header (32 bytes): magic "MDPREFIX", version u32 = 1, zero u32,
///                      record count u64, zero u64
///   records (20 bytes each): q u64 (one-based), l_q f64, sigma_q i32
void write_prefix_file(const std::filesystem::path& path, const PrefixTrace& trace);
PrefixTrace read_prefix_file(const std::filesystem::path& path);

}  // namespace detscale
