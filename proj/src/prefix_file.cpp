#include "detscale/prefix_file.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "detscale/errors.hpp"

namespace detscale {

namespace {

constexpr std::array<char, 8> kMagic = {'M', 'D', 'P', 'R', 'E', 'F', 'I', 'X'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 32;
constexpr std::size_t kRecordBytes = 20;

template <typename T>
void put(unsigned char* p, T value) {
  const auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  std::memcpy(p, bits.data(), sizeof(T));
}

template <typename T>
T get(const unsigned char* p) {
  std::array<unsigned char, sizeof(T)> bits{};
  std::memcpy(bits.data(), p, sizeof(T));
  return std::bit_cast<T>(bits);
}

}  // namespace

void write_prefix_file(const std::filesystem::path& path, const PrefixTrace& trace) {
  if (trace.sign.size() != trace.logabsdet.size()) {
    throw DomainError("prefix trace has mismatched sign and value lengths");
  }
  std::vector<unsigned char> bytes(kHeaderBytes + kRecordBytes * trace.size(), 0);
  std::memcpy(bytes.data(), kMagic.data(), kMagic.size());
  put<std::uint32_t>(bytes.data() + 8, kVersion);
  put<std::uint64_t>(bytes.data() + 16, trace.size());
  for (std::size_t q = 0; q < trace.size(); ++q) {
    unsigned char* rec = bytes.data() + kHeaderBytes + q * kRecordBytes;
    put<std::uint64_t>(rec, q + 1);
    put<double>(rec + 8, trace.logabsdet[q]);
    put<std::int32_t>(rec + 16, trace.sign[q]);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create prefix file '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for prefix file '" + path.string() + "'");
}

PrefixTrace read_prefix_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open prefix file '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw IoError("not a prefix file: '" + path.string() + "'");
  }
  if (get<std::uint32_t>(bytes.data() + 8) != kVersion) throw IoError("unsupported prefix file version");
  const auto count = get<std::uint64_t>(bytes.data() + 16);
  if (bytes.size() != kHeaderBytes + kRecordBytes * count) {
    throw IoError("prefix file length does not match its record count");
  }
  PrefixTrace trace;
  trace.logabsdet.resize(count);
  trace.sign.resize(count);
  for (std::size_t q = 0; q < count; ++q) {
    const unsigned char* rec = bytes.data() + kHeaderBytes + q * kRecordBytes;
    if (get<std::uint64_t>(rec) != q + 1) throw IoError("prefix records out of order");
    trace.logabsdet[q] = get<double>(rec + 8);
    trace.sign[q] = get<std::int32_t>(rec + 16);
  }
  return trace;
}

}  // namespace detscale
