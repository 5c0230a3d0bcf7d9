#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "detscale/tile.hpp"

namespace detscale {

static_assert(std::endian::native == std::endian::little,
              "matrix and scratch files are little-endian; big-endian hosts are unsupported");

enum class Dtype : std::uint8_t { f64 = 0, f32 = 1 };
enum class Symmetry : std::uint8_t { generic = 0, symmetric = 1, spd = 2 };

int dtype_bytes(Dtype dtype);
std::string to_string(Dtype dtype);
std::string to_string(Symmetry symmetry);

template <typename Scalar>
constexpr Dtype dtype_of() {
  static_assert(std::is_same_v<Scalar, float> || std::is_same_v<Scalar, double>);
  return std::is_same_v<Scalar, double> ? Dtype::f64 : Dtype::f32;
}

/// Zero-based (block row, block column).
struct BlockIndex {
  Index row = 0;
  Index col = 0;
  friend bool operator==(const BlockIndex&, const BlockIndex&) = default;
};

/// Geometry of the n_b x n_b grid over an m x m matrix.
///
/// The nominal block size is b = 1 + floor((m - 1) / n_b). Some (m, n_b)
/// pairs leave trailing block rows empty under that rule (m = 10, n_b = 6
/// gives b = 2 and only five non-empty blocks), so `num_blocks` is the
/// count of non-empty blocks, ceil(m / b), which never exceeds the request.
struct BlockLayout {
  Index m = 0;
  Index num_blocks = 0;
  Index block_size = 0;
  Index tail = 0;
  int dtype_bytes = 8;

  static BlockLayout make(Index m, Index requested_blocks, int dtype_bytes);

  Index offset(Index i) const { return i * block_size; }
  Index extent(Index i) const { return i + 1 == num_blocks ? tail : block_size; }
};

/// Fixed 64-byte header of a matrix file.
///
///   [0, 8)   magic "MEMDET01"
///   [8, 12)  version, u32 = 1
///   [12]     dtype, u8 {0 = f64, 1 = f32}
///   [13]     symmetry, u8 {0 = generic, 1 = symmetric, 2 = spd}
///   [14, 16) zero
///   [16, 24) m, u64
///   [24, 64) zero
struct MatrixHeader {
  static constexpr std::size_t kSize = 64;
  static constexpr std::array<char, 8> kMagic = {'M', 'E', 'M', 'D', 'E', 'T', '0', '1'};
  static constexpr std::uint32_t kVersion = 1;

  Dtype dtype = Dtype::f64;
  Symmetry symmetry = Symmetry::generic;
  std::uint64_t m = 0;

  std::array<unsigned char, kSize> encode() const;
  static MatrixHeader decode(const std::array<unsigned char, kSize>& bytes);
};

/// Move-only owner of a POSIX file descriptor.
class FileHandle {
public:
  FileHandle() = default;
  explicit FileHandle(int fd) : fd_(fd) {}
  FileHandle(FileHandle&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  FileHandle& operator=(FileHandle&& other) noexcept;
  FileHandle(const FileHandle&) = delete;
  FileHandle& operator=(const FileHandle&) = delete;
  ~FileHandle();

  int get() const { return fd_; }
  explicit operator bool() const { return fd_ >= 0; }

  void read_exact(std::uint64_t offset, void* dest, std::size_t bytes) const;
  void write_exact(std::uint64_t offset, const void* src, std::size_t bytes) const;

private:
  int fd_ = -1;
};

/// Dense m x m matrix on disk: header followed by m*m row-major elements.
class MatrixFile {
public:
  static MatrixFile create(const std::filesystem::path& path, Index m, Dtype dtype,
                           Symmetry symmetry);
  static MatrixFile open(const std::filesystem::path& path, bool writable = false);

  const std::filesystem::path& path() const { return path_; }
  Index size() const { return static_cast<Index>(header_.m); }
  Dtype dtype() const { return header_.dtype; }
  Symmetry symmetry() const { return header_.symmetry; }
  int element_bytes() const { return dtype_bytes(header_.dtype); }

  static std::uint64_t expected_length(Index m, Dtype dtype) {
    return MatrixHeader::kSize +
           static_cast<std::uint64_t>(m) * static_cast<std::uint64_t>(m) *
               static_cast<std::uint64_t>(dtype_bytes(dtype));
  }

  /// Reads the rectangle [row0, row0+rows) x [col0, col0+cols) into a
  /// row-major destination with leading dimension `ld`, converting the
  /// stored precision to Scalar.
  template <typename Scalar>
  void read_rect(Index row0, Index rows, Index col0, Index cols, Scalar* dest, Index ld) const;

  template <typename Scalar>
  void write_rect(Index row0, Index rows, Index col0, Index cols, const Scalar* src, Index ld);

private:
  MatrixFile(std::filesystem::path path, MatrixHeader header, FileHandle handle, bool writable)
      : path_(std::move(path)), header_(header), handle_(std::move(handle)), writable_(writable) {}

  void check_rect(Index row0, Index rows, Index col0, Index cols) const;
  std::uint64_t element_offset(Index row, Index col) const {
    return MatrixHeader::kSize +
           (static_cast<std::uint64_t>(row) * header_.m + static_cast<std::uint64_t>(col)) *
               static_cast<std::uint64_t>(element_bytes());
  }

  std::filesystem::path path_;
  MatrixHeader header_;
  FileHandle handle_;
  bool writable_ = false;
};

/// Writes a dense in-memory matrix to a new matrix file.
template <typename Derived>
MatrixFile write_matrix_file(const std::filesystem::path& path, const Eigen::MatrixBase<Derived>& matrix,
                             Dtype dtype, Symmetry symmetry);

/// Loads a whole matrix file into memory (tests and small baselines only).
template <typename Scalar>
RowMatrix<Scalar> read_matrix_file(const MatrixFile& file);

struct IoCounters {
  std::uint64_t blocks_read = 0;
  std::uint64_t blocks_written = 0;
  void reset() { *this = IoCounters{}; }
};

/// Headerless, preallocated overflow file of fixed-size block slots.
///
/// Slots are handed out in first-write order and never reassigned. The file
/// is created only when capacity > 0 and is removed on destruction.
class Scratchpad {
public:
  Scratchpad(const std::filesystem::path& dir, const BlockLayout& layout, int element_bytes,
             Index capacity);
  Scratchpad(Scratchpad&&) noexcept = default;
  Scratchpad& operator=(Scratchpad&&) noexcept = default;
  ~Scratchpad();

  Index capacity() const { return capacity_; }
  Index used() const { return next_free_; }
  std::uint64_t slot_bytes() const { return slot_bytes_; }
  bool created() const { return static_cast<bool>(handle_); }
  const std::filesystem::path& path() const { return path_; }

  std::optional<Index> slot_of(BlockIndex block) const;
  /// Slot for `block`, allocating the next free one on first use.
  Index acquire(BlockIndex block);

  void write(Index slot, const void* src, std::size_t bytes) const;
  void read(Index slot, void* dest, std::size_t bytes) const;

private:
  std::filesystem::path path_;
  FileHandle handle_;
  Index num_blocks_ = 0;
  Index capacity_ = 0;
  Index next_free_ = 0;
  std::uint64_t slot_bytes_ = 0;
  std::vector<Index> slot_map_;
};

/// Per-block source of the current contents: original matrix or a scratch slot.
class CacheTable {
public:
  enum class Origin { original, scratch };
  struct Source {
    Origin origin = Origin::original;
    Index slot = -1;
  };

  explicit CacheTable(Index num_blocks)
      : num_blocks_(num_blocks), slots_(static_cast<std::size_t>(num_blocks * num_blocks), -1) {}

  Source resolve(BlockIndex block) const {
    const Index slot = slots_[flat(block)];
    return slot < 0 ? Source{} : Source{Origin::scratch, slot};
  }
  void mark_scratch(BlockIndex block, Index slot) { slots_[flat(block)] = slot; }

private:
  std::size_t flat(BlockIndex block) const {
    return static_cast<std::size_t>(block.row * num_blocks_ + block.col);
  }
  Index num_blocks_;
  std::vector<Index> slots_;
};

/// Block-granular access to a matrix file backed by a scratchpad and a
/// cache table, with exact read/write accounting.
///
/// The input file is never written; updated blocks go to the scratchpad.
template <typename Scalar>
class BlockStore {
public:
  BlockStore(const MatrixFile& file, const BlockLayout& layout,
             const std::filesystem::path& scratch_dir, Index scratch_capacity);

  const BlockLayout& layout() const { return layout_; }
  const IoCounters& counters() const { return counters_; }
  IoCounters& counters() { return counters_; }
  const Scratchpad& scratch() const { return scratch_; }
  const CacheTable& cache() const { return cache_; }

  /// dest <- M_ij, from whichever source the cache table names.
  void read_block(BlockIndex block, Tile<Scalar>& dest);
  /// dest <- M_ij^T.
  void read_block_transposed(BlockIndex block, Tile<Scalar>& dest);
  /// Stores `src` as the new contents of block (i, j) in the scratchpad.
  void write_block_scratch(BlockIndex block, const Tile<Scalar>& src);

private:
  void check(BlockIndex block) const;

  const MatrixFile& file_;
  BlockLayout layout_;
  Scratchpad scratch_;
  CacheTable cache_;
  IoCounters counters_;
  std::vector<Scalar> row_buffer_;
};

extern template class BlockStore<float>;
extern template class BlockStore<double>;

}  // namespace detscale

#include "detscale/block_store_impl.hpp"
