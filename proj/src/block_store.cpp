#include "detscale/block_store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>

namespace detscale {

namespace {

std::string errno_message(const std::string& what, const std::filesystem::path& path) {
  return what + " '" + path.string() + "': " + std::strerror(errno);
}

void put_u32(unsigned char* p, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) p[k] = static_cast<unsigned char>(v >> (8 * k));
}
void put_u64(unsigned char* p, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) p[k] = static_cast<unsigned char>(v >> (8 * k));
}
std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(p[k]) << (8 * k);
  return v;
}
std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(p[k]) << (8 * k);
  return v;
}

}  // namespace

int dtype_bytes(Dtype dtype) { return dtype == Dtype::f64 ? 8 : 4; }

std::string to_string(Dtype dtype) { return dtype == Dtype::f64 ? "f64" : "f32"; }

std::string to_string(Symmetry symmetry) {
  switch (symmetry) {
    case Symmetry::generic: return "generic";
    case Symmetry::symmetric: return "symmetric";
    case Symmetry::spd: return "spd";
  }
  return "unknown";
}

BlockLayout BlockLayout::make(Index m, Index requested_blocks, int dtype_bytes) {
  if (m < 1) throw DomainError("matrix dimension must be positive");
  if (requested_blocks < 1) throw DomainError("number of blocks must be positive");
  if (dtype_bytes != 4 && dtype_bytes != 8) throw DomainError("element size must be 4 or 8 bytes");
  BlockLayout layout;
  layout.m = m;
  layout.dtype_bytes = dtype_bytes;
  layout.block_size = 1 + (m - 1) / requested_blocks;
  layout.num_blocks = (m + layout.block_size - 1) / layout.block_size;
  layout.tail = m - (layout.num_blocks - 1) * layout.block_size;
  return layout;
}

std::array<unsigned char, MatrixHeader::kSize> MatrixHeader::encode() const {
  std::array<unsigned char, kSize> bytes{};
  std::memcpy(bytes.data(), kMagic.data(), kMagic.size());
  put_u32(bytes.data() + 8, kVersion);
  bytes[12] = static_cast<unsigned char>(dtype);
  bytes[13] = static_cast<unsigned char>(symmetry);
  put_u64(bytes.data() + 16, m);
  return bytes;
}

MatrixHeader MatrixHeader::decode(const std::array<unsigned char, kSize>& bytes) {
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw IoError("bad magic: not a matrix file");
  }
  if (get_u32(bytes.data() + 8) != kVersion) throw IoError("unsupported matrix file version");
  if (bytes[12] > 1) throw IoError("invalid dtype code in matrix header");
  if (bytes[13] > 2) throw IoError("invalid symmetry code in matrix header");
  MatrixHeader header;
  header.dtype = static_cast<Dtype>(bytes[12]);
  header.symmetry = static_cast<Symmetry>(bytes[13]);
  header.m = get_u64(bytes.data() + 16);
  if (header.m == 0) throw IoError("matrix header declares m = 0");
  return header;
}

FileHandle& FileHandle::operator=(FileHandle&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(other.fd_, -1);
  }
  return *this;
}

FileHandle::~FileHandle() {
  if (fd_ >= 0) ::close(fd_);
}

void FileHandle::read_exact(std::uint64_t offset, void* dest, std::size_t bytes) const {
  auto* out = static_cast<char*>(dest);
  while (bytes > 0) {
    const ssize_t got = ::pread(fd_, out, bytes, static_cast<off_t>(offset));
    if (got < 0) {
      if (errno == EINTR) continue;
      throw IoError(std::string("read failed: ") + std::strerror(errno));
    }
    if (got == 0) throw IoError("short read: unexpected end of file");
    out += got;
    offset += static_cast<std::uint64_t>(got);
    bytes -= static_cast<std::size_t>(got);
  }
}

void FileHandle::write_exact(std::uint64_t offset, const void* src, std::size_t bytes) const {
  const auto* in = static_cast<const char*>(src);
  while (bytes > 0) {
    const ssize_t put = ::pwrite(fd_, in, bytes, static_cast<off_t>(offset));
    if (put < 0) {
      if (errno == EINTR) continue;
      throw IoError(std::string("write failed: ") + std::strerror(errno));
    }
    in += put;
    offset += static_cast<std::uint64_t>(put);
    bytes -= static_cast<std::size_t>(put);
  }
}

MatrixFile MatrixFile::create(const std::filesystem::path& path, Index m, Dtype dtype,
                              Symmetry symmetry) {
  if (m < 1) throw DomainError("matrix dimension must be positive");
  FileHandle handle(::open(path.c_str(), O_RDWR | O_CREAT | O_TRUNC | O_CLOEXEC, 0644));
  if (!handle) throw IoError(errno_message("cannot create matrix file", path));
  MatrixHeader header{dtype, symmetry, static_cast<std::uint64_t>(m)};
  const auto bytes = header.encode();
  handle.write_exact(0, bytes.data(), bytes.size());
  if (::ftruncate(handle.get(), static_cast<off_t>(expected_length(m, dtype))) != 0) {
    throw IoError(errno_message("cannot size matrix file", path));
  }
  return MatrixFile(path, header, std::move(handle), true);
}

MatrixFile MatrixFile::open(const std::filesystem::path& path, bool writable) {
  FileHandle handle(::open(path.c_str(), (writable ? O_RDWR : O_RDONLY) | O_CLOEXEC));
  if (!handle) throw IoError(errno_message("cannot open matrix file", path));
  struct stat st {};
  if (::fstat(handle.get(), &st) != 0) throw IoError(errno_message("cannot stat", path));
  if (static_cast<std::uint64_t>(st.st_size) < MatrixHeader::kSize) {
    throw IoError("matrix file shorter than its header: " + path.string());
  }
  std::array<unsigned char, MatrixHeader::kSize> bytes{};
  handle.read_exact(0, bytes.data(), bytes.size());
  const auto header = MatrixHeader::decode(bytes);
  if (static_cast<std::uint64_t>(st.st_size) !=
      expected_length(static_cast<Index>(header.m), header.dtype)) {
    throw IoError("matrix file length does not match its header: " + path.string());
  }
  return MatrixFile(path, header, std::move(handle), writable);
}

void MatrixFile::check_rect(Index row0, Index rows, Index col0, Index cols) const {
  const auto m = size();
  if (row0 < 0 || col0 < 0 || rows < 0 || cols < 0 || row0 + rows > m || col0 + cols > m) {
    throw DomainError("rectangle outside matrix bounds");
  }
}

Scratchpad::Scratchpad(const std::filesystem::path& dir, const BlockLayout& layout,
                       int element_bytes, Index capacity)
    : num_blocks_(layout.num_blocks),
      capacity_(capacity),
      slot_bytes_(static_cast<std::uint64_t>(layout.block_size) *
                  static_cast<std::uint64_t>(layout.block_size) *
                  static_cast<std::uint64_t>(element_bytes)),
      slot_map_(static_cast<std::size_t>(layout.num_blocks * layout.num_blocks), -1) {
  if (capacity_ <= 0) {
    capacity_ = 0;
    return;
  }
  static std::atomic<unsigned> serial{0};
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  path_ = dir / ("detscale-scratch-" + std::to_string(::getpid()) + "-" +
                 std::to_string(serial.fetch_add(1)) + ".bin");
  handle_ = FileHandle(::open(path_.c_str(), O_RDWR | O_CREAT | O_EXCL | O_CLOEXEC, 0600));
  if (!handle_) throw IoError(errno_message("cannot create scratchpad", path_));
  const auto total = slot_bytes_ * static_cast<std::uint64_t>(capacity_);
  if (::ftruncate(handle_.get(), static_cast<off_t>(total)) != 0) {
    throw IoError(errno_message("cannot size scratchpad", path_));
  }
}

Scratchpad::~Scratchpad() {
  if (handle_) {
    handle_ = FileHandle();
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
}

std::optional<Index> Scratchpad::slot_of(BlockIndex block) const {
  const Index slot = slot_map_[static_cast<std::size_t>(block.row * num_blocks_ + block.col)];
  if (slot < 0) return std::nullopt;
  return slot;
}

Index Scratchpad::acquire(BlockIndex block) {
  auto& slot = slot_map_[static_cast<std::size_t>(block.row * num_blocks_ + block.col)];
  if (slot >= 0) return slot;
  if (next_free_ >= capacity_) {
    throw NumericalError("scratchpad capacity exceeded (block schedule bug)");
  }
  slot = next_free_++;
  return slot;
}

void Scratchpad::write(Index slot, const void* src, std::size_t bytes) const {
  if (bytes > slot_bytes_) throw DomainError("scratch write larger than a slot");
  handle_.write_exact(static_cast<std::uint64_t>(slot) * slot_bytes_, src, bytes);
}

void Scratchpad::read(Index slot, void* dest, std::size_t bytes) const {
  if (bytes > slot_bytes_) throw DomainError("scratch read larger than a slot");
  handle_.read_exact(static_cast<std::uint64_t>(slot) * slot_bytes_, dest, bytes);
}

template <typename Scalar>
BlockStore<Scalar>::BlockStore(const MatrixFile& file, const BlockLayout& layout,
                               const std::filesystem::path& scratch_dir, Index scratch_capacity)
    : file_(file),
      layout_(layout),
      scratch_(scratch_dir, layout, static_cast<int>(sizeof(Scalar)), scratch_capacity),
      cache_(layout.num_blocks),
      row_buffer_(static_cast<std::size_t>(layout.block_size)) {
  if (layout.m != file.size()) throw DomainError("layout does not match matrix dimension");
}

template <typename Scalar>
void BlockStore<Scalar>::check(BlockIndex block) const {
  if (block.row < 0 || block.col < 0 || block.row >= layout_.num_blocks ||
      block.col >= layout_.num_blocks) {
    throw DomainError("block index out of range");
  }
}

template <typename Scalar>
void BlockStore<Scalar>::read_block(BlockIndex block, Tile<Scalar>& dest) {
  check(block);
  const Index rows = layout_.extent(block.row);
  const Index cols = layout_.extent(block.col);
  dest.reshape(rows, cols);
  const auto source = cache_.resolve(block);
  if (source.origin == CacheTable::Origin::scratch) {
    scratch_.read(source.slot, dest.data(), static_cast<std::size_t>(rows * cols) * sizeof(Scalar));
  } else {
    file_.read_rect(layout_.offset(block.row), rows, layout_.offset(block.col), cols, dest.data(),
                    cols);
  }
  ++counters_.blocks_read;
}

template <typename Scalar>
void BlockStore<Scalar>::read_block_transposed(BlockIndex block, Tile<Scalar>& dest) {
  check(block);
  const Index rows = layout_.extent(block.row);
  const Index cols = layout_.extent(block.col);
  dest.reshape(cols, rows);
  auto out = dest.view();
  const auto source = cache_.resolve(block);
  if (source.origin == CacheTable::Origin::scratch) {
    // Slots are contiguous; read whole and transpose through a temporary.
    RowMatrix<Scalar> tmp(rows, cols);
    scratch_.read(source.slot, tmp.data(), static_cast<std::size_t>(rows * cols) * sizeof(Scalar));
    out = tmp.transpose();
  } else {
    for (Index r = 0; r < rows; ++r) {
      file_.read_rect(layout_.offset(block.row) + r, 1, layout_.offset(block.col), cols,
                      row_buffer_.data(), cols);
      out.col(r) = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(row_buffer_.data(), cols);
    }
  }
  ++counters_.blocks_read;
}

template <typename Scalar>
void BlockStore<Scalar>::write_block_scratch(BlockIndex block, const Tile<Scalar>& src) {
  check(block);
  if (src.rows() != layout_.extent(block.row) || src.cols() != layout_.extent(block.col)) {
    throw DomainError("tile shape does not match block extent");
  }
  const Index slot = scratch_.acquire(block);
  scratch_.write(slot, src.data(), static_cast<std::size_t>(src.rows() * src.cols()) * sizeof(Scalar));
  cache_.mark_scratch(block, slot);
  ++counters_.blocks_written;
}

template class BlockStore<float>;
template class BlockStore<double>;

}  // namespace detscale
