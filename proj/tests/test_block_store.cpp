#include <doctest.h>

#include <fstream>

#include "detscale/block_store.hpp"
#include "oracles.hpp"

using namespace detscale;

namespace {

RowMatrix<double> ramp(Index m) {
  RowMatrix<double> M(m, m);
  for (Index r = 0; r < m; ++r) {
    for (Index c = 0; c < m; ++c) M(r, c) = static_cast<double>(r * 1000 + c);
  }
  return M;
}

}  // namespace

TEST_CASE("block layout uses b = 1 + floor((m-1)/n_b) and drops empty tail blocks") {
  auto L = BlockLayout::make(12, 3, 8);
  CHECK(L.block_size == 4);
  CHECK(L.num_blocks == 3);
  CHECK(L.tail == 4);

  L = BlockLayout::make(10, 3, 8);
  CHECK(L.block_size == 4);
  CHECK(L.num_blocks == 3);
  CHECK(L.tail == 2);

  L = BlockLayout::make(10, 6, 8);
  CHECK(L.block_size == 2);
  CHECK(L.num_blocks == 5);
  CHECK(L.tail == 2);

  L = BlockLayout::make(5, 1, 8);
  CHECK(L.block_size == 5);
  CHECK(L.num_blocks == 1);

  CHECK_THROWS_AS(BlockLayout::make(0, 1, 8), DomainError);
  CHECK_THROWS_AS(BlockLayout::make(4, 0, 8), DomainError);
}

TEST_CASE("header round-trips and has the documented byte layout") {
  MatrixHeader h;
  h.dtype = Dtype::f32;
  h.symmetry = Symmetry::spd;
  h.m = 0x0102030405ULL;
  const auto bytes = h.encode();
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "MEMDET01");
  CHECK(bytes[8] == 1);
  CHECK(bytes[12] == 1);
  CHECK(bytes[13] == 2);
  CHECK(bytes[16] == 0x05);
  CHECK(bytes[20] == 0x01);
  const auto back = MatrixHeader::decode(bytes);
  CHECK(back.dtype == Dtype::f32);
  CHECK(back.symmetry == Symmetry::spd);
  CHECK(back.m == h.m);
}

TEST_CASE("matrix file round-trip in both precisions") {
  oracle::TempDir dir;
  const RowMatrix<double> M = ramp(7);
  write_matrix_file(dir / "a.mat", M, Dtype::f64, Symmetry::generic);
  const auto f = MatrixFile::open(dir / "a.mat");
  CHECK(f.size() == 7);
  CHECK(std::filesystem::file_size(dir / "a.mat") == 64 + 7 * 7 * 8);
  CHECK(read_matrix_file<double>(f) == M);

  write_matrix_file(dir / "b.mat", M, Dtype::f32, Symmetry::symmetric);
  const auto g = MatrixFile::open(dir / "b.mat");
  CHECK(g.dtype() == Dtype::f32);
  CHECK(g.symmetry() == Symmetry::symmetric);
  CHECK(std::filesystem::file_size(dir / "b.mat") == 64 + 7 * 7 * 4);
  CHECK(read_matrix_file<double>(g) == M);  // small integers are exact in f32

  RowMatrix<double> rect(2, 3);
  f.read_rect<double>(4, 2, 1, 3, rect.data(), 3);
  CHECK(rect == M.block(4, 1, 2, 3));
}

TEST_CASE("open rejects bad magic, truncated files and read-only writes") {
  oracle::TempDir dir;
  write_matrix_file(dir / "a.mat", ramp(4), Dtype::f64, Symmetry::generic);
  std::filesystem::resize_file(dir / "a.mat", 64 + 4 * 4 * 8 - 8);
  CHECK_THROWS_AS(MatrixFile::open(dir / "a.mat"), IoError);

  {
    std::ofstream out(dir / "junk.mat", std::ios::binary);
    out << std::string(64 + 8, 'x');
  }
  CHECK_THROWS_AS(MatrixFile::open(dir / "junk.mat"), IoError);
  CHECK_THROWS_AS(MatrixFile::open(dir / "missing.mat"), IoError);

  write_matrix_file(dir / "c.mat", ramp(3), Dtype::f64, Symmetry::generic);
  auto ro = MatrixFile::open(dir / "c.mat");
  const double x = 1.0;
  CHECK_THROWS(ro.write_rect<double>(0, 1, 0, 1, &x, 1));
  CHECK_THROWS_AS(ro.read_rect<double>(2, 2, 0, 1, const_cast<double*>(&x), 1), DomainError);
}

TEST_CASE("block store reads from the original file until a block is written to scratch") {
  oracle::TempDir dir;
  const RowMatrix<double> M = ramp(10);
  const auto file = write_matrix_file(dir / "m.mat", M, Dtype::f64, Symmetry::generic);
  const auto layout = BlockLayout::make(10, 3, 8);  // b = 4, tail = 2
  {
    BlockStore<double> store(file, layout, dir.path(), 2);
    CHECK(store.scratch().created());
    Tile<double> t(4, 4);

    store.read_block({2, 1}, t);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 4);
    CHECK(t.view() == M.block(8, 4, 2, 4));

    store.read_block_transposed({2, 1}, t);
    CHECK(t.rows() == 4);
    CHECK(t.view() == M.block(8, 4, 2, 4).transpose());

    store.read_block({2, 1}, t);
    t.view().array() += 0.5;
    store.write_block_scratch({2, 1}, t);
    CHECK(store.cache().resolve({2, 1}).origin == CacheTable::Origin::scratch);
    CHECK(store.cache().resolve({1, 2}).origin == CacheTable::Origin::original);

    Tile<double> u(4, 4);
    store.read_block({2, 1}, u);
    CHECK(u.view() == (M.block(8, 4, 2, 4).array() + 0.5).matrix());
    store.read_block_transposed({2, 1}, u);
    CHECK(u.view() == (M.block(8, 4, 2, 4).array() + 0.5).matrix().transpose());

    // Rewriting a block reuses its slot.
    store.write_block_scratch({2, 1}, t);
    CHECK(store.scratch().used() == 1);
    store.read_block({0, 0}, t);
    store.write_block_scratch({0, 0}, t);
    CHECK(store.scratch().used() == 2);
    CHECK_THROWS(store.write_block_scratch({1, 1}, t));

    CHECK(store.counters().blocks_read == 6);
    CHECK(store.counters().blocks_written == 3);
  }
  // Input untouched, scratch removed.
  CHECK(read_matrix_file<double>(MatrixFile::open(dir / "m.mat")) == M);
  int files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
  CHECK(files == 1);
}

TEST_CASE("zero-capacity scratchpad creates no file") {
  oracle::TempDir dir;
  const auto file = write_matrix_file(dir / "m.mat", ramp(4), Dtype::f64, Symmetry::generic);
  BlockStore<double> store(file, BlockLayout::make(4, 2, 8), dir.path(), 0);
  CHECK_FALSE(store.scratch().created());
  int files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
  CHECK(files == 1);
}

TEST_CASE("tile reshape never exceeds its allocation") {
  Tile<double> t(3, 3);
  t.reshape(2, 4);
  CHECK(t.rows() == 2);
  CHECK_THROWS_AS(t.reshape(4, 3), DomainError);
  Tile<double> u(2, 2);
  u.view().setConstant(7.0);
  t.assign(u);
  CHECK(t.rows() == 2);
  CHECK(t.view()(1, 1) == 7.0);
}
