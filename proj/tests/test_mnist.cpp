#include <doctest.h>

#include <algorithm>
#include <set>

#include "helpers.hpp"

using namespace testing;

namespace {

struct IdxFixture {
  TempDir dir{"idx"};
  std::vector<std::uint8_t> pixels;
  std::vector<std::uint8_t> labels;

  IdxFixture() {
    for (int i = 0; i < 3 * 4; ++i) pixels.push_back(static_cast<std::uint8_t>(i * 20));
    pixels[5] = 255;
    labels = {7, 0, 9};
  }
  std::filesystem::path images() const { return dir / "img"; }
  std::filesystem::path label_file() const { return dir / "lbl"; }
  void write(std::vector<std::uint8_t> img, std::vector<std::uint8_t> lbl) const {
    write_bytes(images(), img);
    write_bytes(label_file(), lbl);
  }
};

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::invalid_argument;
}

}  // namespace

TEST_CASE("load_idx reads headers, labels and scaled pixels") {
  IdxFixture f;
  f.write(idx_images(3, 2, 2, f.pixels), idx_labels(f.labels));
  const auto d = load_idx(f.images(), f.label_file());
  REQUIRE(d.size() == 3);
  CHECK(d.rows() == 2);
  CHECK(d.cols() == 2);
  CHECK(d.label(0) == 7);
  CHECK(d.label(2) == 9);
  CHECK(d.pixel(1, 1) == 1.0);  // byte 255
  CHECK(d.pixel(0, 1) == 20.0 / 255.0);
  // Byte-for-byte round trip at the documented offsets.
  const auto raw = read_bytes(f.images());
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t p = 0; p < 4; ++p) CHECK(d.raw_image(i)[p] == raw[16 + i * 4 + p]);
  const auto raw_labels = read_bytes(f.label_file());
  for (std::size_t i = 0; i < 3; ++i) CHECK(d.label(i) == raw_labels[8 + i]);
}

TEST_CASE("load_idx errors") {
  IdxFixture f;
  SUBCASE("bad image magic names the magic") {
    f.write(idx_images(3, 2, 2, f.pixels, 0x00000804), idx_labels(f.labels));
    try {
      load_idx(f.images(), f.label_file());
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::bad_magic);
      CHECK(std::string(e.what()).find("0x00000804") != std::string::npos);
    }
  }
  SUBCASE("bad label magic") {
    f.write(idx_images(3, 2, 2, f.pixels), idx_labels(f.labels, 2051));
    CHECK(code_of([&] { load_idx(f.images(), f.label_file()); }) == ErrorCode::bad_magic);
  }
  SUBCASE("truncated pixels") {
    auto img = idx_images(3, 2, 2, f.pixels);
    img.pop_back();
    f.write(img, idx_labels(f.labels));
    CHECK(code_of([&] { load_idx(f.images(), f.label_file()); }) == ErrorCode::truncated);
  }
  SUBCASE("truncated header") {
    f.write({0, 0, 8}, idx_labels(f.labels));
    CHECK(code_of([&] { load_idx(f.images(), f.label_file()); }) == ErrorCode::truncated);
  }
  SUBCASE("count mismatch") {
    f.write(idx_images(3, 2, 2, f.pixels), idx_labels({1, 2}));
    CHECK(code_of([&] { load_idx(f.images(), f.label_file()); }) == ErrorCode::count_mismatch);
  }
  SUBCASE("label out of range") {
    f.write(idx_images(3, 2, 2, f.pixels), idx_labels({1, 2, 10}));
    CHECK(code_of([&] { load_idx(f.images(), f.label_file()); }) == ErrorCode::parse);
  }
  SUBCASE("missing file") {
    CHECK(code_of([&] { load_idx(f.dir / "nope", f.label_file()); }) == ErrorCode::io);
  }
}

TEST_CASE("split") {
  const auto data = blob_dataset(200, 4, 3);

  SUBCASE("same seed gives identical partitions") {
    const auto a = split(data, {50, 9});
    const auto b = split(data, {50, 9});
    REQUIRE(a.validation.size() == 50);
    REQUIRE(a.fit.size() == 150);
    for (std::size_t i = 0; i < 50; ++i) {
      CHECK(a.validation.label(i) == b.validation.label(i));
      CHECK(std::ranges::equal(a.validation.raw_image(i), b.validation.raw_image(i)));
    }
  }
  SUBCASE("validation size zero keeps everything in the fit set") {
    const auto s = split(data, {0, 1});
    CHECK(s.validation.empty());
    REQUIRE(s.fit.size() == data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      CHECK(std::ranges::equal(s.fit.raw_image(i), data.raw_image(i)));
  }
  SUBCASE("validation size must be smaller than the dataset") {
    CHECK_THROWS_AS(split(data, {200, 1}), Error);
  }
  SUBCASE("disjoint and exhaustive over many seeds") {
    // Tag each image by a unique first pixel pair so membership is checkable.
    std::vector<std::uint8_t> pixels, labels;
    for (std::size_t i = 0; i < 300; ++i) {
      pixels.push_back(static_cast<std::uint8_t>(i % 256));
      pixels.push_back(static_cast<std::uint8_t>(i / 256));
      labels.push_back(static_cast<std::uint8_t>(i % 10));
    }
    const Dataset tagged(1, 2, pixels, labels);
    auto tag = [](const Dataset& d, std::size_t i) {
      return d.raw_image(i)[0] + 256 * d.raw_image(i)[1];
    };
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      const auto s = split(tagged, {seed * 7 % 299, seed});
      std::set<int> seen;
      for (std::size_t i = 0; i < s.fit.size(); ++i) seen.insert(tag(s.fit, i));
      for (std::size_t i = 0; i < s.validation.size(); ++i) seen.insert(tag(s.validation, i));
      CHECK(seen.size() == 300);
      CHECK(s.fit.size() + s.validation.size() == 300);
    }
  }
}

TEST_CASE("dataset ids distinguish contents and survive copies") {
  const auto a = blob_dataset(10, 4, 1);
  const auto b = blob_dataset(10, 4, 1);
  const Dataset a2 = a;
  CHECK(a.id() != b.id());
  CHECK(a2.id() == a.id());
}

#ifdef EVOPRUNE_MNIST_DIR
TEST_CASE("canonical MNIST files") {
  const std::filesystem::path dir = EVOPRUNE_MNIST_DIR;
  if (!std::filesystem::exists(dir / "train-images-idx3-ubyte")) {
    MESSAGE("MNIST not found in " << dir.string() << "; run tools/fetch_mnist.sh");
    return;
  }
  const auto train = load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
  const auto test = load_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
  CHECK(train.size() == 60000);
  CHECK(test.size() == 10000);
  CHECK(train.rows() == 28);
  const auto s = split(train, {1000, 0});
  CHECK(s.fit.size() == 59000);
  CHECK(s.validation.size() == 1000);
}
#endif
