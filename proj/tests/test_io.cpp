#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <catch2/catch_amalgamated.hpp>

#include "idveil/io/image_io.hpp"
#include "idveil/io/latent_cache.hpp"

using namespace idveil;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test case, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("idveil-io-" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("pfm round-trip is exact for float-representable rasters") {
  TempDir tmp("pfm");
  Image im = Image::zeros(5, 4, 1);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 5; ++x) im.px(x, y) = (x * 7 + y * 3 - 10) / 8.0;
  }
  write_pfm(tmp.file("gray.pfm"), im);
  CHECK(read_pfm(tmp.file("gray.pfm")) == im);

  Image rgb = Image::zeros(3, 2, 3);
  for (std::size_t i = 0; i < rgb.data.size(); ++i) rgb.data[i] = static_cast<double>(i) / 4.0;
  write_pfm(tmp.file("color.pfm"), rgb);
  CHECK(read_pfm(tmp.file("color.pfm")) == rgb);

  // Header sanity: magic, dimensions, little-endian scale marker.
  std::ifstream is(tmp.file("color.pfm"), std::ios::binary);
  std::string magic, dims1, dims2, scale;
  is >> magic >> dims1 >> dims2 >> scale;
  CHECK(magic == "PF");
  CHECK(dims1 == "3");
  CHECK(dims2 == "2");
  CHECK(scale == "-1.0");
}

TEST_CASE("pfm rejects malformed files") {
  TempDir tmp("pfm-bad");
  const Image im = Image::zeros(2, 2, 2);
  CHECK_THROWS_AS(write_pfm(tmp.file("two.pfm"), im), IoError);
  CHECK_THROWS_AS(read_pfm(tmp.file("absent.pfm")), IoError);

  std::ofstream(tmp.file("magic.pfm")) << "P6\n2 2\n-1.0\n";
  CHECK_THROWS_AS(read_pfm(tmp.file("magic.pfm")), IoError);

  std::ofstream(tmp.file("be.pfm")) << "Pf\n1 1\n1.0\nxxxx";
  CHECK_THROWS_AS(read_pfm(tmp.file("be.pfm")), IoError);

  std::ofstream(tmp.file("short.pfm"), std::ios::binary) << "Pf\n2 2\n-1.0\nxxxx";
  CHECK_THROWS_AS(read_pfm(tmp.file("short.pfm")), IoError);

  std::ofstream(tmp.file("dims.pfm")) << "Pf\n0 2\n-1.0\n";
  CHECK_THROWS_AS(read_pfm(tmp.file("dims.pfm")), IoError);
}

TEST_CASE("segmentation masks persist through pgm plus label map") {
  TempDir tmp("seg");
  SegmentationMask seg(6, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 6; ++x) {
      seg.set(x, y, static_cast<Region>((x + y) % kRegionCount));
    }
  }
  write_segmentation(tmp.file("m.pgm"), tmp.file("m.json"), seg);
  CHECK(read_segmentation(tmp.file("m.pgm"), tmp.file("m.json")) == seg);

  // The sidecar names every label of the taxonomy.
  std::ifstream js(tmp.file("m.json"));
  nlohmann::json j;
  js >> j;
  CHECK(j["format"] == "segmentation-labels");
  CHECK(j["labels"].size() == kRegionCount);
  CHECK(j["labels"]["2"] == "eyes");
}

TEST_CASE("segmentation loading validates labels and map") {
  TempDir tmp("seg-bad");
  SegmentationMask seg(2, 2);
  write_segmentation(tmp.file("m.pgm"), tmp.file("m.json"), seg);

  SECTION("label value outside the declared set") {
    std::ofstream os(tmp.file("bad.pgm"), std::ios::binary);
    os << "P5\n2 2\n255\n";
    const char bytes[4] = {0, 1, 9, 2};
    os.write(bytes, 4);
    os.close();
    CHECK_THROWS_AS(read_segmentation(tmp.file("bad.pgm"), tmp.file("m.json")), IoError);
  }
  SECTION("foreign label map") {
    std::ofstream(tmp.file("bad.json"))
        << R"({"format":"segmentation-labels","labels":{"0":"void"}})";
    CHECK_THROWS_AS(read_segmentation(tmp.file("m.pgm"), tmp.file("bad.json")), IoError);
  }
  SECTION("missing files and broken headers") {
    CHECK_THROWS_AS(read_segmentation(tmp.file("nope.pgm"), tmp.file("m.json")), IoError);
    std::ofstream(tmp.file("ascii.pgm")) << "P2\n2 2\n255\n0 0 0 0\n";
    CHECK_THROWS_AS(read_segmentation(tmp.file("ascii.pgm"), tmp.file("m.json")), IoError);
    std::ofstream(tmp.file("trunc.pgm"), std::ios::binary) << "P5\n2 2\n255\nxy";
    CHECK_THROWS_AS(read_segmentation(tmp.file("trunc.pgm"), tmp.file("m.json")), IoError);
  }
}

TEST_CASE("latent cache round-trips values and metadata") {
  TempDir tmp("cache");
  // Values chosen representable in float32 so the round-trip is exact.
  std::vector<double> values;
  for (int i = 0; i < 12; ++i) values.push_back((i - 6) / 16.0);
  LatentCacheEntry entry;
  entry.latent = LatentCode::from_values(3, 4, values);
  entry.backend_id = "synthetic-test";
  entry.source_image_id = "img_000";
  entry.source_hash = 0xabcdef0123456789ull;

  save_latent_cache(tmp.file("l.bin"), tmp.file("l.json"), entry);
  const LatentCacheEntry back = load_latent_cache(tmp.file("l.bin"), tmp.file("l.json"));
  CHECK(back.latent == entry.latent);
  CHECK(back.backend_id == entry.backend_id);
  CHECK(back.source_image_id == entry.source_image_id);
  CHECK(back.source_hash == entry.source_hash);

  // The binary file is the bare tensor: 12 float32 values, nothing else.
  CHECK(fs::file_size(tmp.file("l.bin")) == 48);
}

TEST_CASE("latent cache loading rejects inconsistent files") {
  TempDir tmp("cache-bad");
  LatentCacheEntry entry;
  entry.latent = LatentCode(2, 3);
  entry.backend_id = "b";
  entry.source_image_id = "s";
  save_latent_cache(tmp.file("l.bin"), tmp.file("l.json"), entry);

  SECTION("binary shorter than the declared shape") {
    std::ofstream(tmp.file("short.bin"), std::ios::binary) << "1234";
    CHECK_THROWS_AS(load_latent_cache(tmp.file("short.bin"), tmp.file("l.json")), IoError);
  }
  SECTION("binary longer than the declared shape") {
    std::ofstream os(tmp.file("long.bin"), std::ios::binary);
    for (int i = 0; i < 28; ++i) os.put('\0');
    os.close();
    CHECK_THROWS_AS(load_latent_cache(tmp.file("long.bin"), tmp.file("l.json")), IoError);
  }
  SECTION("corrupt sidecar") {
    std::ofstream(tmp.file("bad.json")) << "{not json";
    CHECK_THROWS_AS(load_latent_cache(tmp.file("l.bin"), tmp.file("bad.json")), IoError);
    std::ofstream(tmp.file("field.json")) << R"({"shape":[2,3],"layout":"row-major"})";
    CHECK_THROWS_AS(load_latent_cache(tmp.file("l.bin"), tmp.file("field.json")), IoError);
    std::ofstream(tmp.file("layout.json"))
        << R"({"shape":[2,3],"layout":"column-major","dtype":"float32-le",)"
        << R"("backend_id":"b","source_image_id":"s","source_hash":0})";
    CHECK_THROWS_AS(load_latent_cache(tmp.file("l.bin"), tmp.file("layout.json")), IoError);
  }
}
