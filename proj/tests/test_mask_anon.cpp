#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "idveil/anon/mask_anon.hpp"
#include "idveil/metrics/disent.hpp"
#include "test_worlds.hpp"

using namespace idveil;

namespace {

// 6x3 label grid used by the pure pixel-level cases.
SegmentationMask toy_seg() {
  SegmentationMask seg(6, 3);
  for (int x = 0; x < 6; ++x) {
    seg.set(x, 0, Region::hair);
    seg.set(x, 2, Region::mouth);
  }
  seg.set(0, 1, Region::background);
  seg.set(1, 1, Region::skin);
  seg.set(2, 1, Region::eyes);
  seg.set(3, 1, Region::eyes);
  seg.set(4, 1, Region::nose);
  seg.set(5, 1, Region::other);
  return seg;
}

Image numbered_image(int width, int height, double offset) {
  Image im = Image::zeros(width, height, 1);
  for (std::size_t i = 0; i < im.data.size(); ++i) im.data[i] = offset + static_cast<double>(i);
  return im;
}

double embed_distance(const Backend& b, const Image& x, const Image& y) {
  return identity_distance(b.embed_identity(x), b.embed_identity(y));
}

}  // namespace

TEST_CASE("region mask marks exactly the requested labels") {
  const SegmentationMask seg = toy_seg();

  const PixelMask none = region_mask(seg, {});
  CHECK(none.replaced_count() == 0);

  const PixelMask everything = region_mask(seg, {SwapRegion::full});
  CHECK(everything.replaced_count() == 18);

  const PixelMask eyes = region_mask(seg, {SwapRegion::eyes});
  CHECK(eyes.replaced_count() == 2);
  CHECK_FALSE(eyes.at(2, 1));
  CHECK_FALSE(eyes.at(3, 1));
  CHECK(eyes.at(4, 1));

  // face = skin + eyes + nose + mouth; hair, background and other stay.
  const PixelMask face = region_mask(seg, {SwapRegion::face});
  CHECK(face.replaced_count() == 4 + 6);
  CHECK(face.at(0, 1));
  CHECK(face.at(0, 0));
  CHECK(face.at(5, 1));
  CHECK_FALSE(face.at(1, 1));
  CHECK_FALSE(face.at(0, 2));

  CHECK_THROWS_AS(swap_region_from_name("ears"), std::invalid_argument);
}

TEST_CASE("seg swap composes per pixel") {
  const Image s = numbered_image(4, 3, 0.0);
  const Image r = numbered_image(4, 3, 100.0);

  CHECK(seg_swap(s, r, PixelMask::ones(4, 3)) == s);

  PixelMask zeros = PixelMask::ones(4, 3);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 4; ++x) zeros.set(x, y, false);
  }
  CHECK(seg_swap(s, r, zeros) == r);

  PixelMask checker = PixelMask::ones(4, 3);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 4; ++x) checker.set(x, y, (x + y) % 2 == 0);
  }
  const Image mixed = seg_swap(s, r, checker);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 4; ++x) {
      CHECK(mixed.px(x, y) == ((x + y) % 2 == 0 ? s.px(x, y) : r.px(x, y)));
    }
  }

  // Swapping the source back over the replaced region restores the original.
  CHECK(seg_swap(mixed, s, checker) == s);

  const Image wrong = numbered_image(3, 3, 0.0);
  CHECK_THROWS_AS(seg_swap(s, wrong, checker), std::invalid_argument);
  CHECK_THROWS_AS(seg_swap(s, r, PixelMask::ones(5, 3)), std::invalid_argument);
}

TEST_CASE("color match transfers region statistics") {
  // Mask replaces the right half of a 4x1 image.
  PixelMask right = PixelMask::ones(4, 1);
  right.set(2, 0, false);
  right.set(3, 0, false);

  Image composited = Image::zeros(4, 1, 1);
  composited.px(0, 0) = -7.0;
  composited.px(1, 0) = 99.0;
  composited.px(2, 0) = 2.0;
  composited.px(3, 0) = 4.0;
  Image source = composited;
  source.px(2, 0) = 10.0;
  source.px(3, 0) = 14.0;

  SECTION("mean and spread move to the source statistics") {
    // Region stats: composited mean 3 sd 1, source mean 12 sd 2, so the
    // transfer maps 2 -> 10 and 4 -> 14 exactly.
    const Image matched = color_match(composited, source, right);
    CHECK(matched.px(2, 0) == 10.0);
    CHECK(matched.px(3, 0) == 14.0);
    CHECK(matched.px(0, 0) == -7.0);
    CHECK(matched.px(1, 0) == 99.0);
  }

  SECTION("already matching region is a fixed point") {
    const Image matched = color_match(source, source, right);
    CHECK_THAT(matched.px(2, 0), Catch::Matchers::WithinAbs(10.0, 1e-12));
    CHECK_THAT(matched.px(3, 0), Catch::Matchers::WithinAbs(14.0, 1e-12));
  }

  SECTION("constant region degrades to a mean shift") {
    Image flat = composited;
    flat.px(2, 0) = 5.0;
    flat.px(3, 0) = 5.0;
    const Image matched = color_match(flat, source, right);
    CHECK(matched.px(2, 0) == 12.0);
    CHECK(matched.px(3, 0) == 12.0);
  }

  SECTION("empty replaced region is an error") {
    CHECK_THROWS_AS(color_match(composited, source, PixelMask::ones(4, 1)),
                    std::invalid_argument);
  }
}

TEST_CASE("replacement face shares the source layout but not its identity") {
  const SyntheticWorld world(testing::std_world());
  const Image source = world.generate(world.sample_random_latent(3));
  const LatentShape shape = world.shape().latent_shape();
  const LatentMask identity_sel =
      mask_from_selection(shape, LayerSet({5, 6, 7, 8, 9}));

  // All-ones mask keeps every coordinate: the replacement is the exact
  // reconstruction of the source.
  CHECK(generate_same_mask_face(source, 42, LatentMask::ones(shape), world) == source);

  const Image r1 = generate_same_mask_face(source, 42, identity_sel, world);
  const Image r2 = generate_same_mask_face(source, 42, identity_sel, world);
  const Image r3 = generate_same_mask_face(source, 43, identity_sel, world);
  CHECK(r1 == r2);
  CHECK(r1 != r3);
  CHECK(world.parse_mask(r1) == world.parse_mask(source));
  // The donor moved the planted identity; reconstruction alone would not.
  CHECK(embed_distance(world, r1, source) > 0.0);
  CHECK(embed_distance(world, world.generate(world.encode(source)), source) == 0.0);
}

TEST_CASE("mask latent donor wiring is deterministic and seed-free") {
  const SyntheticWorld world(testing::std_world());
  const Image source = world.generate(world.sample_random_latent(8));
  const LatentMask identity_sel =
      mask_from_selection(world.shape().latent_shape(), LayerSet({5, 6, 7, 8, 9}));
  const Image a =
      generate_same_mask_face(source, 1, identity_sel, world, DonorSource::mask_latent);
  const Image b =
      generate_same_mask_face(source, 2, identity_sel, world, DonorSource::mask_latent);
  CHECK(a == b);
  CHECK(a != source);
  CHECK(donor_source_from_name("mask_latent") == DonorSource::mask_latent);
  CHECK(donor_source_from_name("random_latent") == DonorSource::random_latent);
  CHECK_THROWS_AS(donor_source_from_name("other"), std::invalid_argument);
}

TEST_CASE("masked anonymization keeps unswapped pixels bit-identical") {
  const SyntheticWorld world(testing::std_world());
  const LatentShape shape = world.shape().latent_shape();
  const LatentMask identity_sel =
      mask_from_selection(shape, LayerSet({5, 6, 7, 8, 9}));
  const Image source = world.generate(world.sample_random_latent(11));

  CHECK(anonymize_masked(source, {}, 5, identity_sel, world) == source);

  const Image out = anonymize_masked(source, {SwapRegion::eyes}, 5, identity_sel, world);
  const SegmentationMask seg = world.parse_mask(source);
  const PixelMask mask = region_mask(seg, {SwapRegion::eyes});
  const Image replacement = generate_same_mask_face(source, 5, identity_sel, world);
  bool any_replaced = false;
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      if (mask.at(x, y)) {
        CHECK(out.px(x, y) == source.px(x, y));
      } else {
        CHECK(out.px(x, y) == replacement.px(x, y));
        any_replaced = true;
      }
    }
  }
  CHECK(any_replaced);

  // Color correction only rewrites replaced pixels.
  const Image colored =
      anonymize_masked(source, {SwapRegion::eyes}, 5, identity_sel, world, true);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      if (mask.at(x, y)) CHECK(colored.px(x, y) == source.px(x, y));
    }
  }

  CHECK(anonymize_masked(source, {SwapRegion::eyes}, 5, identity_sel, world) == out);
  CHECK(anonymize_masked(source, {SwapRegion::eyes}, 6, identity_sel, world) != out);
}

TEST_CASE("identity distance grows with the swapped region") {
  // Raw planted-coordinate embeddings make the growth argument exact: each
  // larger region replaces a superset of identity coordinates.
  SyntheticWorldConfig cfg = testing::std_world(29);
  cfg.normalize_embeddings = false;
  const SyntheticWorld world(cfg);
  const LatentShape shape = world.shape().latent_shape();
  const LatentMask identity_sel =
      mask_from_selection(shape, LayerSet({5, 6, 7, 8, 9}));

  const std::vector<RegionSet> chain = {
      {SwapRegion::eyes},
      {SwapRegion::eyes, SwapRegion::nose},
      {SwapRegion::eyes, SwapRegion::nose, SwapRegion::mouth},
      {SwapRegion::face},
  };
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Image source = world.generate(world.sample_random_latent(100 + seed));
    double prev = -1.0;
    for (const auto& regions : chain) {
      const Image out = anonymize_masked(source, regions, seed, identity_sel, world);
      const double d = embed_distance(world, out, source);
      CHECK(d >= prev);
      prev = d;
    }
    CHECK(prev > 0.0);
  }
}
