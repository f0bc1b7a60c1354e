#include <doctest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "osmda/error.hpp"
#include "osmda/geo.hpp"
#include "test_support.hpp"

using namespace osmda;
using geo::Geometry;
using geo::GeometryKind;
using geo::LonLat;

namespace {

Geometry ring(std::vector<LonLat> pts) {
  pts.push_back(pts.front());
  return {GeometryKind::kPolygon, std::move(pts)};
}

}  // namespace

TEST_CASE("pixel_ground_area squares the resolution") {
  CHECK(geo::pixel_ground_area(0.5) == 0.25);
  CHECK(geo::pixel_ground_area(1.0) == 1.0);
  CHECK(geo::pixel_ground_area(10.0) == 100.0);
  double prev = 0.0;
  for (double r = 0.05; r < 20; r *= 1.3) {
    CHECK(geo::pixel_ground_area(r) > prev);
    prev = geo::pixel_ground_area(r);
  }
  CHECK_THROWS_AS(geo::pixel_ground_area(0.0), Error);
  CHECK_THROWS_AS(geo::pixel_ground_area(-1.0), Error);
}

TEST_CASE("polygon_area of a 10 m square at the equator") {
  const LonLat o{0.0, 0.0};
  const auto sq = ring({o, test::offset_m(o, 10, 0), test::offset_m(o, 10, 10), test::offset_m(o, 0, 10)});
  CHECK(geo::polygon_area(sq) == doctest::Approx(100.0).epsilon(0.001));
}

TEST_CASE("polygon_area of a degenerate triangle is zero") {
  const LonLat a{11.0, 48.0}, b{11.001, 48.0};
  CHECK(geo::polygon_area(ring({a, b, b})) == doctest::Approx(0.0));
}

TEST_CASE("polygon_area of an irregular pentagon matches grid integration") {
  const LonLat o{11.57, 48.14};
  const auto pent = ring({test::offset_m(o, 0, 0), test::offset_m(o, 9, -1), test::offset_m(o, 12, 6),
                          test::offset_m(o, 5, 11), test::offset_m(o, -2, 5)});
  const double grid = oracle::grid_polygon_area(pent, 0.01);
  CHECK(geo::polygon_area(pent) == doctest::Approx(grid).epsilon(0.01));
}

TEST_CASE("polygon_area ignores vertex order and rotation") {
  const LonLat o{2.35, 48.85};
  std::vector<LonLat> pts{test::offset_m(o, 0, 0), test::offset_m(o, 30, 2), test::offset_m(o, 25, 20),
                          test::offset_m(o, 4, 14)};
  const double base = geo::polygon_area(ring(pts));
  auto rev = pts;
  std::reverse(rev.begin(), rev.end());
  CHECK(geo::polygon_area(ring(rev)) == doctest::Approx(base).epsilon(1e-12));
  for (std::size_t r = 1; r < pts.size(); ++r) {
    auto rot = pts;
    std::rotate(rot.begin(), rot.begin() + static_cast<long>(r), rot.end());
    CHECK(geo::polygon_area(ring(rot)) == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("polygon_area rejects open or short rings") {
  Geometry open{GeometryKind::kPolygon, {{0, 0}, {0.001, 0}, {0.001, 0.001}, {0, 0.001}}};
  CHECK_THROWS_AS(geo::polygon_area(open), Error);
  Geometry tiny{GeometryKind::kPolygon, {{0, 0}, {0.001, 0}, {0, 0}}};
  CHECK_THROWS_AS(geo::polygon_area(tiny), Error);
  try {
    geo::polygon_area(open);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidGeometry);
  }
}

TEST_CASE("linestring_length") {
  const LonLat p{11.0, 48.0};
  CHECK(geo::linestring_length({GeometryKind::kLineString, {p, p}}) == 0.0);

  const double dlat = 1000.0 / (3.14159265358979323846 * geo::kEarthRadiusM / 180.0);
  const Geometry north{GeometryKind::kLineString, {p, {p.lon, p.lat + dlat}}};
  CHECK(geo::linestring_length(north) == doctest::Approx(1000.0).epsilon(0.001));

  std::mt19937 gen(3);
  std::uniform_real_distribution<double> d(-0.01, 0.01);
  std::vector<LonLat> zig{p};
  for (int i = 0; i < 12; ++i) zig.push_back({zig.back().lon + d(gen), zig.back().lat + d(gen)});
  double oracle = 0.0;
  for (std::size_t i = 1; i < zig.size(); ++i) oracle += geo::haversine_m(zig[i - 1], zig[i]);
  const Geometry g{GeometryKind::kLineString, zig};
  CHECK(geo::linestring_length(g) == oracle);

  auto rev = zig;
  std::reverse(rev.begin(), rev.end());
  CHECK(geo::linestring_length({GeometryKind::kLineString, rev}) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK_THROWS_AS(geo::linestring_length({GeometryKind::kLineString, {p}}), Error);
}

TEST_CASE("haversine against a hand-computed value") {
  // Munich -> Berlin, widely quoted ~504 km great-circle distance
  const double d = geo::haversine_m({11.5820, 48.1351}, {13.4050, 52.5200});
  CHECK(d == doctest::Approx(504000).epsilon(0.005));
}

TEST_CASE("footprint transform anchors corners and inverts") {
  const auto rec = test::square_image("t", {11.57, 48.14}, 256, 0.5);
  const geo::FootprintTransform tf(rec);
  const auto& b = rec.footprint;
  auto nw = tf.to_pixel({b.min_lon, b.max_lat});
  CHECK(nw.x == doctest::Approx(0.0));
  CHECK(nw.y == doctest::Approx(0.0));
  auto se = tf.to_pixel({b.max_lon, b.min_lat});
  CHECK(se.x == doctest::Approx(256.0));
  CHECK(se.y == doctest::Approx(256.0));
  auto c = tf.to_pixel(b.center());
  CHECK(c.x == doctest::Approx(128.0));
  CHECK(c.y == doctest::Approx(128.0));

  std::mt19937 gen(11);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  double prev_x = -1e9, prev_y = 1e9;
  for (int i = 0; i < 200; ++i) {
    const LonLat p{b.min_lon + u(gen) * (b.max_lon - b.min_lon), b.min_lat + u(gen) * (b.max_lat - b.min_lat)};
    const auto back = tf.to_lonlat(tf.to_pixel(p));
    const auto px = tf.to_pixel(p), px2 = tf.to_pixel(back);
    CHECK(std::abs(px.x - px2.x) < 1e-9);
    CHECK(std::abs(px.y - px2.y) < 1e-9);
  }
  for (int i = 0; i <= 10; ++i) {
    const double f = i / 10.0;
    const auto px = tf.to_pixel({b.min_lon + f * (b.max_lon - b.min_lon), b.min_lat + f * (b.max_lat - b.min_lat)});
    CHECK(px.x > prev_x);
    CHECK(px.y < prev_y);  // north is row 0
    prev_x = px.x;
    prev_y = px.y;
  }
}

TEST_CASE("bbox and image record invariants") {
  CHECK_THROWS_AS((geo::BBox{1, 0, 0, 1}.validate()), Error);
  CHECK_THROWS_AS((geo::BBox{0, 1, 1, 0}.validate()), Error);
  CHECK_THROWS_AS((geo::BBox{0, -91, 1, 0}.validate()), Error);
  CHECK_THROWS_AS((geo::BBox{179.5, 0, 181, 1}.validate()), Error);
  CHECK_NOTHROW((geo::BBox{0, 0, 1, 1}.validate()));

  auto rec = test::square_image("ok", {11.57, 48.14}, 128, 1.0);
  CHECK_NOTHROW(rec.validate());
  auto off = rec;
  off.resolution_m = 1.06;  // 6% inconsistent
  CHECK_THROWS_AS(off.validate(), Error);
  auto near = rec;
  near.resolution_m = 1.04;
  CHECK_NOTHROW(near.validate());
  auto zero = rec;
  zero.width_px = 0;
  CHECK_THROWS_AS(zero.validate(), Error);
}

TEST_CASE("geometry validation") {
  CHECK_THROWS_AS((Geometry{GeometryKind::kLineString, {{0, 0}}}.validate()), Error);
  CHECK_THROWS_AS((Geometry{GeometryKind::kPoint, {{std::nan(""), 0}}}.validate()), Error);
  CHECK_NOTHROW((Geometry{GeometryKind::kPoint, {{1, 1}}}.validate()));
}
