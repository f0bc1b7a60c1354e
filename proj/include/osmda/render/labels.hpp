#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "osmda/geo.hpp"

namespace osmda::render {

// Pixel rectangle [x0, x1) x [y0, y1).
struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  double area() const noexcept { return (x1 - x0) * (y1 - y0); }
  // Interiors overlap; boxes that only share an edge do not.
  bool overlaps(const Box& o) const noexcept {
    return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
  }
  bool inside(double w, double h) const noexcept {
    return x0 >= 0 && y0 >= 0 && x1 <= w && y1 <= h;
  }

  friend bool operator==(const Box&, const Box&) = default;
};

inline constexpr double kCharWidthRatio = 0.6;

struct LabelCandidate {
  std::string text;
  geo::Pixel anchor;
  int priority = 0;
  Box box;
};

// Box of `text` centred on the anchor: width 0.6 x font_px per code point,
// height font_px.
Box measure_label(const std::string& text, geo::Pixel anchor, int font_px = 12);
LabelCandidate make_candidate(const std::string& text, geo::Pixel anchor, int priority, int font_px = 12);

// Greedy placement in (priority desc, box area desc, text asc, input index)
// order; a candidate is placed when it fits the canvas and overlaps nothing
// placed so far. Returns candidate indices in placement order.
std::vector<std::size_t> place_labels(const std::vector<LabelCandidate>& candidates, double width,
                                      double height);

// The order place_labels visits candidates in.
std::vector<std::size_t> placement_order(const std::vector<LabelCandidate>& candidates);

}  // namespace osmda::render
