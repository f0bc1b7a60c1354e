#include "osmda/render/labels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "osmda/util/text.hpp"

namespace osmda::render {

Box measure_label(const std::string& text, geo::Pixel anchor, int font_px) {
  const double w = kCharWidthRatio * font_px * static_cast<double>(util::utf8_length(text));
  const double h = font_px;
  return {anchor.x - w / 2, anchor.y - h / 2, anchor.x + w / 2, anchor.y + h / 2};
}

LabelCandidate make_candidate(const std::string& text, geo::Pixel anchor, int priority, int font_px) {
  return {text, anchor, priority, measure_label(text, anchor, font_px)};
}

std::vector<std::size_t> placement_order(const std::vector<LabelCandidate>& candidates) {
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ca = candidates[a];
    const auto& cb = candidates[b];
    if (ca.priority != cb.priority) return ca.priority > cb.priority;
    if (ca.box.area() != cb.box.area()) return ca.box.area() > cb.box.area();
    return ca.text < cb.text;
  });
  return order;
}

namespace {

// Uniform grid over the canvas; each placed box is listed in every cell it
// touches.
class Grid {
 public:
  Grid(double w, double h, double cell)
      : cell_(cell),
        nx_(std::max(1, static_cast<int>(std::ceil(w / cell)))),
        ny_(std::max(1, static_cast<int>(std::ceil(h / cell)))),
        cells_(static_cast<std::size_t>(nx_) * ny_) {}

  template <typename Fn>
  bool any(const Box& b, Fn&& overlaps) const {
    const auto [x0, y0, x1, y1] = range(b);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        for (std::size_t idx : cells_[static_cast<std::size_t>(y) * nx_ + x])
          if (overlaps(idx)) return true;
    return false;
  }

  void insert(const Box& b, std::size_t idx) {
    const auto [x0, y0, x1, y1] = range(b);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) cells_[static_cast<std::size_t>(y) * nx_ + x].push_back(idx);
  }

 private:
  std::array<int, 4> range(const Box& b) const {
    auto clampi = [](double v, int hi) { return std::clamp(static_cast<int>(std::floor(v)), 0, hi); };
    return {clampi(b.x0 / cell_, nx_ - 1), clampi(b.y0 / cell_, ny_ - 1), clampi(b.x1 / cell_, nx_ - 1),
            clampi(b.y1 / cell_, ny_ - 1)};
  }

  double cell_;
  int nx_, ny_;
  std::vector<std::vector<std::size_t>> cells_;
};

}  // namespace

std::vector<std::size_t> place_labels(const std::vector<LabelCandidate>& candidates, double width,
                                      double height) {
  std::vector<std::size_t> placed;
  Grid grid(width, height, 32.0);
  for (std::size_t idx : placement_order(candidates)) {
    const Box& b = candidates[idx].box;
    if (!b.inside(width, height)) continue;
    if (grid.any(b, [&](std::size_t other) { return candidates[other].box.overlaps(b); })) continue;
    grid.insert(b, idx);
    placed.push_back(idx);
  }
  return placed;
}

}  // namespace osmda::render
