#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "etd/envkit.hpp"
#include "etd/metricnet.hpp"
#include "etd/oracle.hpp"

namespace etd::harness {

/// Distance from the probe cell to every free cell; NaN marks walls.
std::vector<double> field_from_table(const oracle::SuccessorDistanceTable& table,
                                     const envkit::TabularMDP& mdp,
                                     const envkit::GridLayout& layout, int probe_cell);

std::vector<double> field_from_model(const metricnet::QuasimetricModel& model,
                                     const envkit::GridLayout& layout, int probe_cell);

/// Writes a binary 16-bit PNM pixmap. Free-cell darkness encodes min-max
/// normalized distance (darker = farther); walls and unreachable cells are
/// black. A constant field renders uniformly white.
void emit_heatmap(const std::vector<double>& cell_distances, const envkit::GridLayout& layout,
                  const std::string& path, int cell_pixels = 8);

struct HeatmapImage {
  int width = 0, height = 0;
  int cell_pixels = 1;
  std::vector<std::uint16_t> gray;  // row-major pixels

  std::uint16_t cell_value(const envkit::GridLayout& layout, int x, int y) const;
  /// Darkness in [0, 1]; 0 at white.
  double cell_darkness(const envkit::GridLayout& layout, int x, int y) const;
};

HeatmapImage read_heatmap(const std::string& path, int cell_pixels = 8);

}  // namespace etd::harness
