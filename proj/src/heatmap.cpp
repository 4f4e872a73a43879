#include "etd/heatmap.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace etd::harness {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

}  // namespace

std::vector<double> field_from_table(const oracle::SuccessorDistanceTable& table,
                                     const envkit::TabularMDP& mdp,
                                     const envkit::GridLayout& layout, int probe_cell) {
  const int probe_state = mdp.state_of_cell.at(probe_cell);
  if (probe_state < 0) throw std::invalid_argument("field_from_table: probe cell is a wall");
  std::vector<double> field(static_cast<std::size_t>(layout.width) * layout.height, kNan);
  for (int s = 0; s < mdp.n; ++s) field[mdp.cell_of_state[s]] = table.values(probe_state, s);
  return field;
}

std::vector<double> field_from_model(const metricnet::QuasimetricModel& model,
                                     const envkit::GridLayout& layout, int probe_cell) {
  if (layout.wall(probe_cell % layout.width, probe_cell / layout.width))
    throw std::invalid_argument("field_from_model: probe cell is a wall");
  envkit::EnvState state = envkit::initial_state(layout);
  state.x = probe_cell % layout.width;
  state.y = probe_cell / layout.width;
  const Vec probe_obs = envkit::observe(layout, state);
  std::vector<double> field(static_cast<std::size_t>(layout.width) * layout.height, kNan);
  for (int y = 0; y < layout.height; ++y)
    for (int x = 0; x < layout.width; ++x) {
      if (layout.wall(x, y)) continue;
      state.x = x;
      state.y = y;
      field[layout.cell_index(x, y)] =
          metricnet::quasimetric_distance(model, probe_obs, envkit::observe(layout, state));
    }
  return field;
}

void emit_heatmap(const std::vector<double>& cell_distances, const envkit::GridLayout& layout,
                  const std::string& path, int cell_pixels) {
  if (cell_distances.size() != static_cast<std::size_t>(layout.width) * layout.height)
    throw std::invalid_argument("emit_heatmap: field size does not match layout");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double d : cell_distances) {
    if (std::isnan(d) || std::isinf(d)) continue;
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  const bool constant = !(hi > lo);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_heatmap: cannot open " + path);
  const int pw = layout.width * cell_pixels;
  const int ph = layout.height * cell_pixels;
  out << "P6\n" << pw << " " << ph << "\n65535\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(pw) * 6);
  for (int py = 0; py < ph; ++py) {
    for (int px = 0; px < pw; ++px) {
      const int cell = layout.cell_index(px / cell_pixels, py / cell_pixels);
      const double d = cell_distances[cell];
      std::uint16_t v = 0;  // walls, unreachable: black
      if (!std::isnan(d) && !std::isinf(d)) {
        const double normalized = constant ? 0.0 : (d - lo) / (hi - lo);
        v = static_cast<std::uint16_t>(std::lround(65535.0 * (1.0 - normalized)));
      }
      const std::size_t o = static_cast<std::size_t>(px) * 6;
      for (int ch = 0; ch < 3; ++ch) {
        row[o + 2 * ch] = static_cast<unsigned char>(v >> 8);
        row[o + 2 * ch + 1] = static_cast<unsigned char>(v & 0xff);
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw std::runtime_error("emit_heatmap: write failed for " + path);
}

std::uint16_t HeatmapImage::cell_value(const envkit::GridLayout& layout, int x, int y) const {
  (void)layout;
  const int px = x * cell_pixels + cell_pixels / 2;
  const int py = y * cell_pixels + cell_pixels / 2;
  return gray[static_cast<std::size_t>(py) * width + px];
}

double HeatmapImage::cell_darkness(const envkit::GridLayout& layout, int x, int y) const {
  return 1.0 - static_cast<double>(cell_value(layout, x, y)) / 65535.0;
}

HeatmapImage read_heatmap(const std::string& path, int cell_pixels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_heatmap: cannot open " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || maxval != 65535)
    throw std::runtime_error("read_heatmap: expected 16-bit P6 pixmap");
  in.get();  // single whitespace after header
  HeatmapImage img;
  img.width = w;
  img.height = h;
  img.cell_pixels = cell_pixels;
  img.gray.resize(static_cast<std::size_t>(w) * h);
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 6);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw std::runtime_error("read_heatmap: truncated file");
  for (std::size_t i = 0; i < img.gray.size(); ++i)
    img.gray[i] = static_cast<std::uint16_t>((raw[i * 6] << 8) | raw[i * 6 + 1]);
  return img;
}

}  // namespace etd::harness
