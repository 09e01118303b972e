#include "sggan/grid.hpp"

#include <stdexcept>

namespace sggan::cli {

imageio::RawImage render_grid(const GridSpec& spec,
                              const std::vector<std::vector<core::ImageTensor>>& cells) {
  if (cells.empty() || cells[0].empty())
    throw std::invalid_argument("render_grid: rows and columns must be nonempty");
  size_t cols = cells[0].size();
  int cell = spec.cell;
  int margin = spec.margin;
  if (cell <= 0) throw std::invalid_argument("render_grid: cell size must be positive");

  int rows = static_cast<int>(cells.size());
  int width = static_cast<int>(cols) * cell + (static_cast<int>(cols) + 1) * margin;
  int height = rows * cell + (rows + 1) * margin;
  imageio::RawImage out(height, width);
  // mid-gray background in the margins
  for (uint8_t& v : out.rgb) v = 32;

  for (int r = 0; r < rows; ++r) {
    if (cells[static_cast<size_t>(r)].size() != cols)
      throw std::invalid_argument("render_grid: ragged rows");
    for (size_t c = 0; c < cols; ++c) {
      const core::ImageTensor& img = cells[static_cast<size_t>(r)][c];
      if (img.height != cell || img.width != cell)
        throw std::invalid_argument("render_grid: cell image size mismatch");
      std::vector<uint8_t> bytes = core::from_unit_range(img);
      int oy = margin + r * (cell + margin);
      int ox = margin + static_cast<int>(c) * (cell + margin);
      for (int y = 0; y < cell; ++y)
        for (int x = 0; x < cell; ++x)
          for (int ch = 0; ch < 3; ++ch)
            out.rgb[(static_cast<size_t>(oy + y) * width + (ox + x)) * 3 + ch] =
                bytes[(static_cast<size_t>(y) * cell + x) * 3 + ch];
    }
  }
  return out;
}

}  // namespace sggan::cli
