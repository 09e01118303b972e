#pragma once

#include <string>
#include <vector>

#include "sggan/core.hpp"
#include "sggan/image_io.hpp"

namespace sggan::cli {

// Figure-style layout: one row per input sample, one column per target.
struct GridSpec {
  std::vector<std::string> row_ids;
  std::vector<std::string> column_labels;
  int cell = 0;    // square cell side, px
  int margin = 2;  // gap and border, px
  bool include_input = true;
};

// cells[r][c] must all be cell x cell. Output is exactly
// (cols*cell + (cols+1)*margin) wide and (rows*cell + (rows+1)*margin) tall.
imageio::RawImage render_grid(const GridSpec& spec,
                              const std::vector<std::vector<core::ImageTensor>>& cells);

}  // namespace sggan::cli
