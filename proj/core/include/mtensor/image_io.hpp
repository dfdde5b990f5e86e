#pragma once

// Netpbm images (P2/P3/P5/P6) as tensors of shape (height, width, channels)
// with values scaled to [0, 1] by the file's maxval.

#include <filesystem>
#include <iosfwd>

#include "mtensor/tensor.hpp"

namespace mtensor {

DenseTensor read_image(std::istream& is);
DenseTensor load_image(const std::filesystem::path& path);

/// Writes binary P6 (3 channels) or P5 (1 channel, or order-2 input) with
/// maxval 255; values are clamped to [0, 1]. `ascii` selects P3/P2.
void write_image(std::ostream& os, const DenseTensor& t, bool ascii = false);
void save_image(const std::filesystem::path& path, const DenseTensor& t, bool ascii = false);

/// Dispatches on the extension: .mtd1 uses the raw container, anything else
/// is treated as a netpbm image.
DenseTensor load_data(const std::filesystem::path& path);
void save_data(const std::filesystem::path& path, const DenseTensor& t);

}  // namespace mtensor
