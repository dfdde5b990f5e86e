#pragma once

// MTD1 raw tensor container:
//   bytes 0..3   ASCII "MTD1"
//   u32 LE       order N
//   N x u64 LE   extents
//   numel x f64 LE values in column-major order

#include <filesystem>
#include <iosfwd>

#include "mtensor/tensor.hpp"

namespace mtensor {

void write_tensor(std::ostream& os, const DenseTensor& t);
DenseTensor read_tensor(std::istream& is);

void save_tensor(const std::filesystem::path& path, const DenseTensor& t);
DenseTensor load_tensor(const std::filesystem::path& path);

}  // namespace mtensor
