#pragma once

// A MultipleFactors bundle on disk is a directory holding manifest.json
// ({"order", "ranks", "long_dims"}) and factor_<k>.mtd1 for k = 0..N-1.

#include <filesystem>

#include "mtensor/multiple.hpp"

namespace mtensor {

void save_factors(const std::filesystem::path& dir, const MultipleFactors& f);
MultipleFactors load_factors(const std::filesystem::path& dir);

}  // namespace mtensor
