#pragma once

// Network checkpoints: a directory with manifest.json (depth, widths, omega0)
// and layer_<i>.mtd1 holding each weight matrix as a 2-way tensor.
// IMTD bundles: manifest.json (ranks, domains, network configs) plus one
// checkpoint directory net_<n> per mode.

#include <filesystem>

#include "mtensor/imtd.hpp"
#include "mtensor/mlp.hpp"

namespace mtensor {

void save_mlp(const std::filesystem::path& dir, const Mlp& net);
Mlp load_mlp(const std::filesystem::path& dir);

void save_imtd(const std::filesystem::path& dir, const ImtdModel& model);
ImtdModel load_imtd(const std::filesystem::path& dir);

}  // namespace mtensor
