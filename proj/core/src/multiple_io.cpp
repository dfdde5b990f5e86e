#include "mtensor/multiple_io.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "mtensor/tensor_io.hpp"

namespace mtensor {

namespace fs = std::filesystem;
using nlohmann::json;

void save_factors(const fs::path& dir, const MultipleFactors& f) {
  f.validate();
  fs::create_directories(dir);
  json manifest = {
      {"format", "mtensor-multiple"},
      {"order", f.order()},
      {"ranks", f.ranks},
      {"long_dims", f.long_dims},
  };
  std::ofstream os(dir / "manifest.json");
  if (!os) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  os << manifest.dump(2) << '\n';
  for (Index k = 0; k < f.order(); ++k) save_tensor(dir / ("factor_" + std::to_string(k) + ".mtd1"), f.factors[k]);
}

MultipleFactors load_factors(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw std::runtime_error("missing manifest.json in " + dir.string());
  const json manifest = json::parse(is);
  MultipleFactors f;
  f.ranks = manifest.at("ranks").get<Shape>();
  f.long_dims = manifest.at("long_dims").get<Shape>();
  const auto order = manifest.at("order").get<Index>();
  if (order != f.ranks.size() || order != f.long_dims.size()) {
    throw std::runtime_error("manifest.json: order disagrees with ranks/long_dims");
  }
  for (Index k = 0; k < order; ++k) f.factors.push_back(load_tensor(dir / ("factor_" + std::to_string(k) + ".mtd1")));
  f.validate();
  return f;
}

}  // namespace mtensor
