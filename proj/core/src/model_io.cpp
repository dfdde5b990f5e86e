#include "mtensor/model_io.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "mtensor/tensor_io.hpp"

namespace mtensor {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("missing " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

fs::path layer_file(const fs::path& dir, Index i) { return dir / ("layer_" + std::to_string(i) + ".mtd1"); }
fs::path net_dir(const fs::path& dir, Index n) { return dir / ("net_" + std::to_string(n)); }

}  // namespace

void save_mlp(const fs::path& dir, const Mlp& net) {
  fs::create_directories(dir);
  std::vector<Index> widths{1};
  for (const Matrix& h : net.weights()) widths.push_back(static_cast<Index>(h.rows()));
  write_json(dir / "manifest.json",
             {{"format", "mtensor-mlp"}, {"depth", net.depth()}, {"widths", widths}, {"omega0", net.omega0()}});
  for (Index i = 0; i < net.depth(); ++i) {
    const Matrix& h = net.weights()[i];
    const Shape shape{static_cast<Index>(h.rows()), static_cast<Index>(h.cols())};
    save_tensor(layer_file(dir, i), DenseTensor(shape, std::vector<double>(h.data(), h.data() + h.size())));
  }
}

Mlp load_mlp(const fs::path& dir) {
  const json manifest = read_json(dir / "manifest.json");
  const auto depth = manifest.at("depth").get<Index>();
  const auto widths = manifest.at("widths").get<std::vector<Index>>();
  if (widths.size() != depth + 1) throw std::runtime_error("mlp manifest: widths must have depth + 1 entries");
  std::vector<Matrix> weights;
  for (Index i = 0; i < depth; ++i) {
    const DenseTensor t = load_tensor(layer_file(dir, i));
    if (t.order() != 2 || t.extent(0) != widths[i + 1] || t.extent(1) != widths[i]) {
      throw std::runtime_error("mlp checkpoint: layer " + std::to_string(i) + " disagrees with the manifest widths");
    }
    weights.push_back(Eigen::Map<const Matrix>(t.data().data(), static_cast<Eigen::Index>(t.extent(0)),
                                               static_cast<Eigen::Index>(t.extent(1))));
  }
  return Mlp(std::move(weights), manifest.at("omega0").get<double>());
}

void save_imtd(const fs::path& dir, const ImtdModel& model) {
  fs::create_directories(dir);
  json domains = json::array();
  for (const Interval& d : model.domains()) domains.push_back({d.lo, d.hi});
  json nets = json::array();
  for (const Mlp& net : model.nets()) {
    nets.push_back({{"depth", net.depth()}, {"hidden", net.hidden()}, {"out_dim", net.out_dim()}, {"omega0", net.omega0()}});
  }
  write_json(dir / "manifest.json", {{"format", "mtensor-imtd"},
                                     {"order", model.order()},
                                     {"ranks", model.ranks()},
                                     {"domains", domains},
                                     {"nets", nets}});
  for (Index n = 0; n < model.order(); ++n) save_mlp(net_dir(dir, n), model.nets()[n]);
}

ImtdModel load_imtd(const fs::path& dir) {
  const json manifest = read_json(dir / "manifest.json");
  const auto order = manifest.at("order").get<Index>();
  auto ranks = manifest.at("ranks").get<Shape>();
  const json& jd = manifest.at("domains");
  if (ranks.size() != order || jd.size() != order) throw std::runtime_error("imtd manifest: order mismatch");
  std::vector<Interval> domains;
  for (const json& d : jd) domains.push_back({d.at(0).get<double>(), d.at(1).get<double>()});
  std::vector<Mlp> nets;
  for (Index n = 0; n < order; ++n) nets.push_back(load_mlp(net_dir(dir, n)));
  return ImtdModel(std::move(ranks), std::move(domains), std::move(nets));
}

}  // namespace mtensor
