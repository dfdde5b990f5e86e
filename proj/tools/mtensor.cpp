// mtensor: robust tensor completion and point-cloud upsampling from the shell.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mtensor/image_io.hpp"
#include "mtensor/model_io.hpp"
#include "mtensor/pcu.hpp"
#include "mtensor/rtc.hpp"

using namespace mtensor;
using nlohmann::json;

namespace {

constexpr int kExitDivergence = 2;

// "auto" -> empty, otherwise a comma-separated list of positive integers.
Shape parse_ranks(const std::string& text) {
  if (text == "auto") return {};
  Shape out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || v <= 0) throw CLI::ValidationError("--ranks", "expected 'auto' or a list like 8,8,3");
    out.push_back(static_cast<Index>(v));
  }
  return out;
}

void write_json(const std::string& path, const json& j) {
  if (path.empty()) return;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << j.dump(2) << '\n';
}

void write_history(const std::string& path, const std::vector<PalsRecord>& history) {
  if (path.empty()) return;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_history_jsonl(os, history);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct RtcOptions {
  std::string input, out, metrics, history, ranks = "auto", gamma = "auto", model_dir;
  double sr = 0.4, sigma = 0.2, lambda = PalsConfig{}.lambda, eta = PalsConfig{}.eta, lr = AdamConfig{}.lr;
  double tol = PalsConfig{}.tol;
  Index iters = PalsConfig{}.outer_iters, inner = PalsConfig{}.inner_steps;
  Index hidden = NetShape{}.hidden, depth = NetShape{}.depth;
  double omega0 = NetShape{}.omega0;
  std::uint64_t seed = 0;
};

int run_rtc(const RtcOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const DenseTensor clean = load_data(o.input);
  const Corruption c = corrupt(clean, o.sr, o.sigma, o.seed);

  RtcProblem p{c.observed, c.mask};
  p.ranks = parse_ranks(o.ranks);
  p.config.lambda = o.lambda;
  p.config.gamma = o.gamma == "auto" ? default_gamma(c.observed, c.mask) : std::stod(o.gamma);
  p.config.eta = o.eta;
  p.config.outer_iters = o.iters;
  p.config.inner_steps = o.inner;
  p.config.tol = o.tol;
  p.config.seed = o.seed;
  p.config.adam.lr = o.lr;
  p.net = {o.depth, o.hidden, o.omega0};

  RtcResult r;
  try {
    r = rtc_recover(p);
  } catch (const PalsDivergence& d) {
    std::cerr << "mtensor rtc: solver diverged: " << d.what() << '\n';
    write_history(o.history, d.history());
    json m = {{"status", "diverged"}, {"error", d.what()}, {"iterations", d.history().size()},
              {"runtime_s", seconds_since(t0)}};
    write_json(o.metrics, m);
    return kExitDivergence;
  }

  if (!o.out.empty()) save_data(o.out, r.recovered);
  if (!o.model_dir.empty()) save_imtd(o.model_dir, r.model);
  write_history(o.history, r.history);
  const PalsRecord& last = r.history.back();
  json m = {
      {"status", "ok"},
      {"psnr", psnr(r.recovered, clean, p.peak)},
      {"psnr_observed", psnr(c.observed, clean, p.peak)},
      {"runtime_s", seconds_since(t0)},
      {"G", last.g},
      {"V", last.v},
      {"iterations", last.iteration},
      {"converged", r.converged},
      {"ranks", r.model.ranks()},
      {"gamma", p.config.gamma},
      {"shape", clean.shape()},
      {"observed_fraction", c.mask.fraction()},
  };
  write_json(o.metrics, m);
  std::cout << m.dump() << '\n';
  return 0;
}

struct PcuOptions {
  std::string input, out, metrics, truth, ranks = "auto", model_dir;
  double tau = PcuConfig{}.tau, f_distance = 0.05, lr = AdamConfig{}.lr;
  Index candidates = PcuConfig{}.candidates, steps = PcuConfig{}.steps;
  std::uint64_t seed = 0;
};

int run_pcu(const PcuOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  PcuConfig cfg;
  cfg.tau = o.tau;
  cfg.candidates = o.candidates;
  cfg.steps = o.steps;
  cfg.seed = o.seed;
  cfg.adam.lr = o.lr;
  cfg.ranks = parse_ranks(o.ranks);
  cfg.validate();

  const PointCloud cloud = make_cloud(read_xyz(o.input));
  const PcuFit fit = train_sdf(cloud, cfg);
  const PointCloud dense = extract_points(fit.model, cloud.norm, cfg);
  if (!o.out.empty()) write_xyz(o.out, dense.points);
  if (!o.model_dir.empty()) save_imtd(o.model_dir, fit.model.imtd);

  json m = {
      {"input_points", cloud.size()},
      {"output_points", dense.size()},
      {"ranks", fit.model.imtd.ranks()},
      {"final_loss", fit.loss_history.back()},
      {"runtime_s", seconds_since(t0)},
  };
  if (!o.truth.empty()) {
    const Matrix truth = read_xyz(o.truth);
    m["cd_input"] = chamfer(cloud.points, truth);
    m["cd"] = chamfer(dense.points, truth);
    m["f_score"] = f_score(dense.points, truth, o.f_distance);
    m["f_distance"] = o.f_distance;
  }
  write_json(o.metrics, m);
  std::cout << m.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Implicit Multiple tensor decomposition tools"};
  app.require_subcommand(1);

  RtcOptions ro;
  auto* rtc = app.add_subcommand("rtc", "Corrupt a tensor, then recover it with TV-regularized robust completion");
  rtc->add_option("--input", ro.input, "Clean data: .ppm/.pgm image or .mtd1 tensor")->required()->check(CLI::ExistingFile);
  rtc->add_option("--sr", ro.sr, "Sampling rate in (0, 1]")->capture_default_str();
  rtc->add_option("--sigma", ro.sigma, "Salt-and-pepper fraction of the observed entries")->capture_default_str();
  rtc->add_option("--ranks", ro.ranks, "'auto' or comma-separated ranks")->capture_default_str();
  rtc->add_option("--lambda", ro.lambda, "TV weight")->capture_default_str();
  rtc->add_option("--gamma", ro.gamma, "Sparse weight or 'auto'")->capture_default_str();
  rtc->add_option("--eta", ro.eta, "Proximal weight")->capture_default_str();
  rtc->add_option("--iters", ro.iters, "Outer iterations")->capture_default_str();
  rtc->add_option("--inner", ro.inner, "Adam steps per outer iteration")->capture_default_str();
  rtc->add_option("--tol", ro.tol, "Relative objective change that stops the run")->capture_default_str();
  rtc->add_option("--lr", ro.lr, "Adam learning rate")->capture_default_str();
  rtc->add_option("--hidden", ro.hidden, "Hidden width of the factor networks")->capture_default_str();
  rtc->add_option("--depth", ro.depth, "Layers per factor network")->capture_default_str();
  rtc->add_option("--omega0", ro.omega0, "Sine frequency")->capture_default_str();
  rtc->add_option("--seed", ro.seed, "Seed for corruption and initialization")->capture_default_str();
  rtc->add_option("--out", ro.out, "Recovered data (.ppm/.pgm or .mtd1)");
  rtc->add_option("--metrics", ro.metrics, "Metrics JSON");
  rtc->add_option("--history", ro.history, "Per-iteration JSONL");
  rtc->add_option("--save-model", ro.model_dir, "Directory for the trained networks");

  PcuOptions po;
  auto* pcu = app.add_subcommand("pcu", "Upsample a sparse point cloud through a learned SDF");
  pcu->add_option("--input", po.input, "Sparse XYZ/XY text")->required()->check(CLI::ExistingFile);
  pcu->add_option("--ranks", po.ranks, "'auto' or three comma-separated ranks")->capture_default_str();
  pcu->add_option("--tau", po.tau, "Keep candidates with |s| < tau")->capture_default_str();
  pcu->add_option("--candidates", po.candidates, "Uniform candidates in the box")->capture_default_str();
  pcu->add_option("--steps", po.steps, "Training steps")->capture_default_str();
  pcu->add_option("--lr", po.lr, "Adam learning rate")->capture_default_str();
  pcu->add_option("--seed", po.seed, "Seed")->capture_default_str();
  pcu->add_option("--out", po.out, "Dense XYZ output");
  pcu->add_option("--metrics", po.metrics, "Metrics JSON");
  pcu->add_option("--truth", po.truth, "Dense reference cloud for CD and F-score")->check(CLI::ExistingFile);
  pcu->add_option("--f-distance", po.f_distance, "F-score threshold")->capture_default_str();
  pcu->add_option("--save-model", po.model_dir, "Directory for the trained networks");

  CLI11_PARSE(app, argc, argv);
  try {
    if (rtc->parsed()) return run_rtc(ro);
    return run_pcu(po);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "mtensor: " << e.what() << '\n';
    return 1;
  }
}
