#pragma once

// Proximal alternating least squares for two-block models
//
//   G(theta, E) = ||P_mask(A_theta + E - M)||_F^2 + lambda phi(A_theta) + gamma ||E||_1
//
// where A_theta is an IMTD grid evaluation and phi is a smooth regularizer.
// The theta block is solved inexactly by Adam with a proximal term on the
// output tensor and a never-ascend acceptance guard; the E block is solved in
// closed form.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "mtensor/adam.hpp"
#include "mtensor/imtd.hpp"
#include "mtensor/tensor.hpp"

namespace mtensor {

using MaskBits = std::vector<std::uint8_t>;

/// Returns phi(a); writes its gradient into *grad when grad is non-null.
using SmoothRegularizer = std::function<double(const DenseTensor& a, DenseTensor* grad)>;

struct PalsConfig {
  double lambda = 1e-3;
  double gamma = 1e-2;
  double eta = 0.1;
  Index inner_steps = 50;
  Index outer_iters = 100;
  double tol = 1e-5;
  std::uint64_t seed = 0;
  AdamConfig adam{};
};

struct PalsProblem {
  DenseTensor observed;
  MaskBits mask;
  GridCoords coords;
  SmoothRegularizer regularizer;  // empty means phi == 0
};

struct PalsRecord {
  Index iteration = 0;
  double g = 0.0;  // G^k
  double v = 0.0;  // V_k = G^k + eta/2 (a_k + e_k)
  double a_step = 0.0;  // a_k = ||A^k - A^{k-1}||_F^2
  double e_step = 0.0;  // e_k = ||E^k - E^{k-1}||_F^2
  double fidelity = 0.0;
  double regularizer = 0.0;
  double sparsity = 0.0;
  double theta_before = 0.0;  // subproblem objective at theta^k
  double theta_after = 0.0;   // subproblem objective at the accepted iterate
  bool accepted = false;
};

struct PalsState {
  ImtdModel model;
  DenseTensor e;
  DenseTensor a_prev;
  std::vector<PalsRecord> history;
  Adam adam;
};

struct GParts {
  double fidelity = 0.0;
  double regularizer = 0.0;
  double sparsity = 0.0;
  double total = 0.0;
};

GParts objective_g(const PalsProblem& p, const PalsConfig& cfg, const DenseTensor& a, const DenseTensor& e);

struct ThetaStepResult {
  double before = 0.0;
  double after = 0.0;
  bool accepted = false;
  DenseTensor a;  // grid evaluation of the model after the step
};

/// One proximal theta update. state.a_prev must hold A_{theta^k}.
ThetaStepResult theta_step(PalsState& state, const PalsProblem& p, const PalsConfig& cfg);

/// Closed-form minimizer of gamma|e| + mask (a + e - m)^2 + eta/2 (e - e_prev)^2.
DenseTensor e_step(const DenseTensor& a, const DenseTensor& e_prev, const DenseTensor& m, const MaskBits& mask,
                   double gamma, double eta);
double e_step_scalar(double a, double e_prev, double m, bool observed, double gamma, double eta);

struct PalsResult {
  ImtdModel model;
  DenseTensor a;
  DenseTensor e;
  std::vector<PalsRecord> history;
  bool converged = false;
};

class PalsDivergence : public std::runtime_error {
public:
  PalsDivergence(const std::string& what, std::vector<PalsRecord> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<PalsRecord>& history() const { return history_; }

private:
  std::vector<PalsRecord> history_;
};

using PalsObserver = std::function<void(const PalsRecord&)>;

/// Runs the alternating scheme from `model` with E^0 = 0. Throws
/// PalsDivergence when any quantity becomes non-finite.
PalsResult pals_run(const PalsProblem& p, ImtdModel model, const PalsConfig& cfg, const PalsObserver& observer = {});

/// One JSON object per line: iteration, G, V, a_k, e_k.
void write_history_jsonl(std::ostream& os, const std::vector<PalsRecord>& history);

}  // namespace mtensor
