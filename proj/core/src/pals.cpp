#include "mtensor/pals.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include <json.hpp>

#include "mtensor/log.hpp"

namespace mtensor {
namespace {

void check_problem(const PalsProblem& p, const PalsConfig& cfg) {
  if (p.mask.size() != p.observed.numel()) throw std::invalid_argument("pals: mask size does not match observations");
  if (p.coords.size() != p.observed.order()) throw std::invalid_argument("pals: coordinate lists do not match order");
  for (Index n = 0; n < p.coords.size(); ++n) {
    if (p.coords[n].size() != p.observed.extent(n)) throw std::invalid_argument("pals: grid does not match data shape");
  }
  if (!(cfg.lambda >= 0.0) || !(cfg.gamma >= 0.0)) throw std::invalid_argument("pals: lambda and gamma must be >= 0");
  if (!(cfg.eta > 0.0)) throw std::invalid_argument("pals: eta must be positive");
  if (cfg.inner_steps == 0) throw std::invalid_argument("pals: inner_steps must be at least 1");
}

double squared_distance(const DenseTensor& a, const DenseTensor& b) {
  double s = 0.0;
  for (Index i = 0; i < a.numel(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Subproblem objective and, optionally, its gradient with respect to A.
double theta_objective(const PalsProblem& p, const PalsConfig& cfg, const DenseTensor& a, const DenseTensor& e,
                       const DenseTensor& a_prev, DenseTensor* grad) {
  double fid = 0.0;
  if (grad) *grad = DenseTensor(a.shape());
  for (Index i = 0; i < a.numel(); ++i) {
    const double prox = a[i] - a_prev[i];
    double g = cfg.eta * prox;
    if (p.mask[i]) {
      const double r = a[i] + e[i] - p.observed[i];
      fid += r * r;
      g += 2.0 * r;
    }
    if (grad) (*grad)[i] = g;
  }
  double reg = 0.0;
  if (p.regularizer && cfg.lambda > 0.0) {
    DenseTensor rg;
    reg = p.regularizer(a, grad ? &rg : nullptr);
    if (grad) *grad += cfg.lambda * rg;
  }
  return fid + cfg.lambda * reg + 0.5 * cfg.eta * squared_distance(a, a_prev);
}

struct Snapshot {
  std::vector<Matrix> weights;
  DenseTensor a;
  double objective = std::numeric_limits<double>::infinity();
};

std::vector<Matrix> copy_weights(ImtdModel& m) {
  std::vector<Matrix> out;
  for (Matrix* h : m.parameters()) out.push_back(*h);
  return out;
}

void restore_weights(ImtdModel& m, const std::vector<Matrix>& w) {
  auto params = m.parameters();
  for (Index i = 0; i < params.size(); ++i) *params[i] = w[i];
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::runtime_error(std::string("pals: non-finite ") + what);
}

}  // namespace

GParts objective_g(const PalsProblem& p, const PalsConfig& cfg, const DenseTensor& a, const DenseTensor& e) {
  GParts g;
  for (Index i = 0; i < a.numel(); ++i) {
    if (!p.mask[i]) continue;
    const double r = a[i] + e[i] - p.observed[i];
    g.fidelity += r * r;
  }
  if (p.regularizer && cfg.lambda > 0.0) g.regularizer = cfg.lambda * p.regularizer(a, nullptr);
  const double l1 = l1_norm(e);
  // gamma may be +inf to freeze E at zero; 0 * inf must not poison G.
  g.sparsity = l1 == 0.0 ? 0.0 : cfg.gamma * l1;
  g.total = g.fidelity + g.regularizer + g.sparsity;
  return g;
}

ThetaStepResult theta_step(PalsState& state, const PalsProblem& p, const PalsConfig& cfg) {
  ImtdModel& model = state.model;
  ThetaStepResult out;

  Snapshot best;
  best.weights = copy_weights(model);
  best.a = state.a_prev;
  out.before = theta_objective(p, cfg, state.a_prev, state.e, state.a_prev, nullptr);
  require_finite(out.before, "subproblem objective");
  best.objective = out.before;
  const auto initial_weights = best.weights;

  DenseTensor grad;
  for (Index s = 0; s <= cfg.inner_steps; ++s) {
    const GridForward fwd = forward_grid(model, p.coords);
    const bool last = s == cfg.inner_steps;
    const double obj = theta_objective(p, cfg, fwd.value, state.e, state.a_prev, last ? nullptr : &grad);
    require_finite(obj, "subproblem objective");
    if (obj < best.objective) {
      best.objective = obj;
      best.weights = copy_weights(model);
      best.a = fwd.value;
    }
    if (last) break;
    const auto grads = flatten(backward_grid(model, fwd, grad));
    auto params = model.parameters();
    state.adam.step(params, grads);
  }

  out.accepted = best.objective < out.before;
  restore_weights(model, out.accepted ? best.weights : initial_weights);
  out.after = out.accepted ? best.objective : out.before;
  out.a = out.accepted ? std::move(best.a) : state.a_prev;
  return out;
}

double e_step_scalar(double a, double e_prev, double m, bool observed, double gamma, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("e_step: eta must be positive");
  if (!(gamma >= 0.0)) throw std::invalid_argument("e_step: gamma must be nonnegative");
  if (observed) return soft_threshold((2.0 * (m - a) + eta * e_prev) / (2.0 + eta), gamma / (2.0 + eta));
  return soft_threshold(e_prev, gamma / eta);
}

DenseTensor e_step(const DenseTensor& a, const DenseTensor& e_prev, const DenseTensor& m, const MaskBits& mask,
                   double gamma, double eta) {
  require_same_shape(a, e_prev, "e_step");
  require_same_shape(a, m, "e_step");
  if (mask.size() != a.numel()) throw std::invalid_argument("e_step: mask size mismatch");
  DenseTensor e(a.shape());
  for (Index i = 0; i < a.numel(); ++i) e[i] = e_step_scalar(a[i], e_prev[i], m[i], mask[i] != 0, gamma, eta);
  return e;
}

PalsResult pals_run(const PalsProblem& p, ImtdModel model, const PalsConfig& cfg, const PalsObserver& observer) {
  check_problem(p, cfg);
  PalsState state{std::move(model), DenseTensor(p.observed.shape()), DenseTensor(), {}, Adam(cfg.adam)};
  PalsResult result;

  try {
    state.a_prev = eval_grid(state.model, p.coords);
    const GParts g0 = objective_g(p, cfg, state.a_prev, state.e);
    require_finite(g0.total, "objective");
    PalsRecord r0;
    r0.g = r0.v = g0.total;
    r0.fidelity = g0.fidelity;
    r0.regularizer = g0.regularizer;
    r0.sparsity = g0.sparsity;
    r0.theta_before = r0.theta_after = g0.total;
    state.history.push_back(r0);
    if (observer) observer(r0);

    const double slack = 1e-8 * std::abs(g0.total);
    for (Index k = 1; k <= cfg.outer_iters; ++k) {
      ThetaStepResult th = theta_step(state, p, cfg);
      DenseTensor e_next = e_step(th.a, state.e, p.observed, p.mask, cfg.gamma, cfg.eta);

      PalsRecord rec;
      rec.iteration = k;
      rec.a_step = squared_distance(th.a, state.a_prev);
      rec.e_step = squared_distance(e_next, state.e);
      const GParts g = objective_g(p, cfg, th.a, e_next);
      require_finite(g.total, "objective");
      rec.g = g.total;
      rec.fidelity = g.fidelity;
      rec.regularizer = g.regularizer;
      rec.sparsity = g.sparsity;
      rec.v = g.total + 0.5 * cfg.eta * (rec.a_step + rec.e_step);
      rec.theta_before = th.before;
      rec.theta_after = th.after;
      rec.accepted = th.accepted;

      const PalsRecord& prev = state.history.back();
      if (rec.v > prev.v + slack) {
        warn("pals: Lyapunov value increased at iteration " + std::to_string(k) + " (" + std::to_string(prev.v) +
             " -> " + std::to_string(rec.v) + ")");
      }
      state.history.push_back(rec);
      if (observer) observer(rec);

      state.a_prev = std::move(th.a);
      state.e = std::move(e_next);

      const double change = std::abs(prev.g - rec.g) / std::max(std::abs(prev.g), 1e-300);
      if (change < cfg.tol) {
        result.converged = true;
        break;
      }
    }
  } catch (const PalsDivergence&) {
    throw;
  } catch (const std::runtime_error& err) {
    throw PalsDivergence(err.what(), state.history);
  }

  result.model = std::move(state.model);
  result.a = std::move(state.a_prev);
  result.e = std::move(state.e);
  result.history = std::move(state.history);
  return result;
}

void write_history_jsonl(std::ostream& os, const std::vector<PalsRecord>& history) {
  for (const auto& r : history) {
    nlohmann::json j = {
        {"iteration", r.iteration}, {"G", r.g},
        {"V", r.v},                 {"a_k", r.a_step},
        {"e_k", r.e_step},          {"fidelity", r.fidelity},
        {"tv", r.regularizer},      {"sparsity", r.sparsity},
        {"accepted", r.accepted},
    };
    os << j.dump() << '\n';
  }
}

}  // namespace mtensor
