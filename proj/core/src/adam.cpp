#include "mtensor/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace mtensor {

void Adam::reset() {
  m_.clear();
  v_.clear();
  t_ = 0;
}

void Adam::step(std::span<Matrix* const> params, std::span<const Matrix> grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads[i].rows() || params[i]->cols() != grads[i].cols()) {
      throw std::invalid_argument("adam: gradient shape mismatch");
    }
    if (!grads[i].allFinite()) throw std::runtime_error("adam: non-finite gradient");
  }
  if (m_.empty()) {
    for (const auto& g : grads) {
      m_.push_back(Matrix::Zero(g.rows(), g.cols()));
      v_.push_back(Matrix::Zero(g.rows(), g.cols()));
    }
  } else if (m_.size() != grads.size()) {
    throw std::invalid_argument("adam: parameter list changed between steps");
  }

  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (m_[i].rows() != grads[i].rows() || m_[i].cols() != grads[i].cols()) {
      throw std::invalid_argument("adam: accumulator shape mismatch");
    }
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i].cwiseAbs2();
    const auto m_hat = m_[i].array() / c1;
    const auto v_hat = v_[i].array() / c2;
    params[i]->array() -= config_.lr * m_hat / (v_hat.sqrt() + config_.eps);
  }
}

}  // namespace mtensor
