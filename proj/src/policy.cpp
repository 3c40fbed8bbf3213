#include "sas/policy.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

namespace sas {

namespace {

void check_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw ContractViolation(std::string(what) + ": non-finite parameters");
}

}  // namespace

MaskedSoftmaxPolicy::MaskedSoftmaxPolicy(FeatureMap features, std::size_t num_actions)
    : features_(std::move(features)),
      theta_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(features_.dim()),
                                   static_cast<Eigen::Index>(num_actions))) {
  if (num_actions == 0) throw ContractViolation("MaskedSoftmaxPolicy: no actions");
}

MaskedSoftmaxPolicy::MaskedSoftmaxPolicy(FeatureMap features, Eigen::MatrixXd theta)
    : features_(std::move(features)), theta_(std::move(theta)) {
  if (static_cast<std::size_t>(theta_.rows()) != features_.dim() || theta_.cols() == 0)
    throw ContractViolation("MaskedSoftmaxPolicy: theta shape does not match features");
  check_finite(theta_, "MaskedSoftmaxPolicy");
}

void MaskedSoftmaxPolicy::set_theta(Eigen::MatrixXd theta) {
  if (theta.rows() != theta_.rows() || theta.cols() != theta_.cols())
    throw ContractViolation("set_theta: shape mismatch");
  check_finite(theta, "set_theta");
  theta_ = std::move(theta);
}

Eigen::VectorXd MaskedSoftmaxPolicy::flat_theta() const {
  return Eigen::Map<const Eigen::VectorXd>(theta_.data(), theta_.size());
}

void MaskedSoftmaxPolicy::set_flat_theta(const Eigen::VectorXd& flat) {
  if (flat.size() != theta_.size()) throw ContractViolation("set_flat_theta: size mismatch");
  Eigen::Map<Eigen::VectorXd>(theta_.data(), theta_.size()) = flat;
  check_finite(theta_, "set_flat_theta");
}

void MaskedSoftmaxPolicy::add_flat(const Eigen::VectorXd& step) {
  if (step.size() != theta_.size()) throw ContractViolation("add_flat: size mismatch");
  Eigen::Map<Eigen::VectorXd>(theta_.data(), theta_.size()) += step;
}

Eigen::VectorXd MaskedSoftmaxPolicy::scores(const Eigen::VectorXd& phi) const {
  if (phi.size() != theta_.rows()) throw ContractViolation("scores: feature size mismatch");
  return theta_.transpose() * phi;
}

Eigen::VectorXd MaskedSoftmaxPolicy::action_probabilities(const Eigen::VectorXd& phi,
                                                          const ActionSet& available) const {
  if (available.size() != num_actions())
    throw ContractViolation("action_probabilities: action set size mismatch");
  if (available.count() == 0) throw ContractViolation("action_probabilities: empty action set");
  const Eigen::VectorXd y = scores(phi);
  const auto& mask = available.mask();
  double top = -std::numeric_limits<double>::infinity();
  for (Eigen::Index b = 0; b < y.size(); ++b) {
    if (!std::isfinite(y(b))) throw ContractViolation("action_probabilities: non-finite score");
    if (mask[static_cast<std::size_t>(b)]) top = std::max(top, y(b));
  }
  Eigen::VectorXd probs = Eigen::VectorXd::Zero(y.size());
  double total = 0.0;
  for (Eigen::Index b = 0; b < y.size(); ++b) {
    if (!mask[static_cast<std::size_t>(b)]) continue;
    probs(b) = std::exp(y(b) - top);
    total += probs(b);
  }
  return probs / total;
}

std::size_t MaskedSoftmaxPolicy::sample_action(const Eigen::VectorXd& phi,
                                               const ActionSet& available, Rng& rng) const {
  const Eigen::VectorXd probs = action_probabilities(phi, available);
  const double u = rng.uniform();
  double cumulative = 0.0;
  std::size_t last = 0;
  for (Eigen::Index b = 0; b < probs.size(); ++b) {
    if (!available.contains(static_cast<std::size_t>(b))) continue;
    last = static_cast<std::size_t>(b);
    cumulative += probs(b);
    if (u < cumulative) return last;
  }
  // u landed in the rounding gap above the cumulative sum.
  return last;
}

Eigen::VectorXd MaskedSoftmaxPolicy::log_prob_grad(const Eigen::VectorXd& phi,
                                                   const ActionSet& available,
                                                   std::size_t action) const {
  return log_prob_grad_from(phi, action_probabilities(phi, available), available, action);
}

Eigen::VectorXd MaskedSoftmaxPolicy::log_prob_grad_from(const Eigen::VectorXd& phi,
                                                        const Eigen::VectorXd& probs,
                                                        const ActionSet& available,
                                                        std::size_t action) const {
  if (!available.contains(action))
    throw ContractViolation("log_prob_grad: action is not available");
  const Eigen::Index d = theta_.rows();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta_.size());
  for (Eigen::Index b = 0; b < theta_.cols(); ++b) {
    if (!available.contains(static_cast<std::size_t>(b))) continue;
    const double coeff = (static_cast<std::size_t>(b) == action ? 1.0 : 0.0) - probs(b);
    grad.segment(b * d, d) = coeff * phi;
  }
  return grad;
}

// Checkpoint format (text, one token per value, hex floats for exact
// round trips):
//   sas-checkpoint 1
//   <d> <num_actions> <feature-kind>
//   theta <d*num_actions values, column-major>
//   [value <d values>]
//   [q <d*num_actions values>]
//   end
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const auto& theta = ckpt.theta;
  out << "sas-checkpoint 1\n"
      << theta.rows() << ' ' << theta.cols() << ' ' << to_string(ckpt.kind) << '\n';
  auto dump = [&out](const char* tag, const double* data, Eigen::Index n) {
    out << tag;
    for (Eigen::Index i = 0; i < n; ++i) out << ' ' << fmt::format("{:a}", data[i]);
    out << '\n';
  };
  dump("theta", theta.data(), theta.size());
  if (ckpt.value_weights) {
    if (ckpt.value_weights->size() != theta.rows())
      throw ContractViolation("write_checkpoint: value weights size mismatch");
    dump("value", ckpt.value_weights->data(), ckpt.value_weights->size());
  }
  if (ckpt.q_weights) {
    if (ckpt.q_weights->rows() != theta.rows() || ckpt.q_weights->cols() != theta.cols())
      throw ContractViolation("write_checkpoint: q weights shape mismatch");
    dump("q", ckpt.q_weights->data(), ckpt.q_weights->size());
  }
  out << "end\n";
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "sas-checkpoint" || version != 1)
    throw std::runtime_error("read_checkpoint: bad header");
  Eigen::Index d = 0;
  Eigen::Index num_actions = 0;
  std::string kind;
  if (!(in >> d >> num_actions >> kind) || d <= 0 || num_actions <= 0)
    throw std::runtime_error("read_checkpoint: bad dimensions");
  Checkpoint ckpt;
  ckpt.kind = feature_kind_from_string(kind);
  auto read_values = [&in](double* data, Eigen::Index n) {
    std::string token;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(in >> token)) throw std::runtime_error("read_checkpoint: truncated section");
      data[i] = std::strtod(token.c_str(), nullptr);
    }
  };
  std::string tag;
  while (in >> tag) {
    if (tag == "end") break;
    if (tag == "theta") {
      ckpt.theta.resize(d, num_actions);
      read_values(ckpt.theta.data(), ckpt.theta.size());
    } else if (tag == "value") {
      ckpt.value_weights = Eigen::VectorXd(d);
      read_values(ckpt.value_weights->data(), d);
    } else if (tag == "q") {
      ckpt.q_weights = Eigen::MatrixXd(d, num_actions);
      read_values(ckpt.q_weights->data(), ckpt.q_weights->size());
    } else {
      throw std::runtime_error("read_checkpoint: unknown section '" + tag + "'");
    }
  }
  if (tag != "end") throw std::runtime_error("read_checkpoint: missing end marker");
  if (ckpt.theta.size() == 0) throw std::runtime_error("read_checkpoint: missing theta");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  return read_checkpoint(in);
}

}  // namespace sas
