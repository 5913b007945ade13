#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <Eigen/Dense>

#include "uavland/types.hpp"

namespace uavland::nn {

// Columns are samples, rows are features.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Head { Linear, Tanh };

inline const char* head_name(Head h) { return h == Head::Tanh ? "tanh" : "linear"; }

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Activations recorded by a forward pass, consumed by backward().
struct Tape {
  std::vector<Matrix> activations;  // [0] is the input, back() is the output

  const Matrix& output() const { return activations.back(); }
  bool empty() const { return activations.empty(); }
};

// Fully connected network: ReLU hidden layers and a linear or tanh head.
class Mlp {
 public:
  struct Layer {
    Matrix weight;  // (out x in)
    Vector bias;
    Matrix grad_weight;
    Vector grad_bias;
    Matrix m_weight, v_weight;
    Vector m_bias, v_bias;
  };

  Mlp() = default;

  // All parameters zero.
  Mlp(std::vector<std::size_t> sizes, Head head) : sizes_(std::move(sizes)), head_(head) {
    if (sizes_.size() < 2) throw std::invalid_argument("Mlp needs at least two layer sizes");
    for (std::size_t s : sizes_) {
      if (s == 0) throw std::invalid_argument("Mlp layer size must be positive");
    }
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const auto in = static_cast<Eigen::Index>(sizes_[l]);
      const auto out = static_cast<Eigen::Index>(sizes_[l + 1]);
      Layer layer;
      layer.weight = Matrix::Zero(out, in);
      layer.bias = Vector::Zero(out);
      layer.grad_weight = Matrix::Zero(out, in);
      layer.grad_bias = Vector::Zero(out);
      layer.m_weight = Matrix::Zero(out, in);
      layer.v_weight = Matrix::Zero(out, in);
      layer.m_bias = Vector::Zero(out);
      layer.v_bias = Vector::Zero(out);
      layers_.push_back(std::move(layer));
    }
  }

  // Uniform fan-in initialization in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; the
  // last layer is further multiplied by `final_scale`.
  static Mlp random(std::vector<std::size_t> sizes, Head head, Rng& rng,
                    double final_scale = 1.0) {
    Mlp net(std::move(sizes), head);
    for (std::size_t l = 0; l < net.layers_.size(); ++l) {
      Layer& layer = net.layers_[l];
      const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
      const double scale = (l + 1 == net.layers_.size()) ? final_scale : 1.0;
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
          layer.weight(r, c) = dist(rng) * scale;
        }
      }
      for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = dist(rng) * scale;
    }
    return net;
  }

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  Head head() const { return head_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  long adam_steps() const { return adam_t_; }

  bool same_topology(const Mlp& other) const {
    return sizes_ == other.sizes_ && head_ == other.head_;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  Matrix forward(const Matrix& input) const { return record(input).output(); }

  Vector forward(const Vector& input) const {
    Matrix in = input;
    return record(in).output().col(0);
  }

  Tape record(const Matrix& input) const {
    if (layers_.empty()) throw std::logic_error("Mlp is empty");
    if (static_cast<std::size_t>(input.rows()) != input_size()) {
      throw std::invalid_argument("Mlp::forward: expected " + std::to_string(input_size()) +
                                  " input rows, got " + std::to_string(input.rows()));
    }
    Tape tape;
    tape.activations.reserve(layers_.size() + 1);
    tape.activations.push_back(input);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Matrix z = layers_[l].weight * tape.activations.back();
      z.colwise() += layers_[l].bias;
      if (l + 1 < layers_.size()) {
        z = z.cwiseMax(0.0);
      } else if (head_ == Head::Tanh) {
        z = z.array().tanh().matrix();
      }
      tape.activations.push_back(std::move(z));
    }
    return tape;
  }

  // Accumulates parameter gradients of sum_j upstream(:,j) . output(:,j) and
  // returns the gradient with respect to the input.
  Matrix backward(const Tape& tape, const Matrix& upstream) {
    return propagate(tape, upstream, &layers_);
  }

  // Input gradient only; parameter gradients are left untouched.
  Matrix input_gradient(const Tape& tape, const Matrix& upstream) const {
    return propagate(tape, upstream, nullptr);
  }

  void zero_grad() {
    for (auto& l : layers_) {
      l.grad_weight.setZero();
      l.grad_bias.setZero();
    }
  }

  void adam_step(const AdamConfig& cfg) {
    ++adam_t_;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam_t_));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam_t_));
    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
      param.array() -= cfg.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
    };
    for (auto& l : layers_) {
      update(l.weight, l.grad_weight, l.m_weight, l.v_weight);
      update(l.bias, l.grad_bias, l.m_bias, l.v_bias);
    }
    zero_grad();
  }

  // Visits (parameter, gradient) pairs in a fixed order.
  template <typename F>
  void for_each_parameter(F&& f) {
    for (auto& l : layers_) {
      for (Eigen::Index i = 0; i < l.weight.size(); ++i) f(l.weight.data()[i], l.grad_weight.data()[i]);
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) f(l.bias.data()[i], l.grad_bias.data()[i]);
    }
  }

  std::vector<double> parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& l : layers_) {
      out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
      out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
    }
    return out;
  }

  std::vector<double> gradients() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& l : layers_) {
      out.insert(out.end(), l.grad_weight.data(), l.grad_weight.data() + l.grad_weight.size());
      out.insert(out.end(), l.grad_bias.data(), l.grad_bias.data() + l.grad_bias.size());
    }
    return out;
  }

  void set_parameters(const std::vector<double>& values) {
    if (values.size() != parameter_count()) {
      throw std::invalid_argument("set_parameters: size mismatch");
    }
    std::size_t k = 0;
    for_each_parameter([&](double& p, double&) { p = values[k++]; });
  }

  // Copies parameters only; optimizer state and gradients stay.
  void copy_parameters_from(const Mlp& source) {
    if (!same_topology(source)) throw std::invalid_argument("copy_parameters_from: topology mismatch");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      layers_[l].weight = source.layers_[l].weight;
      layers_[l].bias = source.layers_[l].bias;
    }
  }

 private:
  Matrix propagate(const Tape& tape, const Matrix& upstream, std::vector<Layer>* grads) const {
    if (tape.empty()) throw std::logic_error("Mlp::backward called without a recorded forward pass");
    if (tape.activations.size() != layers_.size() + 1 ||
        static_cast<std::size_t>(tape.activations.front().rows()) != input_size() ||
        static_cast<std::size_t>(tape.output().rows()) != output_size()) {
      throw std::invalid_argument("Mlp::backward: tape does not belong to this network");
    }
    if (upstream.rows() != tape.output().rows() || upstream.cols() != tape.output().cols()) {
      throw std::invalid_argument("Mlp::backward: upstream gradient shape mismatch");
    }
    Matrix delta = upstream;
    if (head_ == Head::Tanh) {
      delta.array() *= 1.0 - tape.output().array().square();
    }
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const Matrix& in = tape.activations[l];
      if (grads) {
        (*grads)[l].grad_weight.noalias() += delta * in.transpose();
        (*grads)[l].grad_bias += delta.rowwise().sum();
      }
      Matrix prev = layers_[l].weight.transpose() * delta;
      if (l > 0) prev.array() *= (in.array() > 0.0).cast<double>();
      delta = std::move(prev);
    }
    return delta;
  }

  std::vector<std::size_t> sizes_;
  Head head_ = Head::Linear;
  std::vector<Layer> layers_;
  long adam_t_ = 0;
};

// target <- tau * source + (1 - tau) * target
inline void soft_update(Mlp& target, const Mlp& source, double tau) {
  if (!target.same_topology(source)) throw std::invalid_argument("soft_update: topology mismatch");
  auto& dst = target.layers();
  const auto& src = source.layers();
  for (std::size_t l = 0; l < dst.size(); ++l) {
    dst[l].weight = tau * src[l].weight + (1.0 - tau) * dst[l].weight;
    dst[l].bias = tau * src[l].bias + (1.0 - tau) * dst[l].bias;
  }
}

namespace detail {

inline void write_double(std::ostream& os, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  os.write(buf, res.ptr - buf);
}

inline double read_double(std::istream& is) {
  std::string tok;
  if (!(is >> tok)) throw std::runtime_error("mlp load: truncated parameter data");
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
    throw std::runtime_error("mlp load: bad number '" + tok + "'");
  }
  return v;
}

}  // namespace detail

// Text format:
//   uavland-mlp 1
//   head <linear|tanh>
//   layers <n> <size_0> ... <size_{n-1}>
// followed by each layer's weights (row-major) then biases, shortest
// round-trip decimal.
inline void save(std::ostream& os, const Mlp& net) {
  os << "uavland-mlp 1\nhead " << head_name(net.head()) << "\nlayers " << net.sizes().size();
  for (std::size_t s : net.sizes()) os << ' ' << s;
  os << '\n';
  for (const auto& l : net.layers()) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        if (c) os << ' ';
        detail::write_double(os, l.weight(r, c));
      }
      os << '\n';
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
      if (r) os << ' ';
      detail::write_double(os, l.bias(r));
    }
    os << '\n';
  }
}

inline Mlp load(std::istream& is) {
  std::string magic, key, head;
  int version = 0;
  if (!(is >> magic >> version) || magic != "uavland-mlp" || version != 1) {
    throw std::runtime_error("mlp load: bad header");
  }
  if (!(is >> key >> head) || key != "head" || (head != "linear" && head != "tanh")) {
    throw std::runtime_error("mlp load: bad head line");
  }
  std::size_t count = 0;
  if (!(is >> key >> count) || key != "layers" || count < 2 || count > 64) {
    throw std::runtime_error("mlp load: bad layers line");
  }
  std::vector<std::size_t> sizes(count);
  for (auto& s : sizes) {
    if (!(is >> s) || s == 0) throw std::runtime_error("mlp load: bad layer size");
  }
  Mlp net(sizes, head == "tanh" ? Head::Tanh : Head::Linear);
  for (auto& l : net.layers()) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = detail::read_double(is);
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = detail::read_double(is);
  }
  return net;
}

inline std::string to_text(const Mlp& net) {
  std::ostringstream os;
  save(os, net);
  return os.str();
}

inline Mlp from_text(const std::string& text) {
  std::istringstream is(text);
  return load(is);
}

}  // namespace uavland::nn
