#include "matgen/engine/net.hpp"

#include <cmath>
#include <stdexcept>

namespace matgen::engine {

Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::Linear;
  if (s == "tanh") return Activation::Tanh;
  if (s == "softplus") return Activation::Softplus;
  throw std::invalid_argument("unknown activation: " + s);
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::Tanh: return "tanh";
    case Activation::Softplus: return "softplus";
  }
  throw std::logic_error("bad activation enum");
}

Eigen::MatrixXd apply_activation(Activation a, const Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::Linear: return z;
    case Activation::Tanh: return z.array().tanh();
    case Activation::Softplus:
      return z.unaryExpr([](double x) {
        return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
      });
  }
  throw std::logic_error("bad activation enum");
}

Eigen::MatrixXd activation_derivative(Activation a, const Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::Linear: return Eigen::MatrixXd::Ones(z.rows(), z.cols());
    case Activation::Tanh: {
      Eigen::MatrixXd t = z.array().tanh();
      return 1.0 - t.array().square();
    }
    case Activation::Softplus:
      return z.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  }
  throw std::logic_error("bad activation enum");
}

DenseNet::DenseNet(const std::vector<int>& widths, const std::vector<Activation>& acts) {
  if (widths.size() < 2 || acts.size() != widths.size() - 1)
    throw std::invalid_argument("inconsistent layer specification");
  for (size_t i = 0; i + 1 < widths.size(); ++i) {
    Layer l;
    l.W = Eigen::MatrixXd::Zero(widths[i + 1], widths[i]);
    l.b = Eigen::VectorXd::Zero(widths[i + 1]);
    l.act = acts[i];
    layers_.push_back(std::move(l));
  }
}

DenseNet DenseNet::random_init(const std::vector<int>& widths,
                               const std::vector<Activation>& acts, std::mt19937_64& rng,
                               double scale) {
  DenseNet net(widths, acts);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& l : net.layers_) {
    const double s = scale * std::sqrt(2.0 / (l.W.rows() + l.W.cols()));
    for (Eigen::Index j = 0; j < l.W.size(); ++j) l.W.data()[j] = s * gauss(rng);
    l.b.setZero();
  }
  return net;
}

int DenseNet::input_width() const { return static_cast<int>(layers_.front().W.cols()); }
int DenseNet::output_width() const { return static_cast<int>(layers_.back().W.rows()); }

Eigen::VectorXd DenseNet::forward(const Eigen::VectorXd& x) const {
  return forward_batch(x).col(0);
}

Eigen::MatrixXd DenseNet::forward_batch(const Eigen::MatrixXd& X, Trace* trace) const {
  if (X.rows() != input_width()) throw std::invalid_argument("input width mismatch");
  if (trace) {
    trace->input = X;
    trace->pre.clear();
    trace->post.clear();
  }
  Eigen::MatrixXd h = X;
  for (size_t li = 0; li < layers_.size(); ++li) {
    const Layer& l = layers_[li];
    Eigen::MatrixXd z = (l.W * h).colwise() + l.b;
    h = apply_activation(l.act, z);
    if (!h.allFinite())
      throw std::runtime_error("non-finite activation in dense layer " + std::to_string(li));
    if (trace) {
      trace->pre.push_back(std::move(z));
      trace->post.push_back(h);
    }
  }
  return h;
}

Eigen::MatrixXd DenseNet::backward_batch(const Trace& trace, const Eigen::MatrixXd& dY,
                                         Eigen::VectorXd& param_grad) const {
  if (param_grad.size() != param_count()) throw std::invalid_argument("gradient buffer size");
  Eigen::MatrixXd delta = dY;
  // offsets of each layer block in the flat parameter vector
  std::vector<int> offset(layers_.size());
  int off = 0;
  for (size_t i = 0; i < layers_.size(); ++i) {
    offset[i] = off;
    off += static_cast<int>(layers_[i].W.size() + layers_[i].b.size());
  }
  for (int li = static_cast<int>(layers_.size()) - 1; li >= 0; --li) {
    const Layer& l = layers_[li];
    delta = delta.cwiseProduct(activation_derivative(l.act, trace.pre[li]));
    const Eigen::MatrixXd& in = li == 0 ? trace.input : trace.post[li - 1];
    Eigen::MatrixXd dW = delta * in.transpose();
    Eigen::VectorXd db = delta.rowwise().sum();
    Eigen::Map<Eigen::MatrixXd>(param_grad.data() + offset[li], l.W.rows(), l.W.cols()) += dW;
    param_grad.segment(offset[li] + l.W.size(), l.b.size()) += db;
    delta = (l.W.transpose() * delta).eval();
  }
  return delta;
}

int DenseNet::param_count() const {
  int n = 0;
  for (const auto& l : layers_) n += static_cast<int>(l.W.size() + l.b.size());
  return n;
}

int DenseNet::last_layer_param_count() const {
  const Layer& l = layers_.back();
  return static_cast<int>(l.W.size() + l.b.size());
}

Eigen::VectorXd DenseNet::params_flat() const {
  Eigen::VectorXd p(param_count());
  int off = 0;
  for (const auto& l : layers_) {
    p.segment(off, l.W.size()) = Eigen::Map<const Eigen::VectorXd>(l.W.data(), l.W.size());
    off += static_cast<int>(l.W.size());
    p.segment(off, l.b.size()) = l.b;
    off += static_cast<int>(l.b.size());
  }
  return p;
}

void DenseNet::set_params_flat(const Eigen::VectorXd& p) {
  if (p.size() != param_count()) throw std::invalid_argument("flat parameter size mismatch");
  int off = 0;
  for (auto& l : layers_) {
    l.W = Eigen::Map<const Eigen::MatrixXd>(p.data() + off, l.W.rows(), l.W.cols());
    off += static_cast<int>(l.W.size());
    l.b = p.segment(off, l.b.size());
    off += static_cast<int>(l.b.size());
  }
}

}  // namespace matgen::engine
