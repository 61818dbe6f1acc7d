#ifndef MATGEN_ENGINE_NET_HPP
#define MATGEN_ENGINE_NET_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace matgen::engine {

enum class Activation { Linear, Tanh, Softplus };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

struct Layer {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
  Activation act = Activation::Linear;
};

// Small fully connected network with hand-written batched backprop.
class DenseNet {
 public:
  DenseNet() = default;

  // widths = {in, h1, ..., out}; acts.size() == widths.size()-1
  DenseNet(const std::vector<int>& widths, const std::vector<Activation>& acts);

  static DenseNet random_init(const std::vector<int>& widths,
                              const std::vector<Activation>& acts, std::mt19937_64& rng,
                              double scale = 1.0);

  int input_width() const;
  int output_width() const;
  int layer_count() const { return static_cast<int>(layers_.size()); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;

  struct Trace {
    Eigen::MatrixXd input;                // network input batch
    std::vector<Eigen::MatrixXd> pre;     // pre-activation per layer
    std::vector<Eigen::MatrixXd> post;    // post-activation per layer
  };

  // Columns of X are samples.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& X, Trace* trace = nullptr) const;

  // Accumulates parameter gradients (flat layout, see params_flat) into
  // `param_grad` and returns the gradient w.r.t. the input batch.
  Eigen::MatrixXd backward_batch(const Trace& trace, const Eigen::MatrixXd& dY,
                                 Eigen::VectorXd& param_grad) const;

  int param_count() const;
  Eigen::VectorXd params_flat() const;
  void set_params_flat(const Eigen::VectorXd& p);

  // Flat layout groups the last layer (W then b) at the tail of the vector.
  int last_layer_param_count() const;

 private:
  std::vector<Layer> layers_;
};

Eigen::MatrixXd apply_activation(Activation a, const Eigen::MatrixXd& z);
Eigen::MatrixXd activation_derivative(Activation a, const Eigen::MatrixXd& z);

}  // namespace matgen::engine

#endif
