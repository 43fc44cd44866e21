#pragma once

// Small feedforward networks with hand-written reverse-mode gradients.
//
// Batches are stored column-wise: an (in_dim x batch) matrix holds one sample
// per column. Parameters are float for training; the double instantiation is
// used where finite-difference checks need the extra precision.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace ikh::net {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Rng = std::mt19937_64;

enum class Activation : std::uint8_t { ReLU = 0, Tanh = 1, Identity = 2 };

template <typename T>
struct Layer {
  Matrix<T> weight;  // out x in
  Vector<T> bias;    // out
  Activation activation = Activation::Identity;

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.rows()); }
};

/// Per-layer activations kept by a forward pass so that backward() can run.
template <typename T>
struct ForwardCache {
  std::vector<Matrix<T>> inputs;   // inputs[k] feeds layer k
  std::vector<Matrix<T>> outputs;  // post-activation of layer k
};

/// Gradient tape: one entry per parameter tensor plus the input gradient.
template <typename T>
struct Gradients {
  std::vector<Matrix<T>> weight;
  std::vector<Vector<T>> bias;
  Matrix<T> input;

  void zero();
  Gradients& operator+=(const Gradients& other);
};

template <typename T>
class BasicMlp {
 public:
  BasicMlp() = default;
  explicit BasicMlp(std::vector<Layer<T>> layers);

  /// Xavier-uniform weights, zero biases. dims = {in, hidden..., out}.
  static BasicMlp xavier(std::span<const std::size_t> dims, Activation hidden,
                         Activation output, Rng& rng);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;
  bool empty() const { return layers_.empty(); }

  const std::vector<Layer<T>>& layers() const { return layers_; }
  std::vector<Layer<T>>& layers() { return layers_; }

  Vector<T> forward(const Vector<T>& input) const;
  Matrix<T> forward(const Matrix<T>& batch, ForwardCache<T>* cache = nullptr) const;

  /// Gradients of sum(output .* upstream) for the batch recorded in cache.
  /// With param_grads=false only the input gradient is produced.
  Gradients<T> backward(const ForwardCache<T>& cache, const Matrix<T>& upstream,
                        bool param_grads = true) const;

  Gradients<T> zero_gradients() const;

  bool same_shape(const BasicMlp& other) const;

  template <typename U>
  BasicMlp<U> cast() const {
    std::vector<Layer<U>> out;
    out.reserve(layers_.size());
    for (const auto& l : layers_) {
      out.push_back({l.weight.template cast<U>(), l.bias.template cast<U>(), l.activation});
    }
    return BasicMlp<U>(std::move(out));
  }

  friend bool operator==(const BasicMlp& a, const BasicMlp& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t k = 0; k < a.layers_.size(); ++k) {
      if (a.layers_[k].activation != b.layers_[k].activation) return false;
      if (a.layers_[k].weight != b.layers_[k].weight) return false;
      if (a.layers_[k].bias != b.layers_[k].bias) return false;
    }
    return true;
  }

 private:
  std::vector<Layer<T>> layers_;
};

using Mlp = BasicMlp<float>;
using GradientTape = Gradients<float>;

/// Single-sample convenience wrapper around forward + backward.
template <typename T>
Gradients<T> backward(const BasicMlp<T>& net, const Vector<T>& input, const Vector<T>& upstream);

template <typename T>
struct AdamState {
  std::vector<Matrix<T>> m_weight, v_weight;
  std::vector<Vector<T>> m_bias, v_bias;
  std::uint64_t step = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  AdamState(const BasicMlp<T>& net, double learning_rate);
};

template <typename T>
void adam_step(BasicMlp<T>& net, const Gradients<T>& grads, AdamState<T>& opt);

/// target <- tau * online + (1 - tau) * target, elementwise.
template <typename T>
void soft_update(BasicMlp<T>& target, const BasicMlp<T>& online, double tau);

/// FNV-1a over the raw parameter bytes; used to prove a net was not mutated.
std::uint64_t parameter_hash(const Mlp& net);

/// Keeps large training temporaries on the heap instead of mapping and
/// unmapping them on every allocation. Call once at program start.
void keep_heap_resident();

}  // namespace ikh::net
