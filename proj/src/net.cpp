#include "ikh/net.hpp"

#include <malloc.h>

#include <cmath>
#include <cstring>
#include <string>

#include "ikh/error.hpp"

namespace ikh::net {

namespace {

template <typename T>
void apply_activation(Matrix<T>& z, Activation act) {
  switch (act) {
    case Activation::ReLU: z = z.cwiseMax(T(0)); break;
    case Activation::Tanh: z = z.array().tanh().matrix(); break;
    case Activation::Identity: break;
  }
}

// Multiplies grad by the activation derivative, expressed through the output.
template <typename T>
void activation_backward(Matrix<T>& grad, const Matrix<T>& out, Activation act) {
  switch (act) {
    case Activation::ReLU:
      grad = (out.array() > T(0)).select(grad, T(0));
      break;
    case Activation::Tanh:
      grad.array() *= (T(1) - out.array().square());
      break;
    case Activation::Identity: break;
  }
}

void check_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw Error(ErrorCode::DimMismatch, std::string(what) + ": got " + std::to_string(got) +
                                            ", expected " + std::to_string(want));
  }
}

}  // namespace

template <typename T>
void Gradients<T>::zero() {
  for (auto& w : weight) w.setZero();
  for (auto& b : bias) b.setZero();
  input.setZero();
}

template <typename T>
Gradients<T>& Gradients<T>::operator+=(const Gradients& other) {
  if (weight.size() != other.weight.size()) {
    throw Error(ErrorCode::ShapeMismatch, "gradient tapes differ in layer count");
  }
  for (std::size_t k = 0; k < weight.size(); ++k) {
    weight[k] += other.weight[k];
    bias[k] += other.bias[k];
  }
  if (input.size() == other.input.size()) input += other.input;
  return *this;
}

template <typename T>
BasicMlp<T>::BasicMlp(std::vector<Layer<T>> layers) : layers_(std::move(layers)) {
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    if (static_cast<std::size_t>(l.bias.size()) != l.out_dim()) {
      throw Error(ErrorCode::ShapeMismatch, "bias length differs from layer output");
    }
    if (k > 0 && layers_[k - 1].out_dim() != l.in_dim()) {
      throw Error(ErrorCode::ShapeMismatch, "adjacent layer dimensions incompatible");
    }
  }
}

template <typename T>
BasicMlp<T> BasicMlp<T>::xavier(std::span<const std::size_t> dims, Activation hidden,
                                Activation output, Rng& rng) {
  if (dims.size() < 2) throw Error(ErrorCode::ShapeMismatch, "need at least input and output dims");
  std::vector<Layer<T>> layers;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const auto in = dims[k];
    const auto out = dims[k + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Layer<T> layer;
    layer.weight.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    // Row-major fill so the draw order matches the checkpoint layout.
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = T(dist(rng));
    layer.bias = Vector<T>::Zero(static_cast<Eigen::Index>(out));
    layer.activation = (k + 2 == dims.size()) ? output : hidden;
    layers.push_back(std::move(layer));
  }
  return BasicMlp(std::move(layers));
}

template <typename T>
std::size_t BasicMlp<T>::input_dim() const {
  return layers_.empty() ? 0 : layers_.front().in_dim();
}

template <typename T>
std::size_t BasicMlp<T>::output_dim() const {
  return layers_.empty() ? 0 : layers_.back().out_dim();
}

template <typename T>
std::size_t BasicMlp<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

template <typename T>
Vector<T> BasicMlp<T>::forward(const Vector<T>& input) const {
  check_dim(static_cast<std::size_t>(input.size()), input_dim(), "forward input");
  Matrix<T> x = input;
  for (const auto& l : layers_) {
    Matrix<T> z = l.weight * x;
    z.colwise() += l.bias;
    apply_activation(z, l.activation);
    x = std::move(z);
  }
  return x;
}

template <typename T>
Matrix<T> BasicMlp<T>::forward(const Matrix<T>& batch, ForwardCache<T>* cache) const {
  check_dim(static_cast<std::size_t>(batch.rows()), input_dim(), "forward input");
  if (cache) {
    cache->inputs.resize(layers_.size());
    cache->outputs.resize(layers_.size());
  }
  Matrix<T> x = batch;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    Matrix<T> z(l.weight.rows(), x.cols());
    z.noalias() = l.weight * x;
    z.colwise() += l.bias;
    apply_activation(z, l.activation);
    if (cache) {
      cache->inputs[k] = std::move(x);
      cache->outputs[k] = z;
    }
    x = std::move(z);
  }
  return x;
}

template <typename T>
Gradients<T> BasicMlp<T>::backward(const ForwardCache<T>& cache, const Matrix<T>& upstream,
                                   bool param_grads) const {
  check_dim(static_cast<std::size_t>(upstream.rows()), output_dim(), "backward upstream");
  if (cache.inputs.size() != layers_.size()) {
    throw Error(ErrorCode::DimMismatch, "forward cache does not belong to this network");
  }
  Gradients<T> g;
  if (param_grads) {
    g.weight.resize(layers_.size());
    g.bias.resize(layers_.size());
  }
  Matrix<T> delta = upstream;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& l = layers_[k];
    activation_backward(delta, cache.outputs[k], l.activation);
    if (param_grads) {
      g.weight[k].noalias() = delta * cache.inputs[k].transpose();
      g.bias[k] = delta.template cast<double>().rowwise().sum().template cast<T>();
    }
    Matrix<T> prev(l.weight.cols(), delta.cols());
    prev.noalias() = l.weight.transpose() * delta;
    delta = std::move(prev);
  }
  g.input = std::move(delta);
  return g;
}

template <typename T>
Gradients<T> BasicMlp<T>::zero_gradients() const {
  Gradients<T> g;
  for (const auto& l : layers_) {
    g.weight.push_back(Matrix<T>::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Vector<T>::Zero(l.bias.size()));
  }
  g.input = Matrix<T>::Zero(static_cast<Eigen::Index>(input_dim()), 1);
  return g;
}

template <typename T>
bool BasicMlp<T>::same_shape(const BasicMlp& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    if (layers_[k].in_dim() != other.layers_[k].in_dim() ||
        layers_[k].out_dim() != other.layers_[k].out_dim())
      return false;
  }
  return true;
}

template <typename T>
Gradients<T> backward(const BasicMlp<T>& net, const Vector<T>& input, const Vector<T>& upstream) {
  ForwardCache<T> cache;
  Matrix<T> x = input;
  net.forward(x, &cache);
  Matrix<T> up = upstream;
  return net.backward(cache, up);
}

template <typename T>
AdamState<T>::AdamState(const BasicMlp<T>& net, double learning_rate) : lr(learning_rate) {
  for (const auto& l : net.layers()) {
    m_weight.push_back(Matrix<T>::Zero(l.weight.rows(), l.weight.cols()));
    v_weight.push_back(Matrix<T>::Zero(l.weight.rows(), l.weight.cols()));
    m_bias.push_back(Vector<T>::Zero(l.bias.size()));
    v_bias.push_back(Vector<T>::Zero(l.bias.size()));
  }
}

namespace {

template <typename T, typename Param, typename Grad, typename Moment>
void adam_tensor(Param& p, const Grad& g, Moment& m, Moment& v, const AdamState<T>& opt,
                 T step_size, T bias2) {
  const T b1 = T(opt.beta1);
  const T b2 = T(opt.beta2);
  m = b1 * m + (T(1) - b1) * g;
  v = b2 * v + (T(1) - b2) * g.cwiseProduct(g);
  // p -= lr * m_hat / (sqrt(v_hat) + eps), with m_hat = m / bias1, v_hat = v / bias2
  p.array() -= step_size * m.array() / ((v.array() / bias2).sqrt() + T(opt.eps));
}

}  // namespace

template <typename T>
void adam_step(BasicMlp<T>& net, const Gradients<T>& grads, AdamState<T>& opt) {
  auto& layers = net.layers();
  if (grads.weight.size() != layers.size() || opt.m_weight.size() != layers.size()) {
    throw Error(ErrorCode::ShapeMismatch, "adam_step: gradient/optimizer shape mismatch");
  }
  ++opt.step;
  const double t = static_cast<double>(opt.step);
  const T bias1 = T(1.0 - std::pow(opt.beta1, t));
  const T bias2 = T(1.0 - std::pow(opt.beta2, t));
  const T step_size = T(opt.lr) / bias1;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    adam_tensor(layers[k].weight, grads.weight[k], opt.m_weight[k], opt.v_weight[k], opt, step_size,
                bias2);
    adam_tensor(layers[k].bias, grads.bias[k], opt.m_bias[k], opt.v_bias[k], opt, step_size, bias2);
  }
}

template <typename T>
void soft_update(BasicMlp<T>& target, const BasicMlp<T>& online, double tau) {
  if (!target.same_shape(online)) throw Error(ErrorCode::ShapeMismatch, "soft_update shapes differ");
  if (tau == 1.0) {
    target = online;
    return;
  }
  const T a = T(tau);
  const T b = T(1.0 - tau);
  for (std::size_t k = 0; k < target.layers().size(); ++k) {
    auto& t = target.layers()[k];
    const auto& o = online.layers()[k];
    t.weight = a * o.weight + b * t.weight;
    t.bias = a * o.bias + b * t.bias;
  }
}

void keep_heap_resident() {
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
}

std::uint64_t parameter_hash(const Mlp& net) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& l : net.layers()) {
    const auto tag = static_cast<std::uint8_t>(l.activation);
    mix(&tag, 1);
    mix(l.weight.data(), sizeof(float) * static_cast<std::size_t>(l.weight.size()));
    mix(l.bias.data(), sizeof(float) * static_cast<std::size_t>(l.bias.size()));
  }
  return h;
}

template struct Gradients<float>;
template struct Gradients<double>;
template class BasicMlp<float>;
template class BasicMlp<double>;
template Gradients<float> backward(const BasicMlp<float>&, const Vector<float>&, const Vector<float>&);
template Gradients<double> backward(const BasicMlp<double>&, const Vector<double>&,
                                    const Vector<double>&);
template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(BasicMlp<float>&, const Gradients<float>&, AdamState<float>&);
template void adam_step(BasicMlp<double>&, const Gradients<double>&, AdamState<double>&);
template void soft_update(BasicMlp<float>&, const BasicMlp<float>&, double);
template void soft_update(BasicMlp<double>&, const BasicMlp<double>&, double);

}  // namespace ikh::net
