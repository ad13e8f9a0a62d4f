#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace mabsa {

namespace detail {

struct Node {
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;

  std::size_t numel() const { return values.size(); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(values.size(), 0.0);
  }
};

}  // namespace detail

/// Dense float64 tensor with reverse-mode gradients. A Tensor is a cheap
/// handle onto a graph node; values are immutable after construction except
/// through values_mut(), which exists for optimizers and checkpoint loading.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
  static Tensor from(std::vector<int> shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  /// Uniform values in [lo, hi).
  static Tensor uniform(std::vector<int> shape, double lo, double hi,
                        std::mt19937_64& rng, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const;
  std::size_t numel() const;
  int rows() const;  // rank-2 only
  int cols() const;
  bool requires_grad() const;

  std::span<const double> values() const;
  std::span<double> values_mut();
  /// Gradient buffer; empty span when no gradient has been accumulated.
  std::span<const double> grad() const;
  void clear_grad();

  double item() const;            // single-element tensors
  double at(int r, int c) const;  // rank-2 convenience

  bool shares_storage(const Tensor& other) const { return node_ == other.node_; }

  std::shared_ptr<detail::Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Named trainable tensor. Names must be unique within a model.
struct Parameter {
  std::string name;
  Tensor tensor;
};

// Core ops. Every op validates shapes, propagates gradients to inputs that
// require them, and rejects non-finite results.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_row_bias(const Tensor& x, const Tensor& bias);
Tensor softmax_rows(const Tensor& x);
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);
Tensor gelu(const Tensor& x);
Tensor cross_entropy(const Tensor& logits, int target);
Tensor embedding_rows(const Tensor& table, std::span<const int> ids);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, int begin, int end);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& x, int begin, int end);
Tensor sum_all(const Tensor& x);
Tensor mean_of(std::span<const Tensor> scalars);

/// Accumulates d(loss)/d(input) into every reachable gradient buffer.
/// Repeated calls accumulate; clear grads between backward passes.
void backward(const Tensor& loss);

constexpr double kLayerNormEpsilon = 1e-5;

struct AdamState {
  std::int64_t step = 0;
  std::unordered_map<std::string, std::vector<double>> first_moment;
  std::unordered_map<std::string, std::vector<double>> second_moment;
};

/// Adam with beta1=0.9, beta2=0.999, eps=1e-8. Clears grads after the update.
void adam_step(std::span<Parameter> params, double learning_rate, AdamState& state);
void zero_grads(std::span<Parameter> params);

}  // namespace mabsa
