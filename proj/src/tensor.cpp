#include "mabsa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace mabsa {

namespace {

using detail::Node;

[[noreturn]] void fail_dim(const std::string& op, const std::string& what) {
  throw std::invalid_argument(op + ": " + what);
}

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor shape dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

void check_finite(const std::vector<double>& values, const char* op) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw std::domain_error(std::string(op) + " produced a non-finite value");
    }
  }
}

std::shared_ptr<Node> make_node(std::vector<int> shape, std::vector<double> values,
                                bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->requires_grad = requires_grad;
  return n;
}

void require_rank2(const Tensor& t, const char* op) {
  if (!t.defined() || t.shape().size() != 2) fail_dim(op, "expected a rank-2 tensor");
}

// Raw kernels; loop orders keep the inner stride unit-length.
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  std::fill(c, c + static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b + static_cast<std::size_t>(p) * n;
      double* crow = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m x k] += a[m x n] * b[k x n]^T
void matmul_nt_acc(const double* a, const double* b, double* c, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double* arow = a + static_cast<std::size_t>(i) * n;
      const double* brow = b + static_cast<std::size_t>(p) * n;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += arow[j] * brow[j];
      c[i * k + p] += acc;
    }
  }
}

// c[k x n] += a[m x k]^T * b[m x n]
void matmul_tn_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    const double* brow = b + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void softmax_row_inplace(const double* in, double* out, int n) {
  double mx = in[0];
  for (int j = 1; j < n; ++j) mx = std::max(mx, in[j]);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) {
    out[j] = std::exp(in[j] - mx);
    sum += out[j];
  }
  for (int j = 0; j < n; ++j) out[j] /= sum;
}

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(make_node(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(make_node(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw std::invalid_argument("tensor shape does not match value count");
  }
  check_finite(values, "tensor construction");
  return Tensor(make_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

Tensor Tensor::uniform(std::vector<int> shape, double lo, double hi, std::mt19937_64& rng,
                       bool requires_grad) {
  auto n = shape_numel(shape);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> values(n);
  for (auto& v : values) v = dist(rng);
  return Tensor(make_node(std::move(shape), std::move(values), requires_grad));
}

const std::vector<int>& Tensor::shape() const {
  if (!node_) throw std::logic_error("undefined tensor");
  return node_->shape;
}

std::size_t Tensor::numel() const { return node_ ? node_->numel() : 0; }

int Tensor::rows() const {
  require_rank2(*this, "rows");
  return node_->shape[0];
}

int Tensor::cols() const {
  require_rank2(*this, "cols");
  return node_->shape[1];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

std::span<const double> Tensor::values() const {
  if (!node_) throw std::logic_error("undefined tensor");
  return node_->values;
}

std::span<double> Tensor::values_mut() {
  if (!node_) throw std::logic_error("undefined tensor");
  return node_->values;
}

std::span<const double> Tensor::grad() const {
  if (!node_) throw std::logic_error("undefined tensor");
  return node_->grad;
}

void Tensor::clear_grad() {
  if (node_) node_->grad.clear();
}

double Tensor::item() const {
  if (numel() != 1) throw std::logic_error("item() requires a single-element tensor");
  return node_->values[0];
}

double Tensor::at(int r, int c) const {
  require_rank2(*this, "at");
  return node_->values[static_cast<std::size_t>(r) * cols() + c];
}

namespace {

Tensor finish(std::shared_ptr<Node> out, const char* op) {
  check_finite(out->values, op);
  return Tensor(std::move(out));
}

std::shared_ptr<Node> op_node(std::vector<int> shape, std::vector<double> values,
                              std::vector<std::shared_ptr<Node>> parents) {
  bool needs = false;
  for (const auto& p : parents) needs = needs || p->requires_grad;
  auto n = make_node(std::move(shape), std::move(values), needs);
  n->parents = std::move(parents);
  return n;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const int m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) fail_dim("matmul", "inner dimensions do not match");
  std::vector<double> out(static_cast<std::size_t>(m) * n);
  matmul_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  auto node = op_node({m, n}, std::move(out), {a.node(), b.node()});
  if (node->requires_grad) {
    node->backprop = [m, k, n](Node& self) {
      auto& pa = self.parents[0];
      auto& pb = self.parents[1];
      if (pa->requires_grad) {
        pa->ensure_grad();
        matmul_nt_acc(self.grad.data(), pb->values.data(), pa->grad.data(), m, n, k);
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        matmul_tn_acc(pa->values.data(), self.grad.data(), pb->grad.data(), m, k, n);
      }
    };
  }
  return finish(std::move(node), "matmul");
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const int m = a.rows(), n = a.cols();
  std::vector<double> out(static_cast<std::size_t>(m) * n);
  const auto av = a.values();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(j) * m + i] = av[i * n + j];
  auto node = op_node({n, m}, std::move(out), {a.node()});
  if (node->requires_grad) {
    node->backprop = [m, n](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          p->grad[static_cast<std::size_t>(i) * n + j] +=
              self.grad[static_cast<std::size_t>(j) * m + i];
    };
  }
  return finish(std::move(node), "transpose");
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) fail_dim("add", "shapes must match exactly");
  std::vector<double> out(a.numel());
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  auto node = op_node(a.shape(), std::move(out), {a.node(), b.node()});
  if (node->requires_grad) {
    node->backprop = [](Node& self) {
      for (auto& p : self.parents) {
        if (!p->requires_grad) continue;
        p->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
      }
    };
  }
  return finish(std::move(node), "add");
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  auto node = op_node(a.shape(), std::move(out), {a.node()});
  if (node->requires_grad) {
    node->backprop = [factor](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += factor * self.grad[i];
    };
  }
  return finish(std::move(node), "scale");
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  require_rank2(x, "add_row_bias");
  if (bias.shape().size() != 1 || bias.shape()[0] != x.cols()) {
    fail_dim("add_row_bias", "bias length must equal column count");
  }
  const int m = x.rows(), n = x.cols();
  std::vector<double> out(x.numel());
  const auto xv = x.values(), bv = bias.values();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i) * n + j] = xv[i * n + j] + bv[j];
  auto node = op_node(x.shape(), std::move(out), {x.node(), bias.node()});
  if (node->requires_grad) {
    node->backprop = [m, n](Node& self) {
      auto& px = self.parents[0];
      auto& pb = self.parents[1];
      if (px->requires_grad) {
        px->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += self.grad[i];
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) pb->grad[j] += self.grad[static_cast<std::size_t>(i) * n + j];
      }
    };
  }
  return finish(std::move(node), "add_row_bias");
}

Tensor softmax_rows(const Tensor& x) {
  require_rank2(x, "softmax_rows");
  const int m = x.rows(), n = x.cols();
  std::vector<double> out(x.numel());
  const auto xv = x.values();
  for (int i = 0; i < m; ++i) softmax_row_inplace(xv.data() + i * n, out.data() + i * n, n);
  auto node = op_node(x.shape(), std::move(out), {x.node()});
  if (node->requires_grad) {
    node->backprop = [m, n](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (int i = 0; i < m; ++i) {
        const double* y = self.values.data() + static_cast<std::size_t>(i) * n;
        const double* dy = self.grad.data() + static_cast<std::size_t>(i) * n;
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += dy[j] * y[j];
        double* dx = p->grad.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) dx[j] += y[j] * (dy[j] - dot);
      }
    };
  }
  return finish(std::move(node), "softmax_rows");
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  require_rank2(q, "scaled_dot_attention");
  require_rank2(k, "scaled_dot_attention");
  require_rank2(v, "scaled_dot_attention");
  if (q.cols() != k.cols()) fail_dim("scaled_dot_attention", "Q and K must share width");
  if (k.rows() != v.rows()) fail_dim("scaled_dot_attention", "K and V must share row count");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Tensor logits = scale(matmul(q, transpose(k)), inv_sqrt_d);
  return matmul(softmax_rows(logits), v);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  require_rank2(x, "layer_norm");
  const int m = x.rows(), n = x.cols();
  if (gain.shape() != std::vector<int>{n} || bias.shape() != std::vector<int>{n}) {
    fail_dim("layer_norm", "gain/bias length must equal column count");
  }
  std::vector<double> out(x.numel());
  std::vector<double> normalized(x.numel());
  std::vector<double> inv_sigma(m);
  const auto xv = x.values(), gv = gain.values(), bv = bias.values();
  for (int i = 0; i < m; ++i) {
    const double* row = xv.data() + static_cast<std::size_t>(i) * n;
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += row[j];
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    inv_sigma[i] = inv;
    for (int j = 0; j < n; ++j) {
      const double xh = (row[j] - mean) * inv;
      normalized[static_cast<std::size_t>(i) * n + j] = xh;
      out[static_cast<std::size_t>(i) * n + j] = gv[j] * xh + bv[j];
    }
  }
  auto node = op_node(x.shape(), std::move(out), {x.node(), gain.node(), bias.node()});
  if (node->requires_grad) {
    node->backprop = [m, n, normalized = std::move(normalized),
                      inv_sigma = std::move(inv_sigma)](Node& self) {
      auto& px = self.parents[0];
      auto& pg = self.parents[1];
      auto& pb = self.parents[2];
      const auto& gv = pg->values;
      for (int i = 0; i < m; ++i) {
        const double* dy = self.grad.data() + static_cast<std::size_t>(i) * n;
        const double* xh = normalized.data() + static_cast<std::size_t>(i) * n;
        if (pg->requires_grad) {
          pg->ensure_grad();
          for (int j = 0; j < n; ++j) pg->grad[j] += dy[j] * xh[j];
        }
        if (pb->requires_grad) {
          pb->ensure_grad();
          for (int j = 0; j < n; ++j) pb->grad[j] += dy[j];
        }
        if (px->requires_grad) {
          px->ensure_grad();
          double m1 = 0.0, m2 = 0.0;
          for (int j = 0; j < n; ++j) {
            const double dxh = dy[j] * gv[j];
            m1 += dxh;
            m2 += dxh * xh[j];
          }
          m1 /= n;
          m2 /= n;
          double* dx = px->grad.data() + static_cast<std::size_t>(i) * n;
          for (int j = 0; j < n; ++j) {
            const double dxh = dy[j] * gv[j];
            dx[j] += inv_sigma[i] * (dxh - m1 - xh[j] * m2);
          }
        }
      }
    };
  }
  return finish(std::move(node), "layer_norm");
}

Tensor gelu(const Tensor& x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  std::vector<double> out(x.numel());
  const auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * xv[i] * (1.0 + std::erf(xv[i] * kInvSqrt2));
  }
  auto node = op_node(x.shape(), std::move(out), {x.node()});
  if (node->requires_grad) {
    node->backprop = [](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const double v = p->values[i];
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        p->grad[i] += self.grad[i] * (cdf + v * pdf);
      }
    };
  }
  return finish(std::move(node), "gelu");
}

Tensor cross_entropy(const Tensor& logits, int target) {
  const int n = static_cast<int>(logits.numel());
  if (target < 0 || target >= n) {
    throw std::out_of_range("cross_entropy: target class out of range");
  }
  const auto lv = logits.values();
  double mx = lv[0];
  for (int j = 1; j < n; ++j) mx = std::max(mx, lv[j]);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) sum += std::exp(lv[j] - mx);
  const double loss = std::log(sum) + mx - lv[target];
  auto node = op_node({1}, {loss}, {logits.node()});
  if (node->requires_grad) {
    node->backprop = [n, target, mx](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      const double g = self.grad[0];
      double sum = 0.0;
      for (int j = 0; j < n; ++j) sum += std::exp(p->values[j] - mx);
      for (int j = 0; j < n; ++j) {
        const double soft = std::exp(p->values[j] - mx) / sum;
        p->grad[j] += g * (soft - (j == target ? 1.0 : 0.0));
      }
    };
  }
  return finish(std::move(node), "cross_entropy");
}

Tensor embedding_rows(const Tensor& table, std::span<const int> ids) {
  require_rank2(table, "embedding_rows");
  if (ids.empty()) fail_dim("embedding_rows", "id list must be nonempty");
  const int v = table.rows(), d = table.cols();
  for (int id : ids) {
    if (id < 0 || id >= v) throw std::out_of_range("embedding_rows: token id out of range");
  }
  std::vector<double> out(ids.size() * static_cast<std::size_t>(d));
  const auto tv = table.values();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  auto node = op_node({static_cast<int>(ids.size()), d}, std::move(out), {table.node()});
  if (node->requires_grad) {
    node->backprop = [d, ids = std::vector<int>(ids.begin(), ids.end())](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (std::size_t i = 0; i < ids.size(); ++i) {
        double* dst = p->grad.data() + static_cast<std::size_t>(ids[i]) * d;
        const double* src = self.grad.data() + i * d;
        for (int j = 0; j < d; ++j) dst[j] += src[j];
      }
    };
  }
  return finish(std::move(node), "embedding_rows");
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) fail_dim("concat_rows", "need at least one part");
  const int n = parts[0].cols();
  int total = 0;
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.cols() != n) fail_dim("concat_rows", "column counts must match");
    total += p.rows();
    parents.push_back(p.node());
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(total) * n);
  for (const auto& p : parts) {
    const auto pv = p.values();
    out.insert(out.end(), pv.begin(), pv.end());
  }
  auto node = op_node({total, n}, std::move(out), std::move(parents));
  if (node->requires_grad) {
    node->backprop = [](Node& self) {
      std::size_t offset = 0;
      for (auto& p : self.parents) {
        const std::size_t count = p->numel();
        if (p->requires_grad) {
          p->ensure_grad();
          for (std::size_t i = 0; i < count; ++i) p->grad[i] += self.grad[offset + i];
        }
        offset += count;
      }
    };
  }
  return finish(std::move(node), "concat_rows");
}

Tensor slice_rows(const Tensor& x, int begin, int end) {
  require_rank2(x, "slice_rows");
  if (begin < 0 || end > x.rows() || begin >= end) fail_dim("slice_rows", "invalid row range");
  const int n = x.cols();
  const auto xv = x.values();
  std::vector<double> out(xv.begin() + static_cast<std::size_t>(begin) * n,
                          xv.begin() + static_cast<std::size_t>(end) * n);
  auto node = op_node({end - begin, n}, std::move(out), {x.node()});
  if (node->requires_grad) {
    node->backprop = [begin, n](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      const std::size_t offset = static_cast<std::size_t>(begin) * n;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[offset + i] += self.grad[i];
    };
  }
  return finish(std::move(node), "slice_rows");
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) fail_dim("concat_cols", "need at least one part");
  const int m = parts[0].rows();
  int total = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::vector<int> widths;
  for (const auto& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.rows() != m) fail_dim("concat_cols", "row counts must match");
    total += p.cols();
    widths.push_back(p.cols());
    parents.push_back(p.node());
  }
  std::vector<double> out(static_cast<std::size_t>(m) * total);
  int col = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pv = parts[k].values();
    const int w = widths[k];
    for (int i = 0; i < m; ++i) {
      std::copy_n(pv.data() + static_cast<std::size_t>(i) * w, w,
                  out.data() + static_cast<std::size_t>(i) * total + col);
    }
    col += w;
  }
  auto node = op_node({m, total}, std::move(out), std::move(parents));
  if (node->requires_grad) {
    node->backprop = [m, total, widths](Node& self) {
      int col = 0;
      for (std::size_t k = 0; k < self.parents.size(); ++k) {
        auto& p = self.parents[k];
        const int w = widths[k];
        if (p->requires_grad) {
          p->ensure_grad();
          for (int i = 0; i < m; ++i) {
            const double* src = self.grad.data() + static_cast<std::size_t>(i) * total + col;
            double* dst = p->grad.data() + static_cast<std::size_t>(i) * w;
            for (int j = 0; j < w; ++j) dst[j] += src[j];
          }
        }
        col += w;
      }
    };
  }
  return finish(std::move(node), "concat_cols");
}

Tensor slice_cols(const Tensor& x, int begin, int end) {
  require_rank2(x, "slice_cols");
  if (begin < 0 || end > x.cols() || begin >= end) fail_dim("slice_cols", "invalid column range");
  const int m = x.rows(), n = x.cols(), w = end - begin;
  const auto xv = x.values();
  std::vector<double> out(static_cast<std::size_t>(m) * w);
  for (int i = 0; i < m; ++i) {
    std::copy_n(xv.data() + static_cast<std::size_t>(i) * n + begin, w,
                out.data() + static_cast<std::size_t>(i) * w);
  }
  auto node = op_node({m, w}, std::move(out), {x.node()});
  if (node->requires_grad) {
    node->backprop = [m, n, begin, w](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (int i = 0; i < m; ++i) {
        const double* src = self.grad.data() + static_cast<std::size_t>(i) * w;
        double* dst = p->grad.data() + static_cast<std::size_t>(i) * n + begin;
        for (int j = 0; j < w; ++j) dst[j] += src[j];
      }
    };
  }
  return finish(std::move(node), "slice_cols");
}

Tensor sum_all(const Tensor& x) {
  const auto xv = x.values();
  const double total = std::accumulate(xv.begin(), xv.end(), 0.0);
  auto node = op_node({1}, {total}, {x.node()});
  if (node->requires_grad) {
    node->backprop = [](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      const double g = self.grad[0];
      for (auto& gv : p->grad) gv += g;
    };
  }
  return finish(std::move(node), "sum_all");
}

Tensor mean_of(std::span<const Tensor> scalars) {
  if (scalars.empty()) fail_dim("mean_of", "need at least one scalar");
  std::vector<std::shared_ptr<Node>> parents;
  double total = 0.0;
  for (const auto& s : scalars) {
    if (s.numel() != 1) fail_dim("mean_of", "inputs must be scalars");
    total += s.values()[0];
    parents.push_back(s.node());
  }
  const double inv_n = 1.0 / static_cast<double>(scalars.size());
  auto node = op_node({1}, {total * inv_n}, std::move(parents));
  if (node->requires_grad) {
    node->backprop = [inv_n](Node& self) {
      const double g = self.grad[0] * inv_n;
      for (auto& p : self.parents) {
        if (!p->requires_grad) continue;
        p->ensure_grad();
        p->grad[0] += g;
      }
    };
  }
  return finish(std::move(node), "mean_of");
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw std::logic_error("backward: loss must be a defined scalar tensor");
  }
  auto root = loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order DFS; graphs can be deep enough to overflow the stack.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next].get();
      ++next;
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior grads are scratch for this sweep; only leaves (parameters)
  // accumulate across repeated backward calls.
  for (Node* node : order) {
    if (!node->parents.empty()) node->grad.assign(node->numel(), 0.0);
  }
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backprop && !node->grad.empty()) node->backprop(*node);
  }
}

void adam_step(std::span<Parameter> params, double learning_rate, AdamState& state) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  for (auto& p : params) {
    if (p.tensor.grad().empty()) {
      throw std::logic_error("adam_step: parameter '" + p.name + "' has no gradient");
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
  for (auto& p : params) {
    auto values = p.tensor.values_mut();
    const auto grad = p.tensor.grad();
    auto& m = state.first_moment[p.name];
    auto& v = state.second_moment[p.name];
    if (m.size() != values.size()) m.assign(values.size(), 0.0);
    if (v.size() != values.size()) v.assign(values.size(), 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grad[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      values[i] -= learning_rate * mhat / (std::sqrt(vhat) + kEps);
    }
    p.tensor.clear_grad();
  }
}

void zero_grads(std::span<Parameter> params) {
  for (auto& p : params) p.tensor.clear_grad();
}

}  // namespace mabsa
