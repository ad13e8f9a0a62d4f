#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "mabsa/dual_cross_attention.hpp"
#include "test_util.hpp"

using namespace mabsa;
using test_util::random_tensor;

namespace {

// Two-path oracle: evaluates the per-block sums under shared joint
// normalization with plain loops, never touching the attention code.
struct BlockOracle {
  std::vector<double> top;     // feature_rows x d
  std::vector<double> bottom;  // rationale_rows x d
};

std::vector<double> project(std::span<const double> rows, int m, int d,
                            std::span<const double> w) {
  std::vector<double> out(static_cast<std::size_t>(m) * d, 0.0);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < d; ++k)
      for (int j = 0; j < d; ++j) out[i * d + j] += rows[i * d + k] * w[k * d + j];
  return out;
}

BlockOracle block_oracle(const Tensor& h, const Tensor& hl, const DcaWeights& w) {
  const int d = h.cols();
  const int lh = h.rows(), ll = hl.rows();
  std::vector<double> stacked;
  stacked.insert(stacked.end(), h.values().begin(), h.values().end());
  stacked.insert(stacked.end(), hl.values().begin(), hl.values().end());
  const int total = lh + ll;
  const auto q = project(stacked, total, d, w.query.values());
  const auto k = project(stacked, total, d, w.key.values());
  const auto v = project(stacked, total, d, w.value.values());

  BlockOracle oracle;
  oracle.top.assign(static_cast<std::size_t>(lh) * d, 0.0);
  oracle.bottom.assign(static_cast<std::size_t>(ll) * d, 0.0);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d));
  for (int i = 0; i < total; ++i) {
    std::vector<double> logits(total);
    double mx = -1e300;
    for (int j = 0; j < total; ++j) {
      double dot = 0.0;
      for (int c = 0; c < d; ++c) dot += q[i * d + c] * k[j * d + c];
      logits[j] = dot * inv_sqrt;
      mx = std::max(mx, logits[j]);
    }
    double z = 0.0;
    for (int j = 0; j < total; ++j) z += std::exp(logits[j] - mx);
    // Shared normalization; the two block contributions are accumulated
    // separately and then summed.
    std::vector<double> from_top(d, 0.0), from_bottom(d, 0.0);
    for (int j = 0; j < total; ++j) {
      const double p = std::exp(logits[j] - mx) / z;
      auto& acc = j < lh ? from_top : from_bottom;
      for (int c = 0; c < d; ++c) acc[c] += p * v[j * d + c];
    }
    double* dst = i < lh ? &oracle.top[static_cast<std::size_t>(i) * d]
                         : &oracle.bottom[static_cast<std::size_t>(i - lh) * d];
    for (int c = 0; c < d; ++c) dst[c] = from_top[c] + from_bottom[c];
  }
  return oracle;
}

}  // namespace

TEST_CASE("stack concatenates vertically and splits back exactly") {
  std::mt19937_64 rng(301);
  const Tensor h = random_tensor({3, 4}, rng);
  const Tensor hl = random_tensor({2, 4}, rng);
  const StackedFeatures s = stack(h, hl);
  CHECK(s.z.rows() == 5);
  CHECK(s.feature_rows == 3);
  CHECK(s.rationale_rows == 2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) CHECK(s.z.at(i, j) == h.at(i, j));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 4; ++j) CHECK(s.z.at(3 + i, j) == hl.at(i, j));

  CHECK_THROWS_AS(stack(h, random_tensor({2, 5}, rng)), std::invalid_argument);
}

TEST_CASE("joint attention satisfies the block-decomposition identity") {
  std::mt19937_64 rng(307);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = std::vector<int>{4, 8, 16}[trial % 3];
    const int lh = std::uniform_int_distribution<int>(1, 8)(rng);
    const int ll = std::uniform_int_distribution<int>(1, 8)(rng);
    const Tensor h = random_tensor({lh, d}, rng);
    const Tensor hl = random_tensor({ll, d}, rng);
    DcaWeights w = make_dca_weights(d, rng);
    const auto out = joint_attention(stack(h, hl), w);
    const auto oracle = block_oracle(h, hl, w);
    for (std::size_t i = 0; i < out.features.numel(); ++i) {
      CHECK(std::abs(out.features.values()[i] - oracle.top[i]) < 1e-10);
    }
    for (std::size_t i = 0; i < out.rationale.numel(); ++i) {
      CHECK(std::abs(out.rationale.values()[i] - oracle.bottom[i]) < 1e-10);
    }
  }
}

TEST_CASE("identical blocks with identical rows give identical updates") {
  std::mt19937_64 rng(311);
  const Tensor h = random_tensor({2, 4}, rng);
  const Tensor hl = Tensor::from(h.shape(), {h.values().begin(), h.values().end()});
  DcaWeights w = make_dca_weights(4, rng);
  const auto out = joint_attention(stack(h, hl), w);
  for (std::size_t i = 0; i < out.features.numel(); ++i) {
    CHECK(out.features.values()[i] == doctest::Approx(out.rationale.values()[i]).epsilon(1e-12));
  }
}

TEST_CASE("single rationale row is one jointly-normalized attention row") {
  std::mt19937_64 rng(313);
  const Tensor h = random_tensor({4, 8}, rng);
  const Tensor hl = random_tensor({1, 8}, rng);
  DcaWeights w = make_dca_weights(8, rng);
  const auto out = joint_attention(stack(h, hl), w);
  const auto oracle = block_oracle(h, hl, w);
  CHECK(out.rationale.rows() == 1);
  for (std::size_t i = 0; i < out.rationale.numel(); ++i) {
    CHECK(std::abs(out.rationale.values()[i] - oracle.bottom[i]) < 1e-10);
  }
}

TEST_CASE("joint softmax rows over the stack sum to one") {
  std::mt19937_64 rng(317);
  const int d = 8;
  const Tensor h = random_tensor({3, d}, rng);
  const Tensor hl = random_tensor({2, d}, rng);
  DcaWeights w = make_dca_weights(d, rng);
  const StackedFeatures s = stack(h, hl);
  const Tensor probs = softmax_rows(
      scale(matmul(matmul(s.z, w.query), transpose(matmul(s.z, w.key))), 1.0 / std::sqrt(8.0)));
  for (int i = 0; i < probs.rows(); ++i) {
    double sum = 0.0;
    for (int j = 0; j < probs.cols(); ++j) sum += probs.at(i, j);
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("dual fuse equals two manual joint attention calls and isolates branches") {
  std::mt19937_64 rng(331);
  const int d = 8;
  const Tensor hv = random_tensor({3, d}, rng);
  const Tensor ht = random_tensor({4, d}, rng);
  const Tensor hli = random_tensor({2, d}, rng);
  const Tensor hlt = random_tensor({2, d}, rng);
  DcaWeights wi = make_dca_weights(d, rng);
  DcaWeights wt = make_dca_weights(d, rng);

  const auto fused = dual_fuse(hv, ht, hli, hlt, wi, wt);
  const auto image_manual = joint_attention(stack(hv, hli), wi);
  const auto text_manual = joint_attention(stack(ht, hlt), wt);
  CHECK(fused.image.values()[0] == image_manual.features.values()[0]);
  CHECK(fused.text.values()[0] == text_manual.features.values()[0]);
  CHECK(fused.image_rationale.values()[1] == image_manual.rationale.values()[1]);
  CHECK(fused.text_rationale.values()[1] == text_manual.rationale.values()[1]);

  CHECK(fused.image.shape() == hv.shape());
  CHECK(fused.text.shape() == ht.shape());
  CHECK(fused.image_rationale.shape() == hli.shape());
  CHECK(fused.text_rationale.shape() == hlt.shape());

  // Perturbing the text rationale must leave the image branch bit-identical.
  Tensor hlt2 = random_tensor({2, d}, rng, false, 2.0);
  const auto fused2 = dual_fuse(hv, ht, hli, hlt2, wi, wt);
  for (std::size_t i = 0; i < fused.image.numel(); ++i) {
    CHECK(fused.image.values()[i] == fused2.image.values()[i]);
  }
  for (std::size_t i = 0; i < fused.image_rationale.numel(); ++i) {
    CHECK(fused.image_rationale.values()[i] == fused2.image_rationale.values()[i]);
  }
}

TEST_CASE("unilateral fuse passes rationales through and matches the dual top block") {
  std::mt19937_64 rng(337);
  const int d = 8;
  const Tensor hv = random_tensor({3, d}, rng);
  const Tensor ht = random_tensor({5, d}, rng);
  const Tensor hli = random_tensor({2, d}, rng);
  const Tensor hlt = random_tensor({3, d}, rng);
  DcaWeights wi = make_dca_weights(d, rng);
  DcaWeights wt = make_dca_weights(d, rng);

  const auto uni = unilateral_fuse(hv, ht, hli, hlt, wi, wt);
  CHECK(uni.image_rationale.shares_storage(hli));
  CHECK(uni.text_rationale.shares_storage(hlt));

  const auto dual = dual_fuse(hv, ht, hli, hlt, wi, wt);
  for (std::size_t i = 0; i < uni.image.numel(); ++i) {
    CHECK(uni.image.values()[i] == doctest::Approx(dual.image.values()[i]).epsilon(1e-14));
  }
  for (std::size_t i = 0; i < uni.text.numel(); ++i) {
    CHECK(uni.text.values()[i] == doctest::Approx(dual.text.values()[i]).epsilon(1e-14));
  }
  CHECK(uni.image.shape() == hv.shape());
  CHECK(uni.text.shape() == ht.shape());
}

TEST_CASE("gradients flow into the rationale block through the feature output") {
  std::mt19937_64 rng(347);
  const int d = 4;
  std::vector<Parameter> params;
  params.push_back({"h", random_tensor({2, d}, rng, true)});
  params.push_back({"hl", random_tensor({2, d}, rng, true)});
  DcaWeights w = make_dca_weights(d, rng);

  const auto out = joint_attention(stack(params[0].tensor, params[1].tensor), w);
  backward(sum_all(out.features));
  double hl_grad_norm = 0.0;
  for (double g : params[1].tensor.grad()) hl_grad_norm += std::abs(g);
  CHECK(hl_grad_norm > 1e-8);

  auto loss_fn = [&]() {
    const auto o = joint_attention(stack(params[0].tensor, params[1].tensor), w);
    return sum_all(o.features);
  };
  CHECK(test_util::max_gradient_error(loss_fn, params) < 1e-4);
}
