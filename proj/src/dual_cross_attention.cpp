#include "mabsa/dual_cross_attention.hpp"

#include <cmath>
#include <stdexcept>

namespace mabsa {

DcaWeights make_dca_weights(int d, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  return DcaWeights{
      Tensor::uniform({d, d}, -bound, bound, rng, true),
      Tensor::uniform({d, d}, -bound, bound, rng, true),
      Tensor::uniform({d, d}, -bound, bound, rng, true),
  };
}

StackedFeatures stack(const Tensor& features, const Tensor& rationale) {
  if (features.cols() != rationale.cols()) {
    throw std::invalid_argument("stack: feature and rationale widths differ");
  }
  const Tensor parts[] = {features, rationale};
  return StackedFeatures{concat_rows(parts), features.rows(), rationale.rows()};
}

JointAttentionOut joint_attention(const StackedFeatures& stacked, const DcaWeights& weights) {
  const Tensor q = matmul(stacked.z, weights.query);
  const Tensor k = matmul(stacked.z, weights.key);
  const Tensor v = matmul(stacked.z, weights.value);
  const Tensor attended = scaled_dot_attention(q, k, v);
  const int split = stacked.feature_rows;
  return JointAttentionOut{
      slice_rows(attended, 0, split),
      slice_rows(attended, split, split + stacked.rationale_rows),
  };
}

DualFuseOut dual_fuse(const Tensor& image, const Tensor& text, const Tensor& image_rationale,
                      const Tensor& text_rationale, const DcaWeights& image_weights,
                      const DcaWeights& text_weights) {
  const auto image_out = joint_attention(stack(image, image_rationale), image_weights);
  const auto text_out = joint_attention(stack(text, text_rationale), text_weights);
  return DualFuseOut{image_out.features, text_out.features, image_out.rationale,
                     text_out.rationale};
}

namespace {

Tensor feature_only_attention(const Tensor& features, const Tensor& rationale,
                              const DcaWeights& weights) {
  const StackedFeatures stacked = stack(features, rationale);
  const Tensor q = matmul(features, weights.query);
  const Tensor k = matmul(stacked.z, weights.key);
  const Tensor v = matmul(stacked.z, weights.value);
  return scaled_dot_attention(q, k, v);
}

}  // namespace

DualFuseOut unilateral_fuse(const Tensor& image, const Tensor& text,
                            const Tensor& image_rationale, const Tensor& text_rationale,
                            const DcaWeights& image_weights, const DcaWeights& text_weights) {
  return DualFuseOut{
      feature_only_attention(image, image_rationale, image_weights),
      feature_only_attention(text, text_rationale, text_weights),
      image_rationale,
      text_rationale,
  };
}

}  // namespace mabsa
