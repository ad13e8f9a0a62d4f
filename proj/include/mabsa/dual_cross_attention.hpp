#pragma once

#include <random>

#include "mabsa/tensor.hpp"

namespace mabsa {

/// Feature rows stacked over rationale rows; the fusion module's working set.
struct StackedFeatures {
  Tensor z;            // (feature_rows + rationale_rows) x d
  int feature_rows = 0;
  int rationale_rows = 0;
};

/// Shared query/key/value projections for one fusion branch. No output
/// projection and no bias: the attention output is used directly.
struct DcaWeights {
  Tensor query;  // d x d
  Tensor key;    // d x d
  Tensor value;  // d x d
};

/// Uniform init in +-1/sqrt(d).
DcaWeights make_dca_weights(int d, std::mt19937_64& rng);

StackedFeatures stack(const Tensor& features, const Tensor& rationale);

struct JointAttentionOut {
  Tensor features;   // updated feature block
  Tensor rationale;  // updated rationale block
};

/// Single-head attention over the whole stack with softmax normalized jointly
/// across all feature+rationale key positions, then split back into blocks.
/// Splitting the joint output equals the per-block sums computed under the
/// same shared normalization, which is the identity the tests pin down.
JointAttentionOut joint_attention(const StackedFeatures& stacked, const DcaWeights& weights);

struct DualFuseOut {
  Tensor image;
  Tensor text;
  Tensor image_rationale;
  Tensor text_rationale;
};

/// Two independent branches: image with image-rationale, text with
/// text-rationale. The branches share no parameters.
DualFuseOut dual_fuse(const Tensor& image, const Tensor& text, const Tensor& image_rationale,
                      const Tensor& text_rationale, const DcaWeights& image_weights,
                      const DcaWeights& text_weights);

/// Ablation variant: only the feature blocks are updated (queries from the
/// feature rows, keys/values over the full stack); rationale blocks pass
/// through untouched, sharing storage with the inputs.
DualFuseOut unilateral_fuse(const Tensor& image, const Tensor& text,
                            const Tensor& image_rationale, const Tensor& text_rationale,
                            const DcaWeights& image_weights, const DcaWeights& text_weights);

}  // namespace mabsa
