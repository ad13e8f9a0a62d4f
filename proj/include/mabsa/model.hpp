#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mabsa/dual_cross_attention.hpp"
#include "mabsa/sequence_codec.hpp"
#include "mabsa/tensor.hpp"

namespace mabsa {

struct Vocabulary {
  std::vector<std::string> tokens;
  std::unordered_map<std::string, int> index;
  int img = -1, img_end = -1, bos = -1, eos = -1, bor = -1, eor = -1, pad = -1, unk = -1;

  /// Specials first, then corpus tokens in first-seen order (deterministic).
  static Vocabulary build(std::span<const std::vector<std::string>> token_streams);

  int size() const { return static_cast<int>(tokens.size()); }
  int id_of(const std::string& token) const;               // unk fallback
  std::vector<int> ids_of(std::span<const std::string>) const;
};

struct ModelConfig {
  int hidden_dim = 64;
  int visual_dim = 8;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int heads = 4;
  int ffn_dim = 256;
  int max_image_rows = 8;
  int max_text_len = 64;
  int max_rationale_len = 64;
  int sentiment_classes = 3;
  std::uint64_t seed = 7;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void validate(const ModelConfig& config);

/// One sample in model-facing form: token ids, visual feature rows, gold triples.
struct MultimodalExample {
  std::string id;
  std::vector<int> text_tokens;
  std::vector<std::vector<double>> image_features;  // l_i rows of visual_dim
  std::vector<int> image_rationale_tokens;
  std::vector<int> text_rationale_tokens;
  std::vector<AspectTriple> gold;
};

struct Segment {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Offsets of the four segments inside the assembled encoder sequence.
/// Boundary markers count inside their segment.
struct SegmentLayout {
  Segment image, text, image_rationale, text_rationale;
  int total = 0;
  friend bool operator==(const SegmentLayout&, const SegmentLayout&) = default;
};

struct AssembledInput {
  Tensor x;  // total x d
  SegmentLayout layout;
  Tensor text_embeddings;  // l_t x d token embeddings, no markers or positions
};

struct EncoderOutput {
  Tensor hidden;  // total x d
  SegmentLayout layout;
  Tensor text_embeddings;
};

enum class AblationMode { full, no_dual, no_cross, no_concat };
const char* to_string(AblationMode mode);
AblationMode ablation_from_string(const std::string& name);

/// Deterministic sinusoidal position rows, no gradient.
Tensor sinusoidal_positions(int length, int dim);

struct LinearLayer {
  Tensor weight;  // in x out
  Tensor bias;    // out
  Tensor apply(const Tensor& x) const { return add_row_bias(matmul(x, weight), bias); }
};

struct LayerNormParams {
  Tensor gain;
  Tensor bias;
  Tensor apply(const Tensor& x) const { return layer_norm(x, gain, bias); }
};

struct AttentionParams {
  LinearLayer query, key, value, output;
};

struct EncoderBlock {
  LayerNormParams ln_attn, ln_ffn;
  AttentionParams attn;
  LinearLayer ffn_in, ffn_out;
};

struct DecoderBlock {
  LayerNormParams ln_self, ln_cross, ln_ffn;
  AttentionParams self_attn, cross_attn;
  LinearLayer ffn_in, ffn_out;
};

Tensor multi_head_attention(const AttentionParams& params, const Tensor& query_rows,
                            const Tensor& memory_rows, int heads, bool causal);

struct ForwardState {
  Tensor memory;             // fused decoder memory
  Tensor candidate;          // (l_t + 4) x d pointer/class candidate matrix
  Tensor text_embeddings;    // l_t x d
  int text_len = 0;
};

/// The full encoder + fusion + pointer-decoder model.
class Model {
 public:
  Model(ModelConfig config, Vocabulary vocab, AblationMode mode = AblationMode::full);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  AblationMode ablation() const { return mode_; }

  std::span<Parameter> parameters() { return params_; }
  std::span<const Parameter> parameters() const { return params_; }
  std::size_t parameter_value_count() const;

  AssembledInput assemble_input(const MultimodalExample& example) const;
  EncoderOutput encode(const Tensor& x, const SegmentLayout& layout) const;
  static std::array<Tensor, 4> slice_segments(const EncoderOutput& out);
  Tensor decode(const Tensor& memory, const Tensor& y_prev_embeddings) const;

  /// Runs assembly, encoding, and ablation-aware fusion; yields the decoder
  /// memory and the candidate matrix for this example.
  ForwardState forward(const MultimodalExample& example) const;

  /// Mean teacher-forced step loss against the example's gold sequence.
  Tensor loss(const MultimodalExample& example) const;
  Tensor loss(const MultimodalExample& example, const TargetSequence& target) const;

  /// Greedy decode; returns emitted symbol indices (terminal symbol included
  /// when produced). Ties break toward the lowest index.
  std::vector<int> generate(const MultimodalExample& example, int max_len) const;

  /// Same parameters viewed under a different ablation mode; no_cross drops
  /// the fusion weights from the trainable list.
  Model with_ablation(AblationMode mode) const;

  void save_checkpoint(const std::filesystem::path& path) const;
  static Model load_checkpoint(const std::filesystem::path& path);
  /// Loads values into this model; config/vocab/parameter mismatch is an error.
  void load_parameters(const std::filesystem::path& path);

 private:
  Model() = default;
  void init_parameters(std::mt19937_64& rng);
  void rebuild_parameter_list();
  Tensor embed_target_symbol(const ForwardState& state, int symbol) const;
  Tensor decode_with_positions(const Tensor& memory, const Tensor& y_embeddings) const;

  ModelConfig config_;
  Vocabulary vocab_;
  AblationMode mode_ = AblationMode::full;

  Tensor token_embeddings_;  // vocab x d
  LinearLayer visual_projection_;
  std::vector<EncoderBlock> encoder_;
  std::vector<DecoderBlock> decoder_;
  DcaWeights image_branch_, text_branch_;
  Tensor sentiment_embeddings_;  // 4 x d: positive, neutral, negative, terminal

  std::vector<Parameter> params_;

  friend struct ModelAccess;
};

}  // namespace mabsa
