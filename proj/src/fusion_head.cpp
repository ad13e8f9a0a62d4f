#include "mabsa/fusion_head.hpp"

#include <stdexcept>

namespace mabsa {

std::array<Tensor, 4> residual_combine(const std::array<Tensor, 4>& attention_out,
                                       const std::array<Tensor, 4>& encoder_slices) {
  std::array<Tensor, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    if (attention_out[i].shape() != encoder_slices[i].shape()) {
      throw std::invalid_argument("residual_combine: segment shapes differ");
    }
    out[i] = add(attention_out[i], encoder_slices[i]);
  }
  return out;
}

FusedMemory build_memory(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("build_memory: no parts");
  FusedMemory fused;
  fused.offsets.push_back(0);
  for (const auto& p : parts) fused.offsets.push_back(fused.offsets.back() + p.rows());
  fused.memory = concat_rows(parts);
  return fused;
}

FusedMemory build_memory(const Tensor& image, const Tensor& text, const Tensor& image_rationale,
                         const Tensor& text_rationale) {
  const Tensor parts[] = {image, text, image_rationale, text_rationale};
  return build_memory(parts);
}

Tensor candidate_matrix(const Tensor& text_rows, const Tensor& text_embeddings,
                        const Tensor& sentiment_rows) {
  if (text_rows.shape() != text_embeddings.shape()) {
    throw std::invalid_argument(
        "candidate_matrix: fused text rows and token embeddings must share shape");
  }
  if (sentiment_rows.rows() != 4 || sentiment_rows.cols() != text_rows.cols()) {
    throw std::invalid_argument("candidate_matrix: sentiment rows must be 4 x d");
  }
  const Tensor averaged = scale(add(text_rows, text_embeddings), 0.5);
  const Tensor parts[] = {averaged, sentiment_rows};
  return concat_rows(parts);
}

Tensor step_distribution(const Tensor& candidate, const Tensor& decoder_state_row) {
  Tensor state = decoder_state_row;
  if (state.shape().size() == 1) {
    state = Tensor::from({1, static_cast<int>(state.numel())},
                         {state.values().begin(), state.values().end()},
                         state.requires_grad());
  }
  if (state.rows() != 1 || state.cols() != candidate.cols()) {
    throw std::invalid_argument("step_distribution: state must be a single row of width d");
  }
  return softmax_rows(matmul(state, transpose(candidate)));
}

namespace {

Tensor decoder_input(const EmbedFn& embed, std::span<const int> symbols) {
  std::vector<Tensor> rows;
  rows.reserve(symbols.size());
  for (int s : symbols) rows.push_back(embed(s));
  return concat_rows(rows);
}

}  // namespace

std::vector<Tensor> teacher_forced_step_logits(const DecodeFn& decode, const Tensor& memory,
                                               const Tensor& candidate,
                                               std::span<const int> gold_indices,
                                               const EmbedFn& embed) {
  if (gold_indices.empty()) {
    throw std::invalid_argument("teacher_forced_step_logits: empty gold sequence");
  }
  std::vector<int> inputs;
  inputs.push_back(kStartSymbol);
  inputs.insert(inputs.end(), gold_indices.begin(), gold_indices.end() - 1);
  const Tensor hidden = decode(memory, decoder_input(embed, inputs));
  const Tensor logits = matmul(hidden, transpose(candidate));  // steps x (l_t + 4)
  std::vector<Tensor> out;
  out.reserve(gold_indices.size());
  for (std::size_t t = 0; t < gold_indices.size(); ++t) {
    out.push_back(slice_rows(logits, static_cast<int>(t), static_cast<int>(t) + 1));
  }
  return out;
}

Tensor sequence_loss(const DecodeFn& decode, const Tensor& memory, const Tensor& candidate,
                     std::span<const int> gold_indices, const EmbedFn& embed) {
  const auto step_logits =
      teacher_forced_step_logits(decode, memory, candidate, gold_indices, embed);
  const int symbols = candidate.rows();
  std::vector<Tensor> step_losses;
  step_losses.reserve(step_logits.size());
  for (std::size_t t = 0; t < step_logits.size(); ++t) {
    const int target = gold_indices[t];
    if (target < 0 || target >= symbols) {
      throw std::out_of_range("sequence_loss: gold index outside the symbol space");
    }
    step_losses.push_back(cross_entropy(step_logits[t], target));
  }
  return mean_of(step_losses);
}

std::vector<int> generate_sequence(const DecodeFn& decode, const Tensor& memory,
                                   const Tensor& candidate, const EmbedFn& embed, int max_len,
                                   int terminal_index) {
  if (max_len < 1) throw std::invalid_argument("generate_sequence: max_len must be >= 1");
  std::vector<int> inputs{kStartSymbol};
  std::vector<int> emitted;
  while (static_cast<int>(emitted.size()) < max_len) {
    const Tensor hidden = decode(memory, decoder_input(embed, inputs));
    const Tensor last = slice_rows(hidden, hidden.rows() - 1, hidden.rows());
    const Tensor probs = step_distribution(candidate, last);
    const auto pv = probs.values();
    int best = 0;
    for (std::size_t j = 1; j < pv.size(); ++j) {
      if (pv[j] > pv[best]) best = static_cast<int>(j);
    }
    emitted.push_back(best);
    if (best == terminal_index) break;
    inputs.push_back(best);
  }
  return emitted;
}

}  // namespace mabsa
