#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "mabsa/tensor.hpp"

namespace mabsa {

/// Elementwise residual sums of attention updates with the encoder slices,
/// in segment order (image, text, image rationale, text rationale).
std::array<Tensor, 4> residual_combine(const std::array<Tensor, 4>& attention_out,
                                       const std::array<Tensor, 4>& encoder_slices);

struct FusedMemory {
  Tensor memory;
  std::vector<int> offsets;  // part boundaries: offsets[i]..offsets[i+1]
};

FusedMemory build_memory(std::span<const Tensor> parts);
FusedMemory build_memory(const Tensor& image, const Tensor& text, const Tensor& image_rationale,
                         const Tensor& text_rationale);

/// Candidate rows for the pointer/class distribution: averaged text rows over
/// token embeddings, then the sentiment/terminal rows. Text rows are content
/// only; callers strip boundary markers first.
Tensor candidate_matrix(const Tensor& text_rows, const Tensor& text_embeddings,
                        const Tensor& sentiment_rows);

/// softmax(candidate . state) — probability over l_t + 4 symbols.
Tensor step_distribution(const Tensor& candidate, const Tensor& decoder_state_row);

/// Runs the decoder over memory given already-embedded previous symbols.
using DecodeFn = std::function<Tensor(const Tensor& memory, const Tensor& y_embeddings)>;
/// Embeds one output symbol for the decoder input; -1 embeds the start token.
using EmbedFn = std::function<Tensor(int symbol)>;

constexpr int kStartSymbol = -1;

/// Teacher-forced logits, one tensor of length l_t+4 per gold step.
std::vector<Tensor> teacher_forced_step_logits(const DecodeFn& decode, const Tensor& memory,
                                               const Tensor& candidate,
                                               std::span<const int> gold_indices,
                                               const EmbedFn& embed);

/// Mean step cross-entropy of the gold sequence under teacher forcing.
Tensor sequence_loss(const DecodeFn& decode, const Tensor& memory, const Tensor& candidate,
                     std::span<const int> gold_indices, const EmbedFn& embed);

/// Greedy argmax decoding until the terminal symbol or max_len; ties break
/// toward the lowest index.
std::vector<int> generate_sequence(const DecodeFn& decode, const Tensor& memory,
                                   const Tensor& candidate, const EmbedFn& embed, int max_len,
                                   int terminal_index);

}  // namespace mabsa
