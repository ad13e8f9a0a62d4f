#include "mabsa/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mabsa/fusion_head.hpp"

namespace mabsa {

namespace {

constexpr double kMaskValue = -1e30;

const std::array<std::pair<const char*, int Vocabulary::*>, 8> kSpecials = {{
    {"<pad>", &Vocabulary::pad},
    {"<unk>", &Vocabulary::unk},
    {"<img>", &Vocabulary::img},
    {"</img>", &Vocabulary::img_end},
    {"<bos>", &Vocabulary::bos},
    {"<eos>", &Vocabulary::eos},
    {"<bor>", &Vocabulary::bor},
    {"<eor>", &Vocabulary::eor},
}};

void bind_specials(Vocabulary& vocab) {
  for (const auto& [text, member] : kSpecials) {
    auto it = vocab.index.find(text);
    if (it == vocab.index.end()) {
      throw std::invalid_argument(std::string("vocabulary missing special token ") + text);
    }
    vocab.*member = it->second;
  }
}

}  // namespace

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> token_streams) {
  Vocabulary vocab;
  auto push = [&vocab](const std::string& token) {
    if (vocab.index.try_emplace(token, static_cast<int>(vocab.tokens.size())).second) {
      vocab.tokens.push_back(token);
    }
  };
  for (const auto& [text, _] : kSpecials) push(text);
  for (const auto& stream : token_streams) {
    for (const auto& token : stream) push(token);
  }
  bind_specials(vocab);
  return vocab;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = index.find(token);
  return it == index.end() ? unk : it->second;
}

std::vector<int> Vocabulary::ids_of(std::span<const std::string> tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id_of(t));
  return out;
}

void validate(const ModelConfig& config) {
  if (config.hidden_dim <= 0 || config.visual_dim <= 0 || config.ffn_dim <= 0 ||
      config.heads <= 0 || config.max_image_rows <= 0 || config.max_text_len <= 0 ||
      config.max_rationale_len <= 0) {
    throw std::invalid_argument("model config dimensions must be positive");
  }
  if (config.encoder_layers < 0 || config.decoder_layers < 0) {
    throw std::invalid_argument("layer counts must be non-negative");
  }
  if (config.hidden_dim % config.heads != 0) {
    throw std::invalid_argument("hidden_dim must be divisible by heads");
  }
  if (config.sentiment_classes != 3) {
    throw std::invalid_argument("exactly three sentiment classes are supported");
  }
}

const char* to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::full: return "full";
    case AblationMode::no_dual: return "no_dual";
    case AblationMode::no_cross: return "no_cross";
    case AblationMode::no_concat: return "no_concat";
  }
  return "full";
}

AblationMode ablation_from_string(const std::string& name) {
  if (name == "full") return AblationMode::full;
  if (name == "no_dual") return AblationMode::no_dual;
  if (name == "no_cross") return AblationMode::no_cross;
  if (name == "no_concat") return AblationMode::no_concat;
  throw std::invalid_argument("unknown ablation mode: " + name);
}

Tensor sinusoidal_positions(int length, int dim) {
  std::vector<double> values(static_cast<std::size_t>(length) * dim);
  for (int p = 0; p < length; ++p) {
    for (int i = 0; i < dim; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / dim);
      values[static_cast<std::size_t>(p) * dim + i] = std::sin(p * freq);
      if (i + 1 < dim) values[static_cast<std::size_t>(p) * dim + i + 1] = std::cos(p * freq);
    }
  }
  return Tensor::from({length, dim}, std::move(values));
}

Tensor multi_head_attention(const AttentionParams& params, const Tensor& query_rows,
                            const Tensor& memory_rows, int heads, bool causal) {
  const int d = query_rows.cols();
  const int head_dim = d / heads;
  const Tensor q = params.query.apply(query_rows);
  const Tensor k = params.key.apply(memory_rows);
  const Tensor v = params.value.apply(memory_rows);

  Tensor mask;
  if (causal) {
    const int m = query_rows.rows();
    if (memory_rows.rows() != m) {
      throw std::invalid_argument("causal attention requires square score matrix");
    }
    std::vector<double> mv(static_cast<std::size_t>(m) * m, 0.0);
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) mv[static_cast<std::size_t>(i) * m + j] = kMaskValue;
    mask = Tensor::from({m, m}, std::move(mv));
  }

  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<Tensor> head_outputs;
  head_outputs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    const Tensor qh = slice_cols(q, h * head_dim, (h + 1) * head_dim);
    const Tensor kh = slice_cols(k, h * head_dim, (h + 1) * head_dim);
    const Tensor vh = slice_cols(v, h * head_dim, (h + 1) * head_dim);
    Tensor logits = scale(matmul(qh, transpose(kh)), inv_sqrt);
    if (causal) logits = add(logits, mask);
    head_outputs.push_back(matmul(softmax_rows(logits), vh));
  }
  return params.output.apply(concat_cols(head_outputs));
}

namespace {

struct ParamBuilder {
  std::mt19937_64& rng;

  Tensor weight(int in, int out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    return Tensor::uniform({in, out}, -bound, bound, rng, true);
  }
  LinearLayer linear(int in, int out) {
    return LinearLayer{weight(in, out), Tensor::zeros({out}, true)};
  }
  LayerNormParams layer_norm(int dim) {
    return LayerNormParams{Tensor::full({dim}, 1.0, true), Tensor::zeros({dim}, true)};
  }
  AttentionParams attention(int dim) {
    return AttentionParams{linear(dim, dim), linear(dim, dim), linear(dim, dim),
                           linear(dim, dim)};
  }
};

Tensor feed_forward(const LinearLayer& in, const LinearLayer& out, const Tensor& x) {
  return out.apply(gelu(in.apply(x)));
}

}  // namespace

Model::Model(ModelConfig config, Vocabulary vocab, AblationMode mode)
    : config_(std::move(config)), vocab_(std::move(vocab)), mode_(mode) {
  validate(config_);
  if (vocab_.size() == 0) throw std::invalid_argument("empty vocabulary");
  std::mt19937_64 rng(config_.seed);
  init_parameters(rng);
  rebuild_parameter_list();
}

void Model::init_parameters(std::mt19937_64& rng) {
  const int d = config_.hidden_dim;
  ParamBuilder b{rng};
  token_embeddings_ = Tensor::uniform({vocab_.size(), d}, -0.1, 0.1, rng, true);
  visual_projection_ = b.linear(config_.visual_dim, d);
  encoder_.clear();
  for (int i = 0; i < config_.encoder_layers; ++i) {
    encoder_.push_back(EncoderBlock{b.layer_norm(d), b.layer_norm(d), b.attention(d),
                                    b.linear(d, config_.ffn_dim), b.linear(config_.ffn_dim, d)});
  }
  decoder_.clear();
  for (int i = 0; i < config_.decoder_layers; ++i) {
    decoder_.push_back(DecoderBlock{b.layer_norm(d), b.layer_norm(d), b.layer_norm(d),
                                    b.attention(d), b.attention(d), b.linear(d, config_.ffn_dim),
                                    b.linear(config_.ffn_dim, d)});
  }
  image_branch_ = make_dca_weights(d, rng);
  text_branch_ = make_dca_weights(d, rng);
  sentiment_embeddings_ = Tensor::uniform({4, d}, -0.1, 0.1, rng, true);
}

void Model::rebuild_parameter_list() {
  params_.clear();
  auto push = [this](const std::string& name, const Tensor& t) {
    for (const auto& p : params_) {
      if (p.name == name) throw std::logic_error("duplicate parameter name: " + name);
    }
    params_.push_back(Parameter{name, t});
  };
  push("token_embeddings", token_embeddings_);
  push("visual_projection.weight", visual_projection_.weight);
  push("visual_projection.bias", visual_projection_.bias);
  auto push_linear = [&push](const std::string& prefix, const LinearLayer& l) {
    push(prefix + ".weight", l.weight);
    push(prefix + ".bias", l.bias);
  };
  auto push_norm = [&push](const std::string& prefix, const LayerNormParams& n) {
    push(prefix + ".gain", n.gain);
    push(prefix + ".bias", n.bias);
  };
  auto push_attention = [&push_linear](const std::string& prefix, const AttentionParams& a) {
    push_linear(prefix + ".query", a.query);
    push_linear(prefix + ".key", a.key);
    push_linear(prefix + ".value", a.value);
    push_linear(prefix + ".output", a.output);
  };
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    const std::string prefix = "encoder." + std::to_string(i);
    push_norm(prefix + ".ln_attn", encoder_[i].ln_attn);
    push_attention(prefix + ".attn", encoder_[i].attn);
    push_norm(prefix + ".ln_ffn", encoder_[i].ln_ffn);
    push_linear(prefix + ".ffn_in", encoder_[i].ffn_in);
    push_linear(prefix + ".ffn_out", encoder_[i].ffn_out);
  }
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    const std::string prefix = "decoder." + std::to_string(i);
    push_norm(prefix + ".ln_self", decoder_[i].ln_self);
    push_attention(prefix + ".self_attn", decoder_[i].self_attn);
    push_norm(prefix + ".ln_cross", decoder_[i].ln_cross);
    push_attention(prefix + ".cross_attn", decoder_[i].cross_attn);
    push_norm(prefix + ".ln_ffn", decoder_[i].ln_ffn);
    push_linear(prefix + ".ffn_in", decoder_[i].ffn_in);
    push_linear(prefix + ".ffn_out", decoder_[i].ffn_out);
  }
  if (mode_ != AblationMode::no_cross) {
    push("fusion.image.query", image_branch_.query);
    push("fusion.image.key", image_branch_.key);
    push("fusion.image.value", image_branch_.value);
    push("fusion.text.query", text_branch_.query);
    push("fusion.text.key", text_branch_.key);
    push("fusion.text.value", text_branch_.value);
  }
  push("sentiment_embeddings", sentiment_embeddings_);
}

std::size_t Model::parameter_value_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

AssembledInput Model::assemble_input(const MultimodalExample& example) const {
  const int d = config_.hidden_dim;
  const int l_i = static_cast<int>(example.image_features.size());
  const int l_t = static_cast<int>(example.text_tokens.size());
  const int l_li = static_cast<int>(example.image_rationale_tokens.size());
  const int l_lt = static_cast<int>(example.text_rationale_tokens.size());
  if (l_t < 1) throw std::invalid_argument("example " + example.id + ": empty text");
  if (l_i < 1) throw std::invalid_argument("example " + example.id + ": no image features");
  if (l_li < 1 || l_lt < 1) {
    throw std::invalid_argument("example " + example.id + ": rationale segments must be nonempty");
  }
  if (l_i > config_.max_image_rows || l_t > config_.max_text_len ||
      l_li > config_.max_rationale_len || l_lt > config_.max_rationale_len) {
    throw std::length_error("example " + example.id + ": segment exceeds configured maximum");
  }
  for (const auto& t : example.gold) {
    if (!triple_valid(t, l_t)) {
      throw std::invalid_argument("example " + example.id + ": gold triple out of range");
    }
  }
  std::vector<double> visual_flat;
  visual_flat.reserve(static_cast<std::size_t>(l_i) * config_.visual_dim);
  for (const auto& row : example.image_features) {
    if (static_cast<int>(row.size()) != config_.visual_dim) {
      throw std::invalid_argument("example " + example.id + ": visual feature width mismatch");
    }
    visual_flat.insert(visual_flat.end(), row.begin(), row.end());
  }

  const Tensor text_embeddings = embedding_rows(token_embeddings_, example.text_tokens);
  const Tensor image_rows =
      visual_projection_.apply(Tensor::from({l_i, config_.visual_dim}, std::move(visual_flat)));
  const Tensor li_rows = embedding_rows(token_embeddings_, example.image_rationale_tokens);
  const Tensor lt_rows = embedding_rows(token_embeddings_, example.text_rationale_tokens);

  auto marker = [this](int id) {
    const int ids[] = {id};
    return embedding_rows(token_embeddings_, ids);
  };
  const Tensor parts[] = {
      marker(vocab_.img), image_rows, marker(vocab_.img_end),
      marker(vocab_.bos), text_embeddings, marker(vocab_.eos),
      marker(vocab_.bor), li_rows, marker(vocab_.eor),
      marker(vocab_.bor), lt_rows, marker(vocab_.eor),
  };
  Tensor x = concat_rows(parts);
  x = add(x, sinusoidal_positions(x.rows(), d));

  SegmentLayout layout;
  int cursor = 0;
  auto mark = [&cursor](int content) {
    Segment s{cursor, cursor + content + 2};
    cursor = s.end;
    return s;
  };
  layout.image = mark(l_i);
  layout.text = mark(l_t);
  layout.image_rationale = mark(l_li);
  layout.text_rationale = mark(l_lt);
  layout.total = cursor;
  return AssembledInput{x, layout, text_embeddings};
}

EncoderOutput Model::encode(const Tensor& x, const SegmentLayout& layout) const {
  if (x.rows() != layout.total) {
    throw std::invalid_argument("encode: input rows do not match layout");
  }
  Tensor h = x;
  for (const auto& block : encoder_) {
    const Tensor normed = block.ln_attn.apply(h);
    h = add(h, multi_head_attention(block.attn, normed, normed, config_.heads, false));
    h = add(h, feed_forward(block.ffn_in, block.ffn_out, block.ln_ffn.apply(h)));
  }
  return EncoderOutput{h, layout, Tensor{}};
}

std::array<Tensor, 4> Model::slice_segments(const EncoderOutput& out) {
  const auto& l = out.layout;
  return {
      slice_rows(out.hidden, l.image.begin, l.image.end),
      slice_rows(out.hidden, l.text.begin, l.text.end),
      slice_rows(out.hidden, l.image_rationale.begin, l.image_rationale.end),
      slice_rows(out.hidden, l.text_rationale.begin, l.text_rationale.end),
  };
}

Tensor Model::decode(const Tensor& memory, const Tensor& y_prev_embeddings) const {
  if (!y_prev_embeddings.defined() || y_prev_embeddings.rows() < 1) {
    throw std::invalid_argument("decode: target prefix must contain at least one row");
  }
  Tensor h = y_prev_embeddings;
  for (const auto& block : decoder_) {
    const Tensor normed = block.ln_self.apply(h);
    h = add(h, multi_head_attention(block.self_attn, normed, normed, config_.heads, true));
    h = add(h, multi_head_attention(block.cross_attn, block.ln_cross.apply(h), memory,
                                    config_.heads, false));
    h = add(h, feed_forward(block.ffn_in, block.ffn_out, block.ln_ffn.apply(h)));
  }
  return h;
}

Tensor Model::decode_with_positions(const Tensor& memory, const Tensor& y_embeddings) const {
  return decode(memory, add(y_embeddings, sinusoidal_positions(y_embeddings.rows(),
                                                               y_embeddings.cols())));
}

ForwardState Model::forward(const MultimodalExample& example) const {
  const AssembledInput assembled = assemble_input(example);
  EncoderOutput encoded = encode(assembled.x, assembled.layout);
  encoded.text_embeddings = assembled.text_embeddings;
  const auto slices = slice_segments(encoded);

  std::array<Tensor, 4> combined;
  switch (mode_) {
    case AblationMode::full:
    case AblationMode::no_concat: {
      const DualFuseOut fused =
          dual_fuse(slices[0], slices[1], slices[2], slices[3], image_branch_, text_branch_);
      combined = residual_combine({fused.image, fused.text, fused.image_rationale,
                                   fused.text_rationale},
                                  slices);
      break;
    }
    case AblationMode::no_dual: {
      const DualFuseOut fused = unilateral_fuse(slices[0], slices[1], slices[2], slices[3],
                                                image_branch_, text_branch_);
      // Rationale rows stay bit-identical to the encoder slices.
      combined = {add(fused.image, slices[0]), add(fused.text, slices[1]), slices[2], slices[3]};
      break;
    }
    case AblationMode::no_cross:
      combined = slices;
      break;
  }

  FusedMemory memory;
  if (mode_ == AblationMode::no_concat) {
    const Tensor parts[] = {combined[0], combined[1]};
    memory = build_memory(parts);
  } else {
    memory = build_memory(combined[0], combined[1], combined[2], combined[3]);
  }

  const int l_t = static_cast<int>(example.text_tokens.size());
  const Tensor text_content = slice_rows(combined[1], 1, 1 + l_t);
  const Tensor candidate =
      candidate_matrix(text_content, assembled.text_embeddings, sentiment_embeddings_);
  return ForwardState{memory.memory, candidate, assembled.text_embeddings, l_t};
}

Tensor Model::embed_target_symbol(const ForwardState& state, int symbol) const {
  if (symbol == kStartSymbol) {
    const int ids[] = {vocab_.bos};
    return embedding_rows(token_embeddings_, ids);
  }
  if (symbol < 0 || symbol >= state.text_len + kClassSymbols) {
    throw std::out_of_range("target symbol outside the candidate index space");
  }
  if (symbol < state.text_len) {
    return slice_rows(state.text_embeddings, symbol, symbol + 1);
  }
  const int class_row = symbol - state.text_len;
  return slice_rows(sentiment_embeddings_, class_row, class_row + 1);
}

Tensor Model::loss(const MultimodalExample& example) const {
  const TargetSequence target =
      encode_triples(example.gold, static_cast<int>(example.text_tokens.size()));
  return loss(example, target);
}

Tensor Model::loss(const MultimodalExample& example, const TargetSequence& target) const {
  if (target.text_len != static_cast<int>(example.text_tokens.size())) {
    throw std::invalid_argument("target sequence text length mismatch");
  }
  const ForwardState state = forward(example);
  const auto decode_fn = [this](const Tensor& memory, const Tensor& y) {
    return decode_with_positions(memory, y);
  };
  const auto embed_fn = [this, &state](int symbol) { return embed_target_symbol(state, symbol); };
  return sequence_loss(decode_fn, state.memory, state.candidate, target.indices, embed_fn);
}

std::vector<int> Model::generate(const MultimodalExample& example, int max_len) const {
  const ForwardState state = forward(example);
  const auto decode_fn = [this](const Tensor& memory, const Tensor& y) {
    return decode_with_positions(memory, y);
  };
  const auto embed_fn = [this, &state](int symbol) { return embed_target_symbol(state, symbol); };
  return generate_sequence(decode_fn, state.memory, state.candidate, embed_fn, max_len,
                           eos_index(state.text_len));
}

Model Model::with_ablation(AblationMode mode) const {
  Model copy = *this;
  copy.mode_ = mode;
  copy.rebuild_parameter_list();
  return copy;
}

namespace {

constexpr const char* kCheckpointMagic = "mabsa-checkpoint";
constexpr int kCheckpointVersion = 1;

void write_values(std::ostream& os, std::span<const double> values) {
  char buf[40];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%a", values[i]);
    if (i) os << ' ';
    os << buf;
  }
  os << '\n';
}

double read_hex_double(std::istream& is) {
  std::string token;
  if (!(is >> token)) throw std::runtime_error("checkpoint: truncated value stream");
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') {
    throw std::runtime_error("checkpoint: malformed float value '" + token + "'");
  }
  return v;
}

}  // namespace

void Model::save_checkpoint(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  os << kCheckpointMagic << " v" << kCheckpointVersion << '\n';
  os << "ablation " << to_string(mode_) << '\n';
  os << "config " << config_.hidden_dim << ' ' << config_.visual_dim << ' '
     << config_.encoder_layers << ' ' << config_.decoder_layers << ' ' << config_.heads << ' '
     << config_.ffn_dim << ' ' << config_.max_image_rows << ' ' << config_.max_text_len << ' '
     << config_.max_rationale_len << ' ' << config_.sentiment_classes << ' ' << config_.seed
     << '\n';
  os << "vocab " << vocab_.size() << '\n';
  for (const auto& token : vocab_.tokens) os << token << '\n';
  os << "params " << params_.size() << '\n';
  for (const auto& p : params_) {
    os << p.name;
    const auto& shape = p.tensor.shape();
    os << ' ' << shape.size();
    for (int dim : shape) os << ' ' << dim;
    os << '\n';
    write_values(os, p.tensor.values());
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path.string());
}

namespace {

struct CheckpointData {
  ModelConfig config;
  AblationMode mode;
  std::vector<std::string> vocab_tokens;
  std::vector<std::pair<std::string, std::vector<double>>> params;
  std::vector<std::vector<int>> shapes;
};

CheckpointData parse_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path.string());
  std::string word, version;
  is >> word >> version;
  if (word != kCheckpointMagic || version != "v" + std::to_string(kCheckpointVersion)) {
    throw std::runtime_error("unrecognized checkpoint header in " + path.string());
  }
  CheckpointData data;
  std::string key;
  is >> key;
  if (key != "ablation") throw std::runtime_error("checkpoint: expected ablation line");
  std::string mode_name;
  is >> mode_name;
  data.mode = ablation_from_string(mode_name);
  is >> key;
  if (key != "config") throw std::runtime_error("checkpoint: expected config line");
  auto& c = data.config;
  is >> c.hidden_dim >> c.visual_dim >> c.encoder_layers >> c.decoder_layers >> c.heads >>
      c.ffn_dim >> c.max_image_rows >> c.max_text_len >> c.max_rationale_len >>
      c.sentiment_classes >> c.seed;
  is >> key;
  if (key != "vocab") throw std::runtime_error("checkpoint: expected vocab line");
  int vocab_size = 0;
  is >> vocab_size;
  data.vocab_tokens.reserve(vocab_size);
  for (int i = 0; i < vocab_size; ++i) {
    std::string token;
    if (!(is >> token)) throw std::runtime_error("checkpoint: truncated vocabulary");
    data.vocab_tokens.push_back(token);
  }
  is >> key;
  if (key != "params") throw std::runtime_error("checkpoint: expected params line");
  std::size_t param_count = 0;
  is >> param_count;
  for (std::size_t i = 0; i < param_count; ++i) {
    std::string name;
    std::size_t rank = 0;
    if (!(is >> name >> rank)) throw std::runtime_error("checkpoint: truncated parameter table");
    std::vector<int> shape(rank);
    std::size_t count = 1;
    for (auto& dim : shape) {
      is >> dim;
      count *= static_cast<std::size_t>(dim);
    }
    std::vector<double> values(count);
    for (auto& v : values) v = read_hex_double(is);
    data.params.emplace_back(std::move(name), std::move(values));
    data.shapes.push_back(std::move(shape));
  }
  return data;
}

}  // namespace

Model Model::load_checkpoint(const std::filesystem::path& path) {
  const CheckpointData data = parse_checkpoint(path);
  Vocabulary vocab;
  for (const auto& token : data.vocab_tokens) {
    vocab.index.try_emplace(token, static_cast<int>(vocab.tokens.size()));
    vocab.tokens.push_back(token);
  }
  bind_specials(vocab);
  Model model(data.config, std::move(vocab), data.mode);
  model.load_parameters(path);
  return model;
}

void Model::load_parameters(const std::filesystem::path& path) {
  const CheckpointData data = parse_checkpoint(path);
  if (data.config != config_) {
    throw std::runtime_error("checkpoint config does not match model config");
  }
  if (data.mode != mode_) {
    throw std::runtime_error("checkpoint ablation mode does not match model");
  }
  if (data.vocab_tokens != vocab_.tokens) {
    throw std::runtime_error("checkpoint vocabulary does not match model");
  }
  if (data.params.size() != params_.size()) {
    throw std::runtime_error("checkpoint parameter count does not match model");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& [name, values] = data.params[i];
    if (name != params_[i].name || data.shapes[i] != params_[i].tensor.shape()) {
      throw std::runtime_error("checkpoint parameter mismatch at " + params_[i].name);
    }
    auto dst = params_[i].tensor.values_mut();
    std::copy(values.begin(), values.end(), dst.begin());
  }
}

}  // namespace mabsa
