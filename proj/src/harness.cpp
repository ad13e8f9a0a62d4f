#include "mabsa/harness.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "mabsa/synthetic.hpp"

namespace mabsa {

void validate(const RunConfig& config) {
  validate(config.model);
  if (config.learning_rate <= 0.0) throw std::invalid_argument("learning rate must be positive");
  if (config.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (config.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (config.length_multiplier <= 0.0) {
    throw std::invalid_argument("length multiplier must be positive");
  }
  if (config.max_generate_len < 1) throw std::invalid_argument("max_generate_len must be >= 1");
}

MultimodalExample encode_record(const CorpusRecord& record, const Vocabulary& vocab) {
  MultimodalExample ex;
  ex.id = record.id;
  ex.text_tokens = vocab.ids_of(record.text);
  ex.image_features = record.image_features;
  ex.image_rationale_tokens = vocab.ids_of(record.image_rationale);
  ex.text_rationale_tokens = vocab.ids_of(record.text_rationale);
  ex.gold = record.gold;
  return ex;
}

EncodedCorpus load_and_encode(const std::filesystem::path& corpus_dir) {
  const auto train_records = read_corpus_file(corpus_dir / "train.jsonl");
  const auto dev_records = read_corpus_file(corpus_dir / "dev.jsonl");
  const auto test_records = read_corpus_file(corpus_dir / "test.jsonl");
  if (train_records.empty()) {
    throw std::runtime_error("training split is empty: " + (corpus_dir / "train.jsonl").string());
  }
  // Vocabulary comes from the training split only; other splits map unseen
  // tokens to <unk>.
  std::vector<std::vector<std::string>> streams;
  for (const auto& r : train_records) {
    streams.push_back(r.text);
    streams.push_back(r.image_rationale);
    streams.push_back(r.text_rationale);
  }
  EncodedCorpus corpus;
  corpus.vocab = Vocabulary::build(streams);
  for (const auto& r : train_records) corpus.train.push_back(encode_record(r, corpus.vocab));
  for (const auto& r : dev_records) corpus.dev.push_back(encode_record(r, corpus.vocab));
  for (const auto& r : test_records) corpus.test.push_back(encode_record(r, corpus.vocab));
  return corpus;
}

namespace {

std::vector<ExampleTriples> gold_triples(std::span<const MultimodalExample> examples) {
  std::vector<ExampleTriples> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back({ex.id, canonicalize(ex.gold)});
  return out;
}

std::vector<ExampleTriples> predict_triples(const Model& model,
                                            std::span<const MultimodalExample> examples,
                                            int max_generate_len) {
  std::vector<ExampleTriples> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    const auto indices = model.generate(ex, max_generate_len);
    const auto decoded = decode_indices(indices, static_cast<int>(ex.text_tokens.size()));
    out.push_back({ex.id, decoded.triples});
  }
  return out;
}

double dataset_f1(const Model& model, std::span<const MultimodalExample> examples,
                  int max_generate_len) {
  if (examples.empty()) return 0.0;
  const auto gold = gold_triples(examples);
  const auto pred = predict_triples(model, examples, max_generate_len);
  return mabsa_score(gold, pred).f1;
}

}  // namespace

EvalResult evaluate(const Model& model, std::span<const MultimodalExample> examples,
                    int max_generate_len, bool oracle_mode) {
  const auto gold = gold_triples(examples);
  const auto pred =
      oracle_mode ? gold : predict_triples(model, examples, max_generate_len);
  EvalResult result;
  result.mabsa = mabsa_score(gold, pred);
  result.mate = mate_score(gold, pred);
  result.masc = masc_score(gold, pred);
  if (result.mate.f1 + 1e-12 < result.mabsa.f1) {
    throw std::logic_error("span-level F1 fell below triple-level F1");
  }
  return result;
}

std::string to_report_text(const EvalResult& result) {
  std::string text = to_kv_text(result.mabsa);
  text += '\n';
  text += to_kv_text(result.mate);
  text += '\n';
  text += to_kv_text(result.masc);
  return text;
}

TrainResult train(const RunConfig& config) {
  validate(config);
  EncodedCorpus corpus = load_and_encode(config.corpus_dir);
  ModelConfig model_config = config.model;
  model_config.seed = config.seed;
  Model model(model_config, corpus.vocab, config.ablation);

  std::filesystem::create_directories(config.checkpoint_dir);
  const auto best_path = config.checkpoint_dir / "best.ckpt";
  const auto log_path = config.checkpoint_dir / "train_log.txt";
  std::ofstream log(log_path);
  if (!log) throw std::runtime_error("cannot open training log: " + log_path.string());

  TrainResult result;
  result.best_checkpoint = best_path;
  model.save_checkpoint(best_path);
  result.best_dev_f1 =
      corpus.dev.empty() ? 0.0 : dataset_f1(model, corpus.dev, config.max_generate_len);

  AdamState optimizer;
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(corpus.train.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<TargetSequence> targets;
  targets.reserve(corpus.train.size());
  for (const auto& ex : corpus.train) {
    targets.push_back(encode_triples(ex.gold, static_cast<int>(ex.text_tokens.size())));
  }

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<Tensor> losses;
      losses.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        losses.push_back(model.loss(corpus.train[order[i]], targets[order[i]]));
      }
      Tensor batch_loss = mean_of(losses);
      const double loss_value = batch_loss.item();
      if (!std::isfinite(loss_value)) {
        throw std::runtime_error("training diverged: non-finite loss in epoch " +
                                 std::to_string(epoch));
      }
      backward(batch_loss);
      adam_step(model.parameters(), config.learning_rate, optimizer);
      epoch_loss += loss_value;
      ++batches;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = batches ? epoch_loss / static_cast<double>(batches) : 0.0;
    entry.dev_f1 =
        corpus.dev.empty() ? 0.0 : dataset_f1(model, corpus.dev, config.max_generate_len);
    if (entry.dev_f1 >= result.best_dev_f1) {
      result.best_dev_f1 = entry.dev_f1;
      model.save_checkpoint(best_path);
      entry.is_best = true;
    }
    if (config.stop_train_f1 > 0.0) {
      entry.train_f1 = dataset_f1(model, corpus.train, config.max_generate_len);
    }
    result.log.push_back(entry);
    result.epochs_run = epoch;

    std::ostringstream line;
    line.setf(std::ios::fixed);
    line.precision(6);
    line << "epoch " << entry.epoch << " loss " << entry.train_loss << " dev_f1 " << entry.dev_f1;
    if (entry.train_f1 >= 0.0) line << " train_f1 " << entry.train_f1;
    if (entry.is_best) line << " *";
    log << line.str() << '\n';
    log.flush();

    if (config.stop_train_f1 > 0.0 && entry.train_f1 >= config.stop_train_f1) {
      // Overfit target met; persist the final state as the checkpoint of record.
      model.save_checkpoint(best_path);
      break;
    }
  }
  return result;
}

EvalResult evaluate_checkpoint(const std::filesystem::path& checkpoint,
                               const std::filesystem::path& corpus_dir, const std::string& split,
                               const std::filesystem::path& report_path, int max_generate_len,
                               bool oracle_mode) {
  Model model = Model::load_checkpoint(checkpoint);
  EncodedCorpus corpus = load_and_encode(corpus_dir);
  if (corpus.vocab.tokens != model.vocab().tokens) {
    throw std::runtime_error("corpus vocabulary does not match checkpoint vocabulary");
  }
  std::span<const MultimodalExample> examples;
  if (split == "train") {
    examples = corpus.train;
  } else if (split == "dev") {
    examples = corpus.dev;
  } else if (split == "test") {
    examples = corpus.test;
  } else {
    throw std::invalid_argument("unknown split: " + split);
  }
  const EvalResult result = evaluate(model, examples, max_generate_len, oracle_mode);
  if (!report_path.empty()) {
    std::filesystem::create_directories(report_path.parent_path());
    std::ofstream os(report_path);
    if (!os) throw std::runtime_error("cannot write report: " + report_path.string());
    os << to_report_text(result);
    if (!os) throw std::runtime_error("report write failed: " + report_path.string());
  }
  return result;
}

Model apply_ablation(AblationMode mode, const Model& model) { return model.with_ablation(mode); }

std::vector<AblationRow> run_ablation_suite(const RunConfig& config) {
  const AblationMode modes[] = {AblationMode::full, AblationMode::no_dual, AblationMode::no_cross,
                                AblationMode::no_concat};
  std::vector<AblationRow> rows;
  for (AblationMode mode : modes) {
    RunConfig variant = config;
    variant.ablation = mode;
    variant.checkpoint_dir = config.checkpoint_dir / to_string(mode);
    const TrainResult trained = train(variant);
    Model model = Model::load_checkpoint(trained.best_checkpoint);
    EncodedCorpus corpus = load_and_encode(config.corpus_dir);
    AblationRow row;
    row.mode = mode;
    row.parameter_count = model.parameter_value_count();
    row.dev_f1 = evaluate(model, corpus.dev, config.max_generate_len).mabsa.f1;
    row.test_f1 = evaluate(model, corpus.test, config.max_generate_len).mabsa.f1;
    rows.push_back(row);
  }
  // Structural accounting: dropping the fusion module must shrink the model.
  const auto full_params = rows[0].parameter_count;
  if (rows[2].parameter_count >= full_params || rows[3].parameter_count != full_params) {
    throw std::logic_error("ablation parameter accounting is inconsistent");
  }
  return rows;
}

std::string to_table_text(std::span<const AblationRow> rows) {
  std::ostringstream os;
  os << "mode parameters dev_f1 test_f1\n";
  os << std::setprecision(17);
  for (const auto& row : rows) {
    os << to_string(row.mode) << ' ' << row.parameter_count << ' ' << row.dev_f1 << ' '
       << row.test_f1 << '\n';
  }
  return os.str();
}

}  // namespace mabsa
