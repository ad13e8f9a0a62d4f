#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mabsa/corpus.hpp"
#include "mabsa/metrics.hpp"
#include "mabsa/model.hpp"
#include "mabsa/rationale.hpp"

namespace mabsa {

struct RunConfig {
  ModelConfig model;
  double learning_rate = 7e-5;
  int batch_size = 16;
  int epochs = 35;
  AblationMode ablation = AblationMode::full;
  PromptKind prompt_kind = PromptKind::task_hinted;
  double length_multiplier = 2.0;
  std::uint64_t seed = 7;
  int max_generate_len = 16;
  double stop_train_f1 = 0.0;  // when > 0, stop once train MABSA F1 reaches it
  std::filesystem::path corpus_dir;
  std::filesystem::path checkpoint_dir;
  std::filesystem::path report_dir;
};

void validate(const RunConfig& config);

/// Corpus splits mapped onto a train-built vocabulary.
struct EncodedCorpus {
  Vocabulary vocab;
  std::vector<MultimodalExample> train, dev, test;
};

MultimodalExample encode_record(const CorpusRecord& record, const Vocabulary& vocab);
EncodedCorpus load_and_encode(const std::filesystem::path& corpus_dir);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_f1 = 0.0;
  double train_f1 = -1.0;  // filled when stop_train_f1 is active
  bool is_best = false;
};

struct TrainResult {
  std::filesystem::path best_checkpoint;
  std::vector<EpochLog> log;
  double best_dev_f1 = 0.0;
  int epochs_run = 0;
};

/// Seeded mini-batch teacher-forced training; keeps the best-dev checkpoint.
TrainResult train(const RunConfig& config);

struct EvalResult {
  EvalReport mabsa;
  EvalReport mate;
  EvalReport masc;
};

/// Greedy generation + codec decode + metrics. With oracle_mode the gold
/// triples are scored against themselves to check the wiring.
EvalResult evaluate(const Model& model, std::span<const MultimodalExample> examples,
                    int max_generate_len, bool oracle_mode = false);

std::string to_report_text(const EvalResult& result);

EvalResult evaluate_checkpoint(const std::filesystem::path& checkpoint,
                               const std::filesystem::path& corpus_dir, const std::string& split,
                               const std::filesystem::path& report_path, int max_generate_len,
                               bool oracle_mode = false);

/// Returns the model viewed under the given ablation mode (shared weights).
Model apply_ablation(AblationMode mode, const Model& model);

struct AblationRow {
  AblationMode mode = AblationMode::full;
  std::size_t parameter_count = 0;
  double dev_f1 = 0.0;
  double test_f1 = 0.0;
};

std::vector<AblationRow> run_ablation_suite(const RunConfig& config);
std::string to_table_text(std::span<const AblationRow> rows);

/// CLI entry point; argv-style arguments including the program name.
/// Returns 0 on success, 2 on usage errors, 1 otherwise.
int run_cli(const std::vector<std::string>& args);

}  // namespace mabsa
