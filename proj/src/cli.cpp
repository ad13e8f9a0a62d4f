#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mabsa/harness.hpp"
#include "mabsa/synthetic.hpp"

namespace mabsa {

namespace {

void add_model_options(CLI::App* cmd, RunConfig& config) {
  cmd->add_option("--d", config.model.hidden_dim, "hidden dimension");
  cmd->add_option("--dv", config.model.visual_dim, "visual input dimension");
  cmd->add_option("--encoder-layers", config.model.encoder_layers, "encoder layer count");
  cmd->add_option("--decoder-layers", config.model.decoder_layers, "decoder layer count");
  cmd->add_option("--heads", config.model.heads, "attention heads");
  cmd->add_option("--ffn", config.model.ffn_dim, "feed-forward dimension");
  cmd->add_option("--max-image-rows", config.model.max_image_rows, "max image feature rows");
  cmd->add_option("--max-text-len", config.model.max_text_len, "max text tokens");
  cmd->add_option("--max-rationale-len", config.model.max_rationale_len, "max rationale tokens");
}

void add_train_options(CLI::App* cmd, RunConfig& config, std::string& ablation) {
  cmd->add_option("--lr", config.learning_rate, "learning rate");
  cmd->add_option("--batch", config.batch_size, "batch size");
  cmd->add_option("--epochs", config.epochs, "training epochs");
  cmd->add_option("--ablation", ablation, "full|no_dual|no_cross|no_concat");
  cmd->add_option("--seed", config.seed, "random seed");
  cmd->add_option("--max-generate-len", config.max_generate_len, "generation cap");
  cmd->add_option("--stop-train-f1", config.stop_train_f1,
                  "stop early once train MABSA F1 reaches this value");
  cmd->set_config("--config", "", "flat key=value configuration file");
  add_model_options(cmd, config);
}

int run_parsed(CLI::App& app, const CLI::App* synth_gen, const CLI::App* prepare,
               const CLI::App* train_cmd, const CLI::App* eval_cmd, const CLI::App* ablate_cmd,
               RunConfig& config, const std::string& ablation_name,
               const SynthSpec& synth_spec, const std::filesystem::path& out_dir,
               const std::filesystem::path& in_path, const std::filesystem::path& cache_path,
               const std::string& prompt_kind_name, bool use_mock, double reference_override,
               int parallel, const std::filesystem::path& checkpoint_path,
               const std::string& split, bool oracle) {
  if (app.got_subcommand(synth_gen)) {
    const SynthCorpus corpus = generate_corpus(synth_spec);
    std::filesystem::create_directories(out_dir);
    write_corpus_file(out_dir / "train.jsonl", corpus.train);
    write_corpus_file(out_dir / "dev.jsonl", corpus.dev);
    write_corpus_file(out_dir / "test.jsonl", corpus.test);
    std::cout << "wrote " << corpus.train.size() << "/" << corpus.dev.size() << "/"
              << corpus.test.size() << " train/dev/test examples to " << out_dir.string() << '\n';
    return 0;
  }
  if (app.got_subcommand(prepare)) {
    const auto raw = read_corpus_file(in_path);
    const auto client = make_client_from_env(use_mock);
    PromptTemplate tmpl;
    tmpl.kind = prompt_kind_from_string(prompt_kind_name);
    RationaleCache cache(cache_path);
    GenerateOptions options;
    options.max_in_flight = parallel;
    const auto records = generate_rationales(raw, *client, tmpl, cache, options);
    LengthPolicy policy;
    policy.multiplier = config.length_multiplier;
    policy.reference = reference_override > 0.0 ? reference_override
                                                : rationale_reference_length(raw);
    const AttachResult attached = attach_rationales(raw, records, policy);
    std::filesystem::create_directories(out_dir);
    const auto out_file = out_dir / in_path.filename();
    write_corpus_file(out_file, attached.examples);
    std::cout << "attached " << attached.examples.size() << " of " << raw.size()
              << " examples to " << out_file.string();
    if (!attached.dropped_ids.empty()) {
      std::cout << " (dropped " << attached.dropped_ids.size() << " refused)";
    }
    std::cout << '\n';
    return 0;
  }
  if (app.got_subcommand(train_cmd)) {
    config.ablation = ablation_from_string(ablation_name);
    config.checkpoint_dir = out_dir;
    const TrainResult result = train(config);
    std::cout << "trained " << result.epochs_run << " epochs; best dev MABSA F1 "
              << result.best_dev_f1 << "; checkpoint " << result.best_checkpoint.string() << '\n';
    return 0;
  }
  if (app.got_subcommand(eval_cmd)) {
    const auto report_path = out_dir / ("report_" + split + ".txt");
    std::filesystem::create_directories(out_dir);
    const EvalResult result = evaluate_checkpoint(checkpoint_path, config.corpus_dir, split,
                                                  report_path, config.max_generate_len, oracle);
    std::cout << to_report_text(result);
    std::cout << "report written to " << report_path.string() << '\n';
    return 0;
  }
  if (app.got_subcommand(ablate_cmd)) {
    config.checkpoint_dir = out_dir;
    const auto rows = run_ablation_suite(config);
    const std::string table = to_table_text(rows);
    std::filesystem::create_directories(out_dir);
    std::ofstream os(out_dir / "ablation_table.txt");
    os << table;
    std::cout << table;
    return 0;
  }
  return 2;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"rationale-augmented multimodal aspect-based sentiment analysis"};
  app.require_subcommand(1);

  RunConfig config;
  std::string ablation_name = "full";
  SynthSpec synth_spec;
  std::filesystem::path out_dir = ".";
  std::filesystem::path in_path;
  std::filesystem::path cache_path = "rationale_cache.jsonl";
  std::string prompt_kind_name = "task_hinted";
  bool use_mock = false;
  double reference_override = 0.0;
  int parallel = 4;
  std::filesystem::path checkpoint_path;
  std::string split = "test";
  bool oracle = false;

  auto* synth_gen = app.add_subcommand("synth-gen", "generate a synthetic corpus");
  synth_gen->add_option("--out", out_dir, "output directory")->required();
  synth_gen->add_option("--seed", synth_spec.seed, "random seed");
  synth_gen->add_option("--num", synth_spec.num_examples, "total example count");
  synth_gen->add_option("--vocab", synth_spec.vocab_size, "synthetic vocabulary size");
  synth_gen->add_option("--min-len", synth_spec.min_text_len, "min text length");
  synth_gen->add_option("--max-len", synth_spec.max_text_len, "max text length");
  synth_gen->add_option("--max-aspects", synth_spec.max_aspects, "max aspects per example");
  synth_gen->add_option("--image-rows", synth_spec.image_rows, "visual feature rows");
  synth_gen->add_option("--dv", synth_spec.visual_dim, "visual feature dimension");

  auto* prepare = app.add_subcommand("prepare", "generate and attach LLM rationales");
  prepare->add_option("--corpus", in_path, "input corpus JSONL")->required();
  prepare->add_option("--out", out_dir, "output directory")->required();
  prepare->add_option("--cache", cache_path, "rationale cache JSONL");
  prepare->add_option("--prompt-kind", prompt_kind_name, "plain|task_hinted|detailed");
  prepare->add_flag("--mock", use_mock, "use the deterministic offline client");
  prepare->add_option("--multiplier", config.length_multiplier, "rationale length multiplier");
  prepare->add_option("--reference", reference_override,
                      "override the reference length (default: corpus average)");
  prepare->add_option("--parallel", parallel, "max in-flight client calls");

  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--corpus", config.corpus_dir, "corpus directory")->required();
  train_cmd->add_option("--out", out_dir, "checkpoint directory")->required();
  add_train_options(train_cmd, config, ablation_name);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  eval_cmd->add_option("--corpus", config.corpus_dir, "corpus directory")->required();
  eval_cmd->add_option("--split", split, "train|dev|test");
  eval_cmd->add_option("--out", out_dir, "report directory")->required();
  eval_cmd->add_option("--max-generate-len", config.max_generate_len, "generation cap");
  eval_cmd->add_flag("--oracle", oracle, "score gold against itself to check wiring");

  auto* ablate_cmd = app.add_subcommand("ablate", "train and compare the four ablation modes");
  ablate_cmd->add_option("--corpus", config.corpus_dir, "corpus directory")->required();
  ablate_cmd->add_option("--out", out_dir, "output directory")->required();
  add_train_options(ablate_cmd, config, ablation_name);

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  }

  try {
    return run_parsed(app, synth_gen, prepare, train_cmd, eval_cmd, ablate_cmd, config,
                      ablation_name, synth_spec, out_dir, in_path, cache_path, prompt_kind_name,
                      use_mock, reference_override, parallel, checkpoint_path, split, oracle);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace mabsa
