#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "groundhog/commands.h"
#include "groundhog/errors.h"
#include "groundhog/logging.h"
#include "json.hpp"

namespace {

namespace gh = groundhog;
using nlohmann::json;

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

std::vector<std::string> split_metrics(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    const std::size_t end = comma == std::string::npos ? s.size() : comma;
    if (end > start) out.push_back(s.substr(start, end - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  gh::configure_logging();

  CLI::App app{"groundhog: grounded mask retrieval with a toy multimodal LM"};
  app.require_subcommand(1);

  gh::GenDataOptions gen;
  std::optional<std::string> gen_config;
  std::optional<std::uint64_t> gen_seed;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic conversation corpus (JSONL)");
  gen_cmd->add_option("--config", gen_config, "Run config JSON (its \"data\" section is used)");
  gen_cmd->add_option("--out", gen_out, "Output JSONL path")->required();
  gen_cmd->add_option("--seed", gen_seed, "Seed (overrides the config)");
  gen_cmd->add_option("--n", gen.n, "Number of conversations")->check(CLI::PositiveNumber);

  std::vector<std::string> train_corpus;
  std::optional<std::string> train_config, train_resume;
  std::optional<std::uint64_t> train_seed;
  std::optional<int> train_epochs, train_threads;
  std::string train_out;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint directory");
  train_cmd->add_option("--corpus", train_corpus, "Corpus JSONL file(s)");
  train_cmd->add_option("--config", train_config, "Run config JSON");
  train_cmd->add_option("--out-ckpt", train_out, "Checkpoint directory")->required();
  train_cmd->add_option("--resume", train_resume, "Continue from this checkpoint directory");
  train_cmd->add_option("--seed", train_seed, "Seed (overrides the config)");
  train_cmd->add_option("--epochs", train_epochs, "Epochs (overrides the config)")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--threads", train_threads, "Gradient worker threads (0 = auto)")
      ->check(CLI::NonNegativeNumber);

  gh::EvalOptions ev;
  std::string ev_ckpt, ev_corpus, ev_metrics{gh::kAllMetrics};
  std::optional<std::string> ev_pred_in, ev_pred_out;
  auto* eval_cmd = app.add_subcommand("eval", "Decode a corpus and report metrics");
  eval_cmd->add_option("--ckpt", ev_ckpt, "Checkpoint directory");
  eval_cmd->add_option("--corpus", ev_corpus, "Ground-truth corpus JSONL")->required();
  eval_cmd->add_option("--metrics", ev_metrics, "Comma-separated metric names")
      ->capture_default_str();
  eval_cmd->add_option("--predictions-in", ev_pred_in, "Score this prediction JSONL instead of decoding");
  eval_cmd->add_option("--predictions-out", ev_pred_out, "Write decoded predictions (JSONL)");
  eval_cmd->add_option("--max-new-tokens", ev.decode.max_new_tokens, "Decoding budget")
      ->check(CLI::PositiveNumber);

  gh::GroundOptions gr;
  std::string gr_ckpt, gr_scene;
  auto* ground_cmd = app.add_subcommand("ground", "Answer one prompt about a scene");
  ground_cmd->add_option("--ckpt", gr_ckpt, "Checkpoint directory")->required();
  ground_cmd->add_option("--scene", gr_scene, "Scene JSON")->required();
  ground_cmd->add_option("--text", gr.text, "User prompt")->required();
  ground_cmd->add_option("--max-new-tokens", gr.decode.max_new_tokens, "Decoding budget")
      ->check(CLI::PositiveNumber);

  gh::DiagnoseOptions dg;
  std::string dg_ckpt, dg_scene;
  std::optional<std::string> dg_ppm;
  auto* diag_cmd = app.add_subcommand("diagnose", "Dump per-proposal scores for each grounded phrase");
  diag_cmd->add_option("--ckpt", dg_ckpt, "Checkpoint directory")->required();
  diag_cmd->add_option("--scene", dg_scene, "Scene JSON")->required();
  diag_cmd->add_option("--text", dg.text, "User prompt")->required();
  diag_cmd->add_option("--topk", dg.topk, "Proposals listed per phrase")->capture_default_str();
  diag_cmd->add_option("--ppm-dir", dg_ppm, "Write P6 renderings here");
  diag_cmd->add_option("--max-new-tokens", dg.decode.max_new_tokens, "Decoding budget")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*gen_cmd) {
      if (gen_config) gen.config = *gen_config;
      gen.out = gen_out;
      gen.seed = gen_seed;
      print(gh::cmd_gen_data(gen));
    } else if (*train_cmd) {
      gh::TrainCmdOptions t;
      for (const auto& c : train_corpus) t.corpus.emplace_back(c);
      if (train_config) t.config = *train_config;
      if (train_resume) t.resume = *train_resume;
      t.out_ckpt = train_out;
      t.seed = train_seed;
      t.epochs = train_epochs;
      t.threads = train_threads;
      const gh::TrainSummary s = gh::cmd_train(t);
      print({{"checkpoint", train_out},
             {"steps", s.steps},
             {"epochs", s.epochs},
             {"first", s.first},
             {"last", s.last}});
    } else if (*eval_cmd) {
      if (ev_ckpt.empty() && !ev_pred_in)
        throw gh::InvalidArgument("eval needs --ckpt or --predictions-in");
      ev.ckpt = ev_ckpt;
      ev.corpus = ev_corpus;
      ev.metrics = split_metrics(ev_metrics);
      if (ev_pred_in) ev.predictions_in = *ev_pred_in;
      if (ev_pred_out) ev.predictions_out = *ev_pred_out;
      print(gh::cmd_eval(ev));
    } else if (*ground_cmd) {
      gr.ckpt = gr_ckpt;
      gr.scene = gr_scene;
      print(gh::cmd_ground(gr));
    } else if (*diag_cmd) {
      dg.ckpt = dg_ckpt;
      dg.scene = dg_scene;
      if (dg_ppm) dg.ppm_dir = *dg_ppm;
      print(gh::cmd_diagnose(dg));
    }
  } catch (const gh::NumericError& e) {
    spdlog::error("{}", e.what());
    return kNumeric;
  } catch (const gh::InvalidArgument& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kData;
  }
  return kOk;
}
