#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/cfg/env.h>
#include <spdlog/spdlog.h>

#include "bdl/commands.hpp"

namespace {

using bdl::RunConfig;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> loss;
  bool no_unbiased = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "INI configuration file (defaults when omitted)");
  cmd->add_option("--seed", c.seed, "Overrides run.seed (and the data seed)");
  cmd->add_option("--loss", c.loss, "Loss kind")->check(CLI::IsMember({"triplet", "balance"}));
  cmd->add_flag("--no-unbiased", c.no_unbiased, "Disable confidence weighting (all W = 1)");
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config.empty() ? bdl::parse_run_config("") : bdl::load_run_config(c.config);
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.data.seed = *c.seed;
  }
  if (c.loss) cfg.training.loss = bdl::parse_loss_kind(*c.loss);
  if (c.no_unbiased) cfg.training.unbiased = false;
  cfg.validate();
  return cfg;
}

std::filesystem::path log_path(const std::string& explicit_log, const std::string& out) {
  return explicit_log.empty() ? std::filesystem::path(out + ".log.csv") : std::filesystem::path(explicit_log);
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::cfg::load_env_levels();
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Balance-loss descriptor training and evaluation"};
  app.require_subcommand(1);
  Common common;
  std::string out;
  std::string data;
  std::string checkpoint;
  std::string log;
  bool inject_fault = false;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic patch-cluster dataset");
  add_common(gen, common);
  gen->add_option("--out", out, "Dataset file to write")->required();

  auto* train = app.add_subcommand("train", "Preliminary hard-negative training");
  add_common(train, common);
  train->add_option("--data", data, "Dataset file")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out, "Checkpoint to write")->required();
  train->add_option("--log", log, "Per-epoch CSV log (default: <out>.log.csv)");

  auto* anneal = app.add_subcommand("anneal", "Annealing training from a preliminary checkpoint");
  add_common(anneal, common);
  anneal->add_option("--checkpoint", checkpoint, "Preliminary checkpoint")->required()->check(CLI::ExistingFile);
  anneal->add_option("--data", data, "Dataset file")->required()->check(CLI::ExistingFile);
  anneal->add_option("--out", out, "Checkpoint to write")->required();
  anneal->add_option("--log", log, "Per-iteration CSV log (default: <out>.log.csv)");

  auto* eval = app.add_subcommand("eval", "FPR@95 and mAP on the held-out clusters");
  add_common(eval, common);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data, "Dataset file")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", out, "Metric CSV (stdout when omitted)");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every gradient path");
  add_common(grad, common);
  grad->add_option("--out", out, "Report CSV (stdout when omitted)");
  grad->add_flag("--inject-fault", inject_fault, "Corrupt the analytic gradients (self-test)")->group("");

  auto* dump = app.add_subcommand("dump-distributions", "Per-triplet d_pos, d_neg, I and W for plotting");
  add_common(dump, common);
  dump->add_option("--checkpoint", checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  dump->add_option("--data", data, "Dataset file")->required()->check(CLI::ExistingFile);
  dump->add_option("--out", out, "CSV to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? bdl::kExitOk : bdl::kExitConfig;
  }

  try {
    const RunConfig cfg = resolve(common);
    if (*gen) {
      bdl::cmd_gen_data(cfg, out);
    } else if (*train) {
      bdl::cmd_train(cfg, data, out, log_path(log, out));
    } else if (*anneal) {
      bdl::cmd_anneal(cfg, checkpoint, data, out, log_path(log, out));
    } else if (*eval) {
      const auto target = out.empty() ? std::nullopt : std::optional<std::filesystem::path>(out);
      const auto rows = bdl::cmd_eval(cfg, checkpoint, data, target);
      if (!target) bdl::write_metric_csv(std::cout, rows);
    } else if (*grad) {
      bdl::GradcheckOptions opts;
      opts.inject_fault = inject_fault;
      const auto report = bdl::cmd_gradcheck(cfg, opts);
      bdl::write_gradcheck_report(std::cout, report);
      if (!out.empty()) {
        std::ofstream file(out);
        bdl::write_gradcheck_report(file, report);
      }
      return report.passed() ? bdl::kExitOk : bdl::kExitGradcheck;
    } else if (*dump) {
      const auto rows = bdl::cmd_dump_distributions(cfg, checkpoint, data, out);
      spdlog::info("wrote {} triplet rows to {}", rows, out);
    }
  } catch (const bdl::Error& e) {
    spdlog::error("{}", e.what());
    return bdl::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return bdl::kExitRuntime;
  }
  return bdl::kExitOk;
}
