#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "bdl/config.hpp"
#include "bdl/error.hpp"

namespace bdl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitGradcheck = 3;

int exit_code_for(ErrorKind kind);

/// Stage names recorded in checkpoint metadata.
inline constexpr std::string_view kStagePreliminary = "preliminary";
inline constexpr std::string_view kStageAnnealed = "annealed";

void cmd_gen_data(const RunConfig& cfg, const std::filesystem::path& out);

struct TrainResult {
  std::vector<EpochLog> log;
  std::string config_hash;
};

/// Preliminary training from a fresh seeded net. Writes the checkpoint and the
/// per-epoch CSV log only after training succeeds.
TrainResult cmd_train(const RunConfig& cfg, const std::filesystem::path& dataset,
                      const std::filesystem::path& out_checkpoint, const std::filesystem::path& out_log);

/// Annealing from a preliminary checkpoint; the output is marked annealed.
std::vector<AnnealLogRow> cmd_anneal(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                                     const std::filesystem::path& dataset,
                                     const std::filesystem::path& out_checkpoint,
                                     const std::filesystem::path& out_log);

/// Metrics on the held-out clusters; also written as CSV when `out` is set.
std::vector<MetricRow> cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                                const std::filesystem::path& dataset,
                                const std::optional<std::filesystem::path>& out);

struct GradcheckComponent {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checks = 0;
  bool passed = false;
};

struct GradcheckReport {
  double tolerance = 1e-5;
  std::vector<GradcheckComponent> components;

  bool passed() const;
};

struct GradcheckOptions {
  std::size_t batches = 20;
  std::size_t batch_size = 16;
  std::size_t dim = 8;
  double step = 1e-5;
  double tolerance = 1e-5;
  /// Test hook: perturbs one analytic gradient entry so the check must fail.
  bool inject_fault = false;
};

/// Central finite differences against every analytic gradient path: balance
/// loss, weighted balance loss, the normalization Jacobian and the full
/// loss -> embedding -> parameter chain.
GradcheckReport cmd_gradcheck(const RunConfig& cfg, const GradcheckOptions& options = {});

void write_gradcheck_report(std::ostream& out, const GradcheckReport& report);

/// Per-triplet distance, confidence and weight rows over seeded batches.
/// Returns the number of rows written.
std::size_t cmd_dump_distributions(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                                   const std::filesystem::path& dataset, const std::filesystem::path& out);

}  // namespace bdl
