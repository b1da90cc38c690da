#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bdl/annealing.hpp"
#include "bdl/dataset.hpp"
#include "bdl/eval.hpp"
#include "bdl/model.hpp"
#include "bdl/training.hpp"

namespace bdl {

/// Everything a CLI run needs. Defaults are the desk-scale settings; the INI
/// file only has to name what it overrides.
struct RunConfig {
  std::uint64_t seed = 1;

  SyntheticConfig data;
  double holdout_fraction = 0.25;

  std::vector<std::size_t> hidden = {64, 64};
  std::size_t output_dim = 16;
  Activation activation = Activation::kTanh;

  TrainingSetup training;
  PreliminaryConfig preliminary;
  bool eval_each_epoch = true;

  AnnealConfig anneal;

  EvalOptions eval;

  std::size_t dump_batches = 4;
  std::size_t dump_batch_size = 64;

  std::vector<std::size_t> layer_sizes() const;

  /// Checks every field against its module's invariants.
  void validate() const;

  /// Fully expanded INI text (every key, fixed order); the basis of the hash.
  std::string canonical() const;
};

/// Parses INI text over the defaults. Unknown sections or keys and malformed
/// values are config errors naming `section.key`.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

/// FNV-1a over the canonical text, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

}  // namespace bdl
