#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bdl/core_math.hpp"

namespace bdl {

enum class Activation : std::uint32_t { kTanh = 0, kLinear = 1 };

std::string_view to_string(Activation activation);
Activation parse_activation(std::string_view name);

/// Fully connected descriptor network: hidden layers use `activation`, the last
/// layer is linear and its output is L2 normalized.
///
/// Parameters live in one flat vector, per layer the weights (out x in,
/// row-major) followed by the biases. Every construction, copy or mutable access
/// takes a fresh token so forward caches from another net, or from before a
/// parameter change, are rejected by `backward`.
class DescriptorNet {
 public:
  DescriptorNet(std::vector<std::size_t> layer_sizes, Activation activation);
  DescriptorNet(const DescriptorNet& other);
  DescriptorNet& operator=(const DescriptorNet& other);
  DescriptorNet(DescriptorNet&&) noexcept = default;
  DescriptorNet& operator=(DescriptorNet&&) noexcept = default;

  /// Uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  static DescriptorNet glorot(std::vector<std::size_t> layer_sizes, Activation activation,
                              std::uint64_t seed);

  /// Single linear layer with identity weights.
  static DescriptorNet identity(std::size_t dim);

  const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
  Activation activation() const noexcept { return activation_; }
  std::size_t num_layers() const noexcept { return sizes_.size() - 1; }
  std::size_t input_dim() const noexcept { return sizes_.front(); }
  std::size_t output_dim() const noexcept { return sizes_.back(); }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> mutable_parameters();
  void set_parameters(std::span<const double> values);

  std::span<const double> weights(std::size_t layer) const;
  std::span<const double> bias(std::size_t layer) const;
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }

  std::uint64_t token() const noexcept { return token_; }

 private:
  void refresh_token();

  std::vector<std::size_t> sizes_;
  Activation activation_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
  std::uint64_t token_ = 0;
};

struct ForwardCache {
  std::uint64_t net_token = 0;
  /// layer_inputs[k] is the input of layer k (layer_inputs[0] is the raw input).
  std::vector<Matrix> layer_inputs;
  Matrix pre_norm;
  std::vector<double> norms;
  Matrix output;
};

struct ForwardResult {
  EmbeddingBatch embeddings;
  ForwardCache cache;
};

ForwardResult forward(const DescriptorNet& net, const Matrix& inputs);

/// Forward pass without a cache.
EmbeddingBatch embed(const DescriptorNet& net, const Matrix& inputs);

/// Parameter gradients (same layout as `parameters()`) given dL/d(embeddings).
std::vector<double> backward(const DescriptorNet& net, const ForwardCache& cache,
                             const Matrix& grad_embeddings);

/// (I - y y^T) g / |u| with y = u / |u|: the Jacobian-vector product of L2 normalization.
std::vector<double> normalization_vjp(std::span<const double> pre_norm, std::span<const double> grad);

namespace reference {

EmbeddingBatch embed(const DescriptorNet& net, const Matrix& inputs);

}  // namespace reference

// --- optimizer -------------------------------------------------------------

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  explicit AdamState(std::size_t parameter_count)
      : first_moment(parameter_count, 0.0), second_moment(parameter_count, 0.0) {}
};

/// Bias-corrected Adam update in place. Throws before touching anything if a
/// gradient is not finite.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, double lr);

enum class ScheduleKind { kWarmupCosine, kConstant, kAnnealingGeometric };

struct LrSchedule {
  ScheduleKind kind = ScheduleKind::kWarmupCosine;
  double max_lr = 0.033;
  std::size_t warmup_steps = 0;
  std::size_t total_steps = 0;
  double min_lr = 0.0;
  /// Per-step factor for kAnnealingGeometric.
  double decay = 0.75;
};

/// Warm-up length defaults to 5% of the run.
LrSchedule warmup_cosine(double max_lr, std::size_t total_steps, double warmup_fraction = 0.05);

double lr_at(const LrSchedule& schedule, std::size_t step);

// --- checkpoints -------------------------------------------------------------

struct CheckpointMetadata {
  std::uint64_t seed = 0;
  std::string stage = "init";
  std::string config_hash;
};

struct Checkpoint {
  DescriptorNet net;
  CheckpointMetadata metadata;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const DescriptorNet& net, const CheckpointMetadata& meta);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const DescriptorNet& net,
                     const CheckpointMetadata& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace bdl
