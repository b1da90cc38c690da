#include "bdl/model.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "bdl/binary_io.hpp"
#include "bdl/error.hpp"

namespace bdl {

namespace {

std::uint64_t next_token() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

// out(r, j) = b[j] + sum_k w[j * in + k] * in(r, k); each row is independent so
// the result does not depend on the thread count or on which rows are batched.
Matrix linear(const Matrix& in, std::span<const double> w, std::span<const double> b, std::size_t out_dim) {
  const std::size_t in_dim = in.cols();
  Matrix out(in.rows(), out_dim);
  const auto rows = static_cast<std::int64_t>(in.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t sr = 0; sr < rows; ++sr) {
    const auto r = static_cast<std::size_t>(sr);
    const auto x = in.row(r);
    auto y = out.row(r);
    for (std::size_t j = 0; j < out_dim; ++j) {
      double acc = b[j];
      const double* wj = w.data() + j * in_dim;
      for (std::size_t k = 0; k < in_dim; ++k) acc += wj[k] * x[k];
      y[j] = acc;
    }
  }
  return out;
}

void activate(Matrix& m, Activation activation) {
  if (activation == Activation::kLinear) return;
  for (double& v : m.data()) v = std::tanh(v);
}

void check_input(const DescriptorNet& net, const Matrix& inputs) {
  require(inputs.cols() == net.input_dim(), ErrorKind::kShape,
          "input has " + std::to_string(inputs.cols()) + " columns, network expects " +
              std::to_string(net.input_dim()));
}

}  // namespace

std::string_view to_string(Activation activation) {
  return activation == Activation::kTanh ? "tanh" : "linear";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "linear") return Activation::kLinear;
  throw Error(ErrorKind::kConfig, "unknown activation '" + std::string(name) + "'");
}

DescriptorNet::DescriptorNet(std::vector<std::size_t> layer_sizes, Activation activation)
    : sizes_(std::move(layer_sizes)), activation_(activation), token_(next_token()) {
  require(sizes_.size() >= 2, ErrorKind::kConfig, "a network needs at least an input and an output size");
  std::size_t total = 0;
  for (std::size_t k = 0; k + 1 < sizes_.size(); ++k) {
    require(sizes_[k] > 0 && sizes_[k + 1] > 0, ErrorKind::kConfig, "layer sizes must be positive");
    offsets_.push_back(total);
    total += sizes_[k] * sizes_[k + 1] + sizes_[k + 1];
  }
  params_.assign(total, 0.0);
}

DescriptorNet::DescriptorNet(const DescriptorNet& other)
    : sizes_(other.sizes_),
      activation_(other.activation_),
      offsets_(other.offsets_),
      params_(other.params_),
      token_(next_token()) {}

DescriptorNet& DescriptorNet::operator=(const DescriptorNet& other) {
  if (this != &other) {
    sizes_ = other.sizes_;
    activation_ = other.activation_;
    offsets_ = other.offsets_;
    params_ = other.params_;
    refresh_token();
  }
  return *this;
}

DescriptorNet DescriptorNet::glorot(std::vector<std::size_t> layer_sizes, Activation activation,
                                    std::uint64_t seed) {
  DescriptorNet net(std::move(layer_sizes), activation);
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < net.num_layers(); ++k) {
    const std::size_t fan_in = net.sizes_[k];
    const std::size_t fan_out = net.sizes_[k + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    double* w = net.params_.data() + net.offsets_[k];
    for (std::size_t i = 0; i < fan_in * fan_out; ++i) w[i] = dist(rng);
  }
  return net;
}

DescriptorNet DescriptorNet::identity(std::size_t dim) {
  DescriptorNet net({dim, dim}, Activation::kLinear);
  for (std::size_t i = 0; i < dim; ++i) net.params_[i * dim + i] = 1.0;
  return net;
}

std::span<double> DescriptorNet::mutable_parameters() {
  refresh_token();
  return params_;
}

void DescriptorNet::set_parameters(std::span<const double> values) {
  require(values.size() == params_.size(), ErrorKind::kShape, "parameter count mismatch");
  std::ranges::copy(values, params_.begin());
  refresh_token();
}

std::span<const double> DescriptorNet::weights(std::size_t layer) const {
  return {params_.data() + offsets_[layer], sizes_[layer] * sizes_[layer + 1]};
}

std::span<const double> DescriptorNet::bias(std::size_t layer) const {
  return {params_.data() + offsets_[layer] + sizes_[layer] * sizes_[layer + 1], sizes_[layer + 1]};
}

void DescriptorNet::refresh_token() { token_ = next_token(); }

ForwardResult forward(const DescriptorNet& net, const Matrix& inputs) {
  check_input(net, inputs);
  ForwardCache cache;
  cache.net_token = net.token();
  cache.layer_inputs.reserve(net.num_layers());
  Matrix h = inputs;
  for (std::size_t k = 0; k < net.num_layers(); ++k) {
    Matrix z = linear(h, net.weights(k), net.bias(k), net.layer_sizes()[k + 1]);
    cache.layer_inputs.push_back(std::move(h));
    if (k + 1 < net.num_layers()) activate(z, net.activation());
    h = std::move(z);
  }
  cache.pre_norm = h;
  cache.norms.resize(h.rows());
  for (std::size_t r = 0; r < h.rows(); ++r) {
    const double norm = l2_norm(h.row(r));
    require(norm >= 1e-12, ErrorKind::kDegenerateVector, "network output has zero norm");
    cache.norms[r] = norm;
    for (double& v : h.row(r)) v /= norm;
  }
  cache.output = h;
  return {EmbeddingBatch(std::move(h)), std::move(cache)};
}

EmbeddingBatch embed(const DescriptorNet& net, const Matrix& inputs) {
  return std::move(forward(net, inputs).embeddings);
}

std::vector<double> normalization_vjp(std::span<const double> pre_norm, std::span<const double> grad) {
  const double norm = l2_norm(pre_norm);
  require(norm >= 1e-12, ErrorKind::kDegenerateVector, "normalization of a zero vector");
  double proj = 0.0;
  for (std::size_t k = 0; k < pre_norm.size(); ++k) proj += pre_norm[k] / norm * grad[k];
  std::vector<double> out(pre_norm.size());
  for (std::size_t k = 0; k < pre_norm.size(); ++k) out[k] = (grad[k] - pre_norm[k] / norm * proj) / norm;
  return out;
}

std::vector<double> backward(const DescriptorNet& net, const ForwardCache& cache,
                             const Matrix& grad_embeddings) {
  require(cache.net_token == net.token() && cache.layer_inputs.size() == net.num_layers(), ErrorKind::kCache,
          "forward cache does not belong to this network state");
  const std::size_t rows = cache.output.rows();
  require(grad_embeddings.rows() == rows && grad_embeddings.cols() == net.output_dim(), ErrorKind::kShape,
          "upstream gradient shape does not match the cached forward pass");

  // delta = dL/du, through the normalization Jacobian (I - y y^T) / |u|.
  Matrix delta(rows, net.output_dim());
  for (std::size_t r = 0; r < rows; ++r) {
    const auto y = cache.output.row(r);
    const auto g = grad_embeddings.row(r);
    const double proj = dot(y, g);
    auto d = delta.row(r);
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = (g[k] - y[k] * proj) / cache.norms[r];
  }

  std::vector<double> grads(net.parameter_count(), 0.0);
  for (std::size_t layer = net.num_layers(); layer-- > 0;) {
    const Matrix& h = cache.layer_inputs[layer];
    const std::size_t in_dim = net.layer_sizes()[layer];
    const std::size_t out_dim = net.layer_sizes()[layer + 1];
    double* gw = grads.data() + net.weight_offset(layer);
    double* gb = gw + in_dim * out_dim;

    // Each weight entry sums over rows in a fixed order, so the parallel split
    // over output units is bit-identical to a serial loop.
    const auto outs = static_cast<std::int64_t>(out_dim);
#pragma omp parallel for schedule(static)
    for (std::int64_t sj = 0; sj < outs; ++sj) {
      const auto j = static_cast<std::size_t>(sj);
      double bias_acc = 0.0;
      for (std::size_t r = 0; r < rows; ++r) bias_acc += delta(r, j);
      gb[j] = bias_acc;
      for (std::size_t k = 0; k < in_dim; ++k) {
        double acc = 0.0;
        for (std::size_t r = 0; r < rows; ++r) acc += delta(r, j) * h(r, k);
        gw[j * in_dim + k] = acc;
      }
    }
    if (layer == 0) break;

    const auto w = net.weights(layer);
    Matrix next(rows, in_dim);
    const auto srows = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static)
    for (std::int64_t sr = 0; sr < srows; ++sr) {
      const auto r = static_cast<std::size_t>(sr);
      for (std::size_t k = 0; k < in_dim; ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < out_dim; ++j) acc += delta(r, j) * w[j * in_dim + k];
        // h is the previous hidden layer's tanh output.
        next(r, k) = net.activation() == Activation::kTanh ? acc * (1.0 - h(r, k) * h(r, k)) : acc;
      }
    }
    delta = std::move(next);
  }
  return grads;
}

namespace reference {

EmbeddingBatch embed(const DescriptorNet& net, const Matrix& inputs) {
  check_input(net, inputs);
  Matrix out(inputs.rows(), net.output_dim());
  std::vector<double> h;
  std::vector<double> z;
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    h.assign(inputs.row(r).begin(), inputs.row(r).end());
    for (std::size_t layer = 0; layer < net.num_layers(); ++layer) {
      const auto w = net.weights(layer);
      const auto b = net.bias(layer);
      const std::size_t out_dim = net.layer_sizes()[layer + 1];
      z.assign(out_dim, 0.0);
      for (std::size_t j = 0; j < out_dim; ++j) {
        double acc = b[j];
        for (std::size_t k = 0; k < h.size(); ++k) acc += w[j * h.size() + k] * h[k];
        z[j] = acc;
      }
      if (layer + 1 < net.num_layers() && net.activation() == Activation::kTanh)
        for (double& v : z) v = std::tanh(v);
      h.swap(z);
    }
    const double norm = l2_norm(h);
    require(norm >= 1e-12, ErrorKind::kDegenerateVector, "network output has zero norm");
    for (std::size_t k = 0; k < h.size(); ++k) out(r, k) = h[k] / norm;
  }
  return EmbeddingBatch(std::move(out));
}

}  // namespace reference

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, double lr) {
  require(params.size() == grads.size() && params.size() == state.first_moment.size() &&
              params.size() == state.second_moment.size(),
          ErrorKind::kShape, "adam: parameter, gradient and moment sizes differ");
  for (double g : grads) require(std::isfinite(g), ErrorKind::kNumeric, "adam: non-finite gradient");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * grads[i];
    v = state.beta2 * v + (1.0 - state.beta2) * grads[i] * grads[i];
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

LrSchedule warmup_cosine(double max_lr, std::size_t total_steps, double warmup_fraction) {
  LrSchedule s;
  s.kind = ScheduleKind::kWarmupCosine;
  s.max_lr = max_lr;
  s.total_steps = total_steps;
  s.warmup_steps = static_cast<std::size_t>(std::llround(warmup_fraction * static_cast<double>(total_steps)));
  return s;
}

double lr_at(const LrSchedule& s, std::size_t step) {
  require(step <= s.total_steps, ErrorKind::kRange,
          "step " + std::to_string(step) + " beyond schedule length " + std::to_string(s.total_steps));
  switch (s.kind) {
    case ScheduleKind::kConstant:
      return s.max_lr;
    case ScheduleKind::kAnnealingGeometric:
      return s.max_lr * std::pow(s.decay, static_cast<double>(step));
    case ScheduleKind::kWarmupCosine:
      break;
  }
  if (step < s.warmup_steps)
    return s.max_lr * static_cast<double>(step) / static_cast<double>(s.warmup_steps);
  const std::size_t decay_len = s.total_steps - s.warmup_steps;
  if (decay_len == 0) return s.max_lr;
  const double progress = static_cast<double>(step - s.warmup_steps) / static_cast<double>(decay_len);
  return s.min_lr + (s.max_lr - s.min_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

// --- checkpoints -------------------------------------------------------------

std::vector<std::uint8_t> encode_checkpoint(const DescriptorNet& net, const CheckpointMetadata& meta) {
  io::ByteWriter w;
  w.magic("BDSC");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(net.layer_sizes().size()));
  for (std::size_t s : net.layer_sizes()) w.u32(static_cast<std::uint32_t>(s));
  w.u32(static_cast<std::uint32_t>(net.activation()));
  for (double p : net.parameters()) w.f32(static_cast<float>(p));
  const nlohmann::json j = {{"seed", meta.seed}, {"stage", meta.stage}, {"config_hash", meta.config_hash}};
  w.text(j.dump());
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "checkpoint");
  r.expect_magic("BDSC");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw Error(ErrorKind::kVersion, "checkpoint version " + std::to_string(version) + ", reader supports " +
                                         std::to_string(kCheckpointVersion));
  const std::uint32_t count = r.u32();
  require(count >= 2 && count <= 64, ErrorKind::kFormat, "checkpoint: implausible layer count");
  std::vector<std::size_t> sizes(count);
  for (auto& s : sizes) s = r.u32();
  const std::uint32_t act = r.u32();
  require(act <= static_cast<std::uint32_t>(Activation::kLinear), ErrorKind::kFormat,
          "checkpoint: unknown activation id " + std::to_string(act));
  DescriptorNet net(std::move(sizes), static_cast<Activation>(act));
  require(r.remaining() >= 4 * net.parameter_count(), ErrorKind::kFormat, "checkpoint: truncated payload");
  std::vector<double> params(net.parameter_count());
  for (double& p : params) p = static_cast<double>(r.f32());
  net.set_parameters(params);

  Checkpoint out{std::move(net), {}};
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(r.text());
    out.metadata.seed = j.at("seed").get<std::uint64_t>();
    out.metadata.stage = j.at("stage").get<std::string>();
    out.metadata.config_hash = j.at("config_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("checkpoint metadata: ") + e.what());
  }
  require(r.at_end(), ErrorKind::kFormat, "checkpoint: trailing bytes");
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const DescriptorNet& net, const CheckpointMetadata& meta) {
  io::write_file(path, encode_checkpoint(net, meta));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_file(path)); }

}  // namespace bdl
