#include "bdl/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "bdl/binary_io.hpp"

namespace bdl {

int exit_code_for(ErrorKind kind) { return kind == ErrorKind::kConfig ? kExitConfig : kExitRuntime; }

namespace {

constexpr std::uint64_t kAnnealSeedOffset = 1000003;

struct Loaded {
  PatchDataset dataset;
  ClusterSplit split;
};

Loaded load_for(const RunConfig& cfg, const std::filesystem::path& path) {
  Loaded l{load_dataset(path), {}};
  require(l.dataset.dim == cfg.data.input_dim, ErrorKind::kShape,
          "dataset " + path.string() + " has " + std::to_string(l.dataset.dim) +
              "-dimensional patches but data.input_dim is " + std::to_string(cfg.data.input_dim));
  l.split = split_clusters(l.dataset, cfg.holdout_fraction);
  return l;
}

void require_net_matches(const DescriptorNet& net, const PatchDataset& ds, const std::filesystem::path& ckpt) {
  require(net.input_dim() == ds.dim, ErrorKind::kShape,
          "checkpoint " + ckpt.string() + " expects " + std::to_string(net.input_dim()) +
              "-dimensional patches, dataset has " + std::to_string(ds.dim));
}

std::optional<Supervisor> pretrained_supervisor(const RunConfig& cfg) {
  if (cfg.training.supervisor.mode != SupervisorMode::kPretrained) return std::nullopt;
  return Supervisor::from_checkpoint(cfg.training.supervisor.checkpoint);
}

std::string csv_real(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(text.data()), text.size());
  io::write_file(path, bytes);
}

std::string epoch_csv(std::span<const EpochLog> log) {
  std::ostringstream os;
  os << "epoch,step,lr,loss,p_neg,mean_I,mean_W,mean_d_pos,mean_d_neg,eval_matching_map\n";
  for (const EpochLog& r : log)
    os << r.epoch << ',' << r.step << ',' << csv_real(r.lr) << ',' << csv_real(r.loss) << ',' << csv_real(r.p_neg)
       << ',' << csv_real(r.mean_confidence) << ',' << csv_real(r.mean_weight) << ',' << csv_real(r.mean_d_pos)
       << ',' << csv_real(r.mean_d_neg) << ',' << csv_real(r.eval_matching_map) << '\n';
  return os.str();
}

std::string anneal_csv(std::span<const AnnealLogRow> log) {
  std::ostringstream os;
  os << "t,bs,thr,lr,loss,mean_I,filtered_fraction\n";
  for (const AnnealLogRow& r : log)
    os << r.t << ',' << r.batch_size << ',' << csv_real(r.threshold) << ',' << csv_real(r.lr) << ','
       << csv_real(r.loss) << ',' << csv_real(r.mean_confidence) << ',' << csv_real(r.filtered_fraction) << '\n';
  return os.str();
}

}  // namespace

void cmd_gen_data(const RunConfig& cfg, const std::filesystem::path& out) {
  cfg.validate();
  const PatchDataset ds = generate(cfg.data);
  save_dataset(ds, out);
  spdlog::info("wrote {} clusters ({} patches) to {}", ds.num_clusters(), ds.num_patches(), out.string());
}

TrainResult cmd_train(const RunConfig& cfg, const std::filesystem::path& dataset,
                      const std::filesystem::path& out_checkpoint, const std::filesystem::path& out_log) {
  cfg.validate();
  const Loaded data = load_for(cfg, dataset);
  const std::optional<Supervisor> pretrained = pretrained_supervisor(cfg);

  DescriptorNet net = DescriptorNet::glorot(cfg.layer_sizes(), cfg.activation, cfg.seed);
  EvalHook hook;
  if (cfg.eval_each_epoch)
    hook = [&](const DescriptorNet& n) {
      return find_metric(evaluate(n, data.dataset, data.split.held_out, cfg.eval), "matching_map", "all");
    };

  TrainResult result;
  result.config_hash = config_hash(cfg);
  result.log = run_preliminary(net, data.dataset, data.split.train, cfg.training, cfg.preliminary, cfg.seed,
                               pretrained ? &*pretrained : nullptr, hook);

  save_checkpoint(out_checkpoint, net, {cfg.seed, std::string(kStagePreliminary), result.config_hash});
  write_text(out_log, epoch_csv(result.log));
  spdlog::info("preliminary training done: {} epochs, final P_neg {:.4f}", result.log.size(),
               result.log.empty() ? 0.0 : result.log.back().p_neg);
  return result;
}

std::vector<AnnealLogRow> cmd_anneal(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                                     const std::filesystem::path& dataset,
                                     const std::filesystem::path& out_checkpoint,
                                     const std::filesystem::path& out_log) {
  cfg.validate();
  Checkpoint ckpt = load_checkpoint(checkpoint);
  require(ckpt.metadata.stage == kStagePreliminary, ErrorKind::kStage,
          "annealing needs a checkpoint at stage '" + std::string(kStagePreliminary) + "', " + checkpoint.string() +
              " is at stage '" + ckpt.metadata.stage + "'");
  const Loaded data = load_for(cfg, dataset);
  require_net_matches(ckpt.net, data.dataset, checkpoint);
  const std::optional<Supervisor> pretrained = pretrained_supervisor(cfg);

  const auto log = run_annealing(ckpt.net, data.dataset, data.split.train, cfg.anneal, cfg.training,
                                 cfg.seed + kAnnealSeedOffset, pretrained ? &*pretrained : nullptr);

  save_checkpoint(out_checkpoint, ckpt.net, {cfg.seed, std::string(kStageAnnealed), config_hash(cfg)});
  write_text(out_log, anneal_csv(log));
  spdlog::info("annealing done: {} iterations", log.size());
  return log;
}

std::vector<MetricRow> cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                                const std::filesystem::path& dataset,
                                const std::optional<std::filesystem::path>& out) {
  cfg.validate();
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const Loaded data = load_for(cfg, dataset);
  require_net_matches(ckpt.net, data.dataset, checkpoint);
  const auto rows = evaluate(ckpt.net, data.dataset, data.split.held_out, cfg.eval);
  if (out) {
    std::ostringstream os;
    write_metric_csv(os, rows);
    write_text(*out, os.str());
  }
  return rows;
}

// --- gradient check ------------------------------------------------------------

bool GradcheckReport::passed() const {
  return !components.empty() && std::ranges::all_of(components, [](const auto& c) { return c.passed; });
}

namespace {

double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0;
  double na = 0.0;
  double nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double scale = std::sqrt(std::max(na, nn));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

template <class F>
std::vector<double> central_difference(std::vector<double> x, double h, F&& f) {
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double x0 = x[k];
    x[k] = x0 + h;
    const double up = f(x);
    x[k] = x0 - h;
    const double down = f(x);
    x[k] = x0;
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

void corrupt(std::vector<double>& g) {
  if (!g.empty()) g[0] = g[0] * 1.01 + 1e-3;
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, sigma);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

PatchBatch random_batch(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
  PatchBatch b;
  b.anchors = gaussian_matrix(n, dim, 1.0, rng);
  b.positives = b.anchors;
  const Matrix noise = gaussian_matrix(n, dim, 0.5, rng);
  for (std::size_t k = 0; k < b.positives.data().size(); ++k) b.positives.data()[k] += noise.data()[k];
  for (std::size_t i = 0; i < n; ++i) {
    b.positive_owner.push_back(i);
    b.cluster_ids.push_back(static_cast<std::int32_t>(i));
  }
  return b;
}

std::vector<MinedTriplet> with_distances(std::vector<MinedTriplet> triplets, std::span<const double> d) {
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    triplets[i].d_pos = d[2 * i];
    triplets[i].d_neg = d[2 * i + 1];
  }
  return triplets;
}

std::vector<double> interleaved(const LossOutput& out) {
  std::vector<double> g;
  for (std::size_t i = 0; i < out.grad_d_pos.size(); ++i) {
    g.push_back(out.grad_d_pos[i]);
    g.push_back(out.grad_d_neg[i]);
  }
  return g;
}

}  // namespace

GradcheckReport cmd_gradcheck(const RunConfig& cfg, const GradcheckOptions& options) {
  cfg.validate();
  require(options.batch_size >= 2 && options.dim >= 1 && options.batches >= 1, ErrorKind::kConfig,
          "gradcheck needs at least one batch of size >= 2");
  GradcheckReport report;
  report.tolerance = options.tolerance;
  GradcheckComponent balance{"balance_loss"};
  GradcheckComponent weighted{"weighted_balance_loss"};
  GradcheckComponent jacobian{"normalization_jacobian"};
  GradcheckComponent end_to_end{"end_to_end"};

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double h = options.step;
  const std::size_t n = options.batch_size;
  const std::size_t dim = options.dim;

  for (std::size_t b = 0; b < options.batches; ++b) {
    const DescriptorNet net = DescriptorNet::glorot({dim, 2 * dim, dim}, cfg.activation, rng());
    const PatchBatch batch = random_batch(n, dim, rng);
    const ForwardResult fwd = forward(net, batch.stacked());
    Matrix anchor_rows(n, dim);
    Matrix positive_rows(n, dim);
    for (std::size_t r = 0; r < n; ++r) {
      std::ranges::copy(fwd.embeddings.row(r), anchor_rows.row(r).begin());
      std::ranges::copy(fwd.embeddings.row(n + r), positive_rows.row(r).begin());
    }
    const auto triplets = mine_batch(EmbeddingBatch(anchor_rows), EmbeddingBatch(positive_rows),
                                     batch.positive_owner, batch.cluster_ids);

    std::vector<double> w(triplets.size());
    for (double& x : w) x = unit(rng);
    w[0] = 0.0;
    if (w.size() > 1) w[1] = 1.0;
    ConfidenceWeights weights = unit_weights(triplets);
    weights.weight = w;

    std::vector<double> d;
    for (const MinedTriplet& t : triplets) {
      d.push_back(t.d_pos);
      d.push_back(t.d_neg);
    }
    std::vector<double> d_neg;
    for (const MinedTriplet& t : triplets) d_neg.push_back(t.d_neg);
    const double p_neg = compute_p_neg(d_neg, cfg.training.balance.gamma);
    const LossOptions pinned{.p_neg = p_neg};

    // Distance-level balance loss.
    {
      std::vector<double> analytic = interleaved(balance_loss(triplets, cfg.training.balance, pinned));
      const auto numeric = central_difference(d, h, [&](const std::vector<double>& x) {
        return balance_loss(with_distances(triplets, x), cfg.training.balance, pinned).loss;
      });
      if (options.inject_fault) corrupt(analytic);
      balance.max_rel_error = std::max(balance.max_rel_error, relative_error(analytic, numeric));
      ++balance.checks;
    }

    // Distance-level weighted balance loss.
    {
      std::vector<double> analytic =
          interleaved(weighted_balance_loss(triplets, weights, cfg.training.balance, pinned));
      const auto numeric = central_difference(d, h, [&](const std::vector<double>& x) {
        return weighted_balance_loss(with_distances(triplets, x), weights, cfg.training.balance, pinned).loss;
      });
      if (options.inject_fault) corrupt(analytic);
      weighted.max_rel_error = std::max(weighted.max_rel_error, relative_error(analytic, numeric));
      ++weighted.checks;
    }

    // Normalization Jacobian on one pre-norm row against a probe.
    {
      const Matrix u = gaussian_matrix(1, dim, 1.0, rng);
      const Matrix probe = gaussian_matrix(1, dim, 1.0, rng);
      std::vector<double> analytic = normalization_vjp(u.row(0), probe.row(0));
      const std::vector<double> u0(u.row(0).begin(), u.row(0).end());
      const auto numeric = central_difference(u0, h, [&](const std::vector<double>& x) {
        return dot(l2_normalize(x), probe.row(0));
      });
      if (options.inject_fault) corrupt(analytic);
      jacobian.max_rel_error = std::max(jacobian.max_rel_error, relative_error(analytic, numeric));
      ++jacobian.checks;
    }

    // Parameters -> embeddings -> weighted balance loss, with the mined indices,
    // weights and P_neg frozen.
    {
      const LossOutput out = weighted_balance_loss(triplets, weights, cfg.training.balance, pinned);
      std::vector<double> analytic =
          backward(net, fwd.cache, embedding_gradients(fwd.embeddings, n, triplets, out));
      const Matrix stacked = batch.stacked();
      const std::vector<double> p0(net.parameters().begin(), net.parameters().end());
      DescriptorNet probe_net = net;
      const auto numeric = central_difference(p0, h, [&](const std::vector<double>& p) {
        probe_net.set_parameters(p);
        const EmbeddingBatch e = embed(probe_net, stacked);
        std::vector<double> x;
        for (const MinedTriplet& t : triplets) {
          const TripletRows r = stacked_rows(t, n);
          x.push_back(unit_distance(e.row(r.anchor), e.row(r.positive)));
          x.push_back(unit_distance(e.row(r.neg_near), e.row(r.neg_far)));
        }
        return weighted_balance_loss(with_distances(triplets, x), weights, cfg.training.balance, pinned).loss;
      });
      if (options.inject_fault) corrupt(analytic);
      end_to_end.max_rel_error = std::max(end_to_end.max_rel_error, relative_error(analytic, numeric));
      ++end_to_end.checks;
    }
  }

  for (GradcheckComponent* c : {&balance, &weighted, &jacobian, &end_to_end}) {
    c->passed = c->max_rel_error <= options.tolerance;
    report.components.push_back(*c);
  }
  return report;
}

void write_gradcheck_report(std::ostream& out, const GradcheckReport& report) {
  out << "component,checks,max_rel_error,tolerance,status\n";
  for (const GradcheckComponent& c : report.components)
    out << c.name << ',' << c.checks << ',' << std::setprecision(6) << std::scientific << c.max_rel_error << ','
        << report.tolerance << std::defaultfloat << ',' << (c.passed ? "PASS" : "FAIL") << '\n';
}

// --- distribution dump -----------------------------------------------------------

std::size_t cmd_dump_distributions(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                                   const std::filesystem::path& dataset, const std::filesystem::path& out) {
  cfg.validate();
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const Loaded data = load_for(cfg, dataset);
  require_net_matches(ckpt.net, data.dataset, checkpoint);
  const std::optional<Supervisor> pretrained = pretrained_supervisor(cfg);
  const Supervisor supervisor = pretrained ? *pretrained : Supervisor::self_snapshot(ckpt.net);

  std::mt19937_64 rng(cfg.seed);
  std::ostringstream os;
  // I_pos_minus_neg keeps the opposite sign convention alongside I.
  os << "batch,d_pos,d_neg,I,W,W_times_dneg,I_pos_minus_neg\n";
  std::size_t rows = 0;
  for (std::size_t b = 0; b < cfg.dump_batches; ++b) {
    const PatchBatch batch = sample_batch(data.dataset, cfg.dump_batch_size, rng, data.split.train);
    const EmbeddingBatch anchors = embed(ckpt.net, batch.anchors);
    const EmbeddingBatch positives = embed(ckpt.net, batch.positives);
    const auto triplets = mine_batch(anchors, positives, batch.positive_owner, batch.cluster_ids);
    const ConfidenceWeights w = supervise_batch(supervisor, batch, triplets, cfg.training.supervisor);
    for (std::size_t i = 0; i < triplets.size(); ++i, ++rows)
      os << b << ',' << csv_real(triplets[i].d_pos) << ',' << csv_real(triplets[i].d_neg) << ','
         << csv_real(w.confidence[i]) << ',' << csv_real(w.weight[i]) << ','
         << csv_real(w.weight[i] * triplets[i].d_neg) << ',' << csv_real(-w.confidence[i]) << '\n';
  }
  write_text(out, os.str());
  return rows;
}

}  // namespace bdl
