#include "bdl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>

#include "bdl/error.hpp"

namespace bdl {

namespace {

void check_query(const RankingQuery& q) {
  require(q.distances.size() == q.relevant.size(), ErrorKind::kShape, "ranking query: distances/relevance mismatch");
}

/// Candidate order: ascending distance, ties by index.
std::vector<std::size_t> ranking(const RankingQuery& q) {
  std::vector<std::size_t> order(q.distances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return q.distances[a] < q.distances[b]; });
  return order;
}

/// Validation runs serially first: exceptions must not escape the parallel region.
template <typename Check, typename PerQuery>
double mean_over_queries(const RankingTask& task, Check check, PerQuery per_query) {
  require(!task.queries.empty(), ErrorKind::kEmptyInput, "ranking task without queries");
  for (const auto& q : task.queries) {
    check_query(q);
    check(q);
  }
  std::vector<double> ap(task.queries.size());
  const auto n = static_cast<std::int64_t>(task.queries.size());
  // Per-query values land in fixed slots; the sum below runs in query order.
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < n; ++i) ap[static_cast<std::size_t>(i)] = per_query(task.queries[static_cast<std::size_t>(i)]);
  double total = 0.0;
  for (double v : ap) total += v;
  return total / static_cast<double>(ap.size());
}

}  // namespace

double fpr_at_recall(const VerificationSet& set, double recall) {
  require(recall > 0.0 && recall <= 1.0, ErrorKind::kRange, "recall must be in (0, 1]");
  require(set.distances.size() == set.is_match.size(), ErrorKind::kShape, "verification set: length mismatch");
  std::vector<double> matches;
  std::vector<double> non_matches;
  for (std::size_t i = 0; i < set.distances.size(); ++i)
    (set.is_match[i] ? matches : non_matches).push_back(set.distances[i]);
  require(!matches.empty() && !non_matches.empty(), ErrorKind::kProtocol,
          "verification set needs at least one match and one non-match");
  std::ranges::sort(matches);
  // Smallest k with k / M >= recall (closed at the discrete step).
  const double m = static_cast<double>(matches.size());
  auto k = static_cast<std::size_t>(std::ceil(recall * m - 1e-9));
  k = std::clamp<std::size_t>(k, 1, matches.size());
  const double tau = matches[k - 1];
  const auto accepted = std::ranges::count_if(non_matches, [tau](double d) { return d <= tau; });
  return static_cast<double>(accepted) / static_cast<double>(non_matches.size());
}

double matching_map(const RankingTask& task) {
  auto check = [](const RankingQuery& q) {
    const auto relevant = std::ranges::count(q.relevant, std::uint8_t{1});
    require(relevant == 1, ErrorKind::kProtocol,
            "matching query needs exactly one relevant candidate, found " + std::to_string(relevant));
  };
  return mean_over_queries(task, check, [](const RankingQuery& q) {
    const auto order = ranking(q);
    for (std::size_t r = 0; r < order.size(); ++r)
      if (q.relevant[order[r]]) return 1.0 / static_cast<double>(r + 1);
    return 0.0;
  });
}

double retrieval_map(const RankingTask& task) {
  auto check = [](const RankingQuery& q) {
    require(std::ranges::count(q.relevant, std::uint8_t{1}) > 0, ErrorKind::kProtocol,
            "retrieval query without a relevant candidate");
  };
  return mean_over_queries(task, check, [](const RankingQuery& q) {
    const auto order = ranking(q);
    double hits = 0.0;
    double precision_sum = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (!q.relevant[order[r]]) continue;
      hits += 1.0;
      precision_sum += hits / static_cast<double>(r + 1);
    }
    return precision_sum / hits;
  });
}

double chance_matching_map(std::size_t gallery_size) {
  require(gallery_size > 0, ErrorKind::kEmptyInput, "empty gallery");
  double harmonic = 0.0;
  for (std::size_t k = 1; k <= gallery_size; ++k) harmonic += 1.0 / static_cast<double>(k);
  return harmonic / static_cast<double>(gallery_size);
}

std::vector<MetricRow> evaluate(const DescriptorNet& net, const PatchDataset& ds,
                                std::span<const std::int32_t> clusters, const EvalOptions& options) {
  require(clusters.size() >= 2, ErrorKind::kEmptyInput, "evaluation needs at least two clusters");
  require(net.input_dim() == ds.dim, ErrorKind::kShape,
          "model expects " + std::to_string(net.input_dim()) + "-dimensional patches, dataset has " +
              std::to_string(ds.dim));
  const std::size_t members = ds.members_per_cluster;
  const std::size_t positives = members - 1;
  const std::size_t n = clusters.size();

  Matrix inputs(n * members, ds.dim);
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t m = 0; m < members; ++m) {
      const auto src = ds.patch(ds.row_of(static_cast<std::size_t>(clusters[c]), m));
      std::ranges::copy(src, inputs.row(c * members + m).begin());
    }
  const EmbeddingBatch emb = embed(net, inputs);
  auto anchor = [&](std::size_t c) { return emb.row(c * members); };
  auto positive = [&](std::size_t c, std::size_t m) { return emb.row(c * members + 1 + m); };

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> other(0, n - 2);

  constexpr std::array<std::string_view, 4> kTiers = {"easy", "hard", "tough", "all"};
  std::array<VerificationSet, 4> verification;
  std::array<RankingTask, 4> matching;
  std::array<RankingTask, 4> retrieval;

  for (std::size_t c = 0; c < n; ++c) {
    const auto tier = static_cast<std::size_t>(ds.tier_of(static_cast<std::size_t>(clusters[c])));
    VerificationSet pairs;
    for (std::size_t m = 0; m < positives; ++m) {
      pairs.distances.push_back(unit_distance(anchor(c), positive(c, m)));
      pairs.is_match.push_back(1);
      std::size_t o = other(rng);
      if (o >= c) ++o;
      pairs.distances.push_back(unit_distance(positive(c, m), anchor(o)));
      pairs.is_match.push_back(0);
    }

    RankingQuery match_q;
    RankingQuery retr_q;
    for (std::size_t g = 0; g < n; ++g) {
      match_q.distances.push_back(unit_distance(anchor(c), positive(g, 0)));
      match_q.relevant.push_back(g == c ? 1 : 0);
      for (std::size_t m = 0; m < positives; ++m) {
        retr_q.distances.push_back(unit_distance(anchor(c), positive(g, m)));
        retr_q.relevant.push_back(g == c ? 1 : 0);
      }
    }

    for (std::size_t slot : {tier, std::size_t{3}}) {
      verification[slot].distances.insert(verification[slot].distances.end(), pairs.distances.begin(),
                                          pairs.distances.end());
      verification[slot].is_match.insert(verification[slot].is_match.end(), pairs.is_match.begin(),
                                         pairs.is_match.end());
      matching[slot].queries.push_back(match_q);
      retrieval[slot].queries.push_back(retr_q);
    }
  }

  std::vector<MetricRow> rows;
  for (std::size_t t = 0; t < kTiers.size(); ++t) {
    if (matching[t].queries.empty()) continue;
    const std::string tier(kTiers[t]);
    rows.push_back({"fpr95", fpr_at_recall(verification[t], options.recall), tier});
    rows.push_back({"matching_map", matching_map(matching[t]), tier});
    rows.push_back({"retrieval_map", retrieval_map(retrieval[t]), tier});
  }
  return rows;
}

double find_metric(std::span<const MetricRow> rows, std::string_view metric, std::string_view tier) {
  for (const auto& r : rows)
    if (r.metric == metric && r.tier == tier) return r.value;
  throw Error(ErrorKind::kEmptyInput, "no metric " + std::string(metric) + " for tier " + std::string(tier));
}

void write_metric_csv(std::ostream& out, std::span<const MetricRow> rows) {
  out << "metric,value,tier\n";
  out << std::setprecision(10);
  for (const auto& r : rows) out << r.metric << ',' << r.value << ',' << r.tier << '\n';
}

}  // namespace bdl
