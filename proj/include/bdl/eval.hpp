#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bdl/dataset.hpp"
#include "bdl/model.hpp"

namespace bdl {

struct VerificationSet {
  std::vector<double> distances;
  std::vector<std::uint8_t> is_match;
};

/// Candidates in gallery order; ranking is by ascending distance, ties to the
/// lower candidate index.
struct RankingQuery {
  std::vector<double> distances;
  std::vector<std::uint8_t> relevant;
};

struct RankingTask {
  std::vector<RankingQuery> queries;
};

/// Fraction of non-matches accepted at the smallest distance threshold that
/// accepts at least `recall` of the matches.
double fpr_at_recall(const VerificationSet& set, double recall);

/// Mean of 1 / rank of the single relevant candidate per query.
double matching_map(const RankingTask& task);

/// Mean over queries of the average precision at each relevant hit.
double retrieval_map(const RankingTask& task);

/// Expected matching mAP when the relevant item lands uniformly at random in a
/// gallery of `gallery_size`: H_n / n.
double chance_matching_map(std::size_t gallery_size);

struct MetricRow {
  std::string metric;
  double value = 0.0;
  std::string tier;
};

struct EvalOptions {
  double recall = 0.95;
  std::uint64_t seed = 7;
};

/// Embeds the given clusters and runs verification, matching and retrieval per
/// tier plus over all tiers ("all").
std::vector<MetricRow> evaluate(const DescriptorNet& net, const PatchDataset& dataset,
                                std::span<const std::int32_t> clusters, const EvalOptions& options = {});

double find_metric(std::span<const MetricRow> rows, std::string_view metric, std::string_view tier);

void write_metric_csv(std::ostream& out, std::span<const MetricRow> rows);

}  // namespace bdl
