#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "synprobe/probes.hpp"
#include "synprobe/treebank.hpp"

namespace synprobe {

// Structural/orthogonal: squared norm of g(h_i - h_j). Headword/control:
// the plain L2 norm.
Eigen::MatrixXd predicted_distance_matrix(const ProbeParams& params, const Eigen::MatrixXd& states);

// Prim's algorithm over the non-punctuation tokens, starting from the lowest
// index; ties are broken by (weight, lower endpoint, higher endpoint).
// Returned edges use 1-based token indices.
std::vector<UndirectedEdge> extract_mst(const Eigen::MatrixXd& distances, const std::vector<bool>& punct_mask);

// Gold edges scored by UUAS: non-root arcs between two non-punctuation tokens.
std::vector<UndirectedEdge> uuas_gold_edges(const SentenceParse& parse);

// |predicted ∩ gold| / |gold|; 1.0 when the gold set is empty.
double score_uuas(std::span<const UndirectedEdge> predicted, const SentenceParse& parse);

// Headword probe: fraction of tokens (punctuation included) whose argmax
// candidate equals the gold head, ROOT counted as a candidate.
double score_uas(const ProbeParams& params, const Eigen::MatrixXd& states, const SentenceParse& parse);

// Pearson correlation of average ranks. nullopt when fewer than two points
// or either side has zero rank variance.
std::optional<double> spearman_rho(std::span<const double> xs, std::span<const double> ys);

// Control probe rho_s on one sentence's control pairs.
std::optional<double> control_rho(const ProbeParams& params, const ProbeExample& example);

struct ControlVarianceReport {
  double mean_variance_before = 0;
  double mean_variance_after = 0;
  std::size_t words_used = 0;
  std::size_t words_skipped = 0;
};

// contexts[w] holds one hidden vector per sentence context of word w.
ControlVarianceReport control_variance_report(const std::vector<std::vector<Eigen::VectorXd>>& contexts,
                                              const ProbeParams& params);

enum class MetricKind { uuas, uas, spearman_rho };
std::string metric_name(MetricKind kind);

struct SentenceScore {
  std::string sentence_id;
  double score = 0;
  bool degenerate = false;  // empty gold set (UUAS) or undefined correlation
};

struct ProbeEvalSummary {
  MetricKind kind = MetricKind::uuas;
  std::vector<SentenceScore> per_sentence;
  double aggregate = 0;  // mean over non-degenerate-for-rho sentences

  std::string to_csv() const;
  std::string aggregate_json() const;
};

// Scores every sentence with the probe's native metric: UUAS for the
// structural families, UAS for headword, rho_s for control. Control
// sentences with undefined correlation are flagged and left out of the mean.
ProbeEvalSummary evaluate_probe(const ProbeParams& params, std::span<const SentenceParse> parses,
                                std::span<const ProbeExample> examples);

MetricKind native_metric(ProbeFamily family);

}  // namespace synprobe
