#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "synprobe/treebank.hpp"

namespace synprobe {

// Paradigm UID -> phenomenon table for the 67 BLiMP paradigms.
inline constexpr std::string_view kParadigmTableVersion = "blimp-v1-13phenomena";

struct ParadigmInfo {
  std::string_view uid;
  std::string_view phenomenon;
};

std::span<const ParadigmInfo> paradigm_table();
std::optional<std::string_view> phenomenon_of(std::string_view uid);
// Phenomena in table order (13 entries).
std::vector<std::string> phenomena();

struct MinimalPair {
  std::string uid;
  int pair_index = 0;  // position within its paradigm
  std::string phenomenon;
  std::string sentence_good;
  std::string sentence_bad;
  std::optional<double> logp_acc;
  std::optional<double> logp_unacc;

  bool scored() const { return logp_acc.has_value() && logp_unacc.has_value(); }
  // Strict: equal scores count as a failure. Throws if unscored.
  bool outcome() const;
};

// Reads BLiMP JSONL (fields sentence_good, sentence_bad, UID; pairID used as
// pair_index when present, otherwise the running count within the UID).
std::vector<MinimalPair> parse_blimp_jsonl(std::string_view text);
std::vector<MinimalPair> load_blimp(std::span<const std::string> paths);

struct BlimpCounts {
  std::map<std::string, std::size_t> per_paradigm;
  std::map<std::string, std::size_t> per_phenomenon;
};
BlimpCounts count_pairs(std::span<const MinimalPair> pairs);

using PairKey = std::pair<std::string, int>;  // (uid, pair_index)
struct PairScores {
  double logp_acc = 0;
  double logp_unacc = 0;
};

// CSV with header uid,pair_index,logp_acc,logp_unacc.
std::map<PairKey, PairScores> parse_score_csv(std::string_view text);
std::map<PairKey, PairScores> load_score_csv(const std::string& path);
// Copies scores onto matching pairs; returns the number of pairs scored.
std::size_t attach_scores(std::vector<MinimalPair>& pairs, const std::map<PairKey, PairScores>& scores);

// Mean outcome. Throws ValidationError naming the first unscored pair.
double minimal_pair_accuracy(std::span<const MinimalPair> pairs);

enum class CriticalKind { subject_verb, filler_gap };
// Throws ValidationError for paradigms without a critical-edge definition.
CriticalKind critical_kind(std::string_view uid);
bool has_critical_edge_definition(std::string_view uid);
std::span<const std::string_view> critical_paradigms();

struct CriticalEdge {
  int dependent = 0;  // 1-based tokens of the acceptable sentence's parse
  int head = 0;
  std::string relation;
};

struct CriticalEdgeRecord {
  std::string uid;
  int pair_index = 0;
  std::optional<CriticalEdge> edge;  // nullopt = filtered out
  std::string filter_reason;
  std::optional<bool> probe_hit;
  std::optional<bool> outcome;

  bool filtered() const { return !edge.has_value(); }
};

// Position (1-based parse token) of the first word where the acceptable
// and unacceptable sentences differ, or nullopt if they do not differ or the
// word cannot be aligned to the parse.
std::optional<int> critical_token(const MinimalPair& pair, const SentenceParse& acceptable_parse);

CriticalEdgeRecord find_critical_edge(const MinimalPair& pair, const SentenceParse& acceptable_parse);

// Undirected membership for the structural families (MST edges).
bool critical_hit(const CriticalEdge& edge, std::span<const UndirectedEdge> predicted);
// Directed membership for the headword probe (predicted head per token, 0 = ROOT).
bool critical_hit(const CriticalEdge& edge, std::span<const int> predicted_heads);

struct CriticalMatchSummary {
  std::size_t count = 0;
  double hamming = 0;
  double match_rate = 0;
  double probe_accuracy = 0;    // fraction of records with probe_hit
  double outcome_accuracy = 0;  // fraction of records with a correct outcome
};

// Throws ValidationError for an empty list or records that are filtered or
// lack probe_hit/outcome.
CriticalMatchSummary critical_match_analysis(std::span<const CriticalEdgeRecord> records);

}  // namespace synprobe
