#include "synprobe/outcomes.hpp"

#include <algorithm>
#include <charconv>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "synprobe/error.hpp"
#include "synprobe/hashing.hpp"

namespace synprobe {

namespace {

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const auto start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

std::string known_uids() {
  std::string out;
  for (const auto& p : paradigm_table()) {
    if (!out.empty()) out += ", ";
    out += p.uid;
  }
  return out;
}

}  // namespace

bool MinimalPair::outcome() const {
  if (!scored()) throw ValidationError("pair " + uid + "#" + std::to_string(pair_index) + " is unscored");
  return *logp_acc > *logp_unacc;
}

std::vector<MinimalPair> parse_blimp_jsonl(std::string_view text) {
  std::vector<MinimalPair> out;
  std::map<std::string, int> running;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    for (const char* field : {"sentence_good", "sentence_bad", "UID"}) {
      if (!j.contains(field) || !j[field].is_string()) {
        throw ParseError(std::string("missing field '") + field + "'", line_no);
      }
    }
    MinimalPair p;
    p.uid = j["UID"].get<std::string>();
    const auto phen = phenomenon_of(p.uid);
    if (!phen) {
      throw ValidationError("line " + std::to_string(line_no) + ": unknown paradigm UID '" + p.uid +
                            "'; known UIDs: " + known_uids());
    }
    p.phenomenon = std::string(*phen);
    p.sentence_good = j["sentence_good"].get<std::string>();
    p.sentence_bad = j["sentence_bad"].get<std::string>();
    int& counter = running[p.uid];
    if (j.contains("pairID")) {
      const auto& id = j["pairID"];
      p.pair_index = id.is_string() ? std::stoi(id.get<std::string>()) : id.get<int>();
    } else {
      p.pair_index = counter;
    }
    ++counter;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<MinimalPair> load_blimp(std::span<const std::string> paths) {
  std::vector<MinimalPair> out;
  for (const auto& path : paths) {
    try {
      auto part = parse_blimp_jsonl(read_file_bytes(path));
      out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    } catch (const ParseError& e) {
      throw ParseError(path + ": " + e.what(), e.line());
    }
  }
  return out;
}

BlimpCounts count_pairs(std::span<const MinimalPair> pairs) {
  BlimpCounts c;
  for (const auto& p : pairs) {
    ++c.per_paradigm[p.uid];
    ++c.per_phenomenon[p.phenomenon];
  }
  return c;
}

std::map<PairKey, PairScores> parse_score_csv(std::string_view text) {
  std::map<PairKey, PairScores> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (line.rfind("uid,", 0) == 0) continue;  // header
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (cols.size() != 4) throw ParseError("expected uid,pair_index,logp_acc,logp_unacc", line_no);
    try {
      out[{cols[0], std::stoi(cols[1])}] = {std::stod(cols[2]), std::stod(cols[3])};
    } catch (const std::exception&) {
      throw ParseError("bad numeric field", line_no);
    }
  }
  return out;
}

std::map<PairKey, PairScores> load_score_csv(const std::string& path) {
  return parse_score_csv(read_file_bytes(path));
}

std::size_t attach_scores(std::vector<MinimalPair>& pairs, const std::map<PairKey, PairScores>& scores) {
  std::size_t n = 0;
  for (auto& p : pairs) {
    const auto it = scores.find({p.uid, p.pair_index});
    if (it == scores.end()) continue;
    p.logp_acc = it->second.logp_acc;
    p.logp_unacc = it->second.logp_unacc;
    ++n;
  }
  return n;
}

double minimal_pair_accuracy(std::span<const MinimalPair> pairs) {
  if (pairs.empty()) throw ValidationError("no minimal pairs to score");
  std::size_t correct = 0;
  for (const auto& p : pairs) correct += p.outcome();
  return double(correct) / double(pairs.size());
}

CriticalKind critical_kind(std::string_view uid) {
  if (uid == "distractor_agreement_relational_noun" || uid == "distractor_agreement_relative_clause") {
    return CriticalKind::subject_verb;
  }
  if (uid == "wh_vs_that_with_gap" || uid == "wh_vs_that_with_gap_long_distance") {
    return CriticalKind::filler_gap;
  }
  throw ValidationError("paradigm '" + std::string(uid) + "' has no critical-edge definition");
}

bool has_critical_edge_definition(std::string_view uid) {
  const auto ps = critical_paradigms();
  return std::find(ps.begin(), ps.end(), uid) != ps.end();
}

std::optional<int> critical_token(const MinimalPair& pair, const SentenceParse& parse) {
  const auto good = split_ws(pair.sentence_good);
  const auto bad = split_ws(pair.sentence_bad);
  std::size_t k = 0;
  while (k < good.size() && k < bad.size() && good[k] == bad[k]) ++k;
  if (k >= good.size()) return std::nullopt;

  // Character offset of the differing word with whitespace removed, matched
  // against the concatenated parse forms. Tolerates tokenizers that split
  // punctuation or contractions off words.
  std::size_t offset = 0;
  for (std::size_t w = 0; w < k; ++w) offset += good[w].size();
  std::size_t acc = 0;
  for (const auto& t : parse.tokens()) {
    if (offset < acc + t.form.size()) {
      return offset == acc ? std::optional<int>(t.index) : std::nullopt;
    }
    acc += t.form.size();
  }
  return std::nullopt;
}

CriticalEdgeRecord find_critical_edge(const MinimalPair& pair, const SentenceParse& parse) {
  const CriticalKind kind = critical_kind(pair.uid);
  CriticalEdgeRecord rec;
  rec.uid = pair.uid;
  rec.pair_index = pair.pair_index;
  if (pair.scored()) rec.outcome = pair.outcome();

  const auto crit = critical_token(pair, parse);
  if (!crit) {
    rec.filter_reason = "critical word not found";
    return rec;
  }
  if (kind == CriticalKind::subject_verb) {
    for (const auto& t : parse.tokens()) {
      if (t.deprel == "nsubj" && t.head == *crit) {
        rec.edge = CriticalEdge{t.index, t.head, t.deprel};
        return rec;
      }
    }
    rec.filter_reason = "no nsubj edge attached to the critical verb";
    return rec;
  }
  const Token& wh = parse.token(*crit);
  if ((wh.deprel == "obj" || wh.deprel == "obl") && wh.head != 0) {
    rec.edge = CriticalEdge{wh.index, wh.head, wh.deprel};
    return rec;
  }
  rec.filter_reason = "wh-word is not an obj/obl dependent";
  return rec;
}

bool critical_hit(const CriticalEdge& edge, std::span<const UndirectedEdge> predicted) {
  const auto target = UndirectedEdge::of(edge.dependent, edge.head);
  return std::any_of(predicted.begin(), predicted.end(),
                     [&](const UndirectedEdge& e) { return UndirectedEdge::of(e.a, e.b) == target; });
}

bool critical_hit(const CriticalEdge& edge, std::span<const int> predicted_heads) {
  const auto idx = static_cast<std::size_t>(edge.dependent - 1);
  return idx < predicted_heads.size() && predicted_heads[idx] == edge.head;
}

CriticalMatchSummary critical_match_analysis(std::span<const CriticalEdgeRecord> records) {
  if (records.empty()) throw ValidationError("critical match analysis needs at least one record");
  CriticalMatchSummary s;
  std::size_t mismatches = 0, hits = 0, correct = 0;
  for (const auto& r : records) {
    if (r.filtered() || !r.probe_hit || !r.outcome) {
      throw ValidationError("record " + r.uid + "#" + std::to_string(r.pair_index) +
                            " is filtered or lacks probe_hit/outcome");
    }
    mismatches += *r.probe_hit != *r.outcome;
    hits += *r.probe_hit;
    correct += *r.outcome;
  }
  s.count = records.size();
  const double n = double(records.size());
  s.hamming = double(mismatches) / n;
  s.match_rate = 1.0 - s.hamming;
  s.probe_accuracy = double(hits) / n;
  s.outcome_accuracy = double(correct) / n;
  return s;
}

}  // namespace synprobe
