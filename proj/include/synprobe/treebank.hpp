#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace synprobe {

inline constexpr std::size_t kMaxSentenceLength = 512;

struct Token {
  int index = 0;  // 1-based position among syntactic words
  std::string form;
  std::string upos;
  std::string xpos;
  int head = 0;  // 0 = ROOT
  std::string deprel;
  bool is_punct = false;
};

// Unordered edge between two 1-based token indices, stored with a < b.
struct UndirectedEdge {
  int a = 0;
  int b = 0;

  static UndirectedEdge of(int x, int y) {
    return x < y ? UndirectedEdge{x, y} : UndirectedEdge{y, x};
  }
  auto operator<=>(const UndirectedEdge&) const = default;
};

// Directed dependency arc, child -> head, both 1-based (head never ROOT).
struct DependencyArc {
  int child = 0;
  int head = 0;
  auto operator<=>(const DependencyArc&) const = default;
};

class SentenceParse {
 public:
  SentenceParse() = default;
  // Validates the head structure and computes all pairwise tree distances.
  // Throws StructureError on cycles, out-of-range heads or over-long input.
  SentenceParse(std::string id, std::string text, std::vector<Token> tokens);

  const std::string& id() const { return id_; }
  const std::string& text() const { return text_; }
  const std::vector<Token>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }
  const Token& token(int index) const { return tokens_.at(index - 1); }

  // Tree distance between 1-based indices i and j.
  int distance(int i, int j) const {
    return distances_[static_cast<std::size_t>(i - 1) * size() + (j - 1)];
  }
  const std::vector<std::uint16_t>& distance_matrix() const { return distances_; }

  // Non-root arcs (child, head).
  const std::vector<DependencyArc>& gold_arcs() const { return gold_arcs_; }
  std::vector<UndirectedEdge> gold_edges() const;
  int root_count() const { return root_count_; }
  std::vector<bool> punct_mask() const;
  std::vector<std::string> forms() const;

  // Every "# key = value" comment of the block, including sent_id and text.
  const std::map<std::string, std::string>& metadata() const { return metadata_; }
  void set_metadata(std::map<std::string, std::string> meta) { metadata_ = std::move(meta); }

 private:
  std::string id_;
  std::string text_;
  std::vector<Token> tokens_;
  std::vector<std::uint16_t> distances_;
  std::vector<DependencyArc> gold_arcs_;
  int root_count_ = 0;
  std::map<std::string, std::string> metadata_;
};

// Parses a CoNLL-U document. Multiword-token ranges and empty nodes are
// skipped. "# sent_id" and "# text" comments populate id() and text(); a
// sentence without sent_id gets its 0-based ordinal as id.
std::vector<SentenceParse> parse_conllu(std::string_view text);
std::vector<SentenceParse> read_conllu_file(const std::string& path);
// Inverse of parse_conllu for the columns this library keeps; LEMMA, FEATS,
// DEPS and MISC are written as "_".
std::string write_conllu(std::span<const SentenceParse> parses);

int tree_distance(const SentenceParse& parse, int i, int j);

// All pairs (i, j), i < j, with identical XPOS. 1-based.
std::vector<std::pair<int, int>> same_xpos_pairs(const SentenceParse& parse);

}  // namespace synprobe
