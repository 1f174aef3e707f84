#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "synprobe/treebank.hpp"

namespace synprobe {

// Word-by-dimension activations for one sentence, stored as they are on disk.
using StateMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// HSB1 layout, all integers little-endian uint32:
//   "HSB1" | version(=1) | len + model_id bytes | len + parse_file bytes |
//   layer | dim | sentence_count | rows[sentence_count] | float32 payload
// The payload is every sentence matrix, row-major, concatenated in order.
struct HiddenStateSet {
  std::string model_id;
  std::string parse_file;  // name of the CoNLL-U file the rows align to
  std::uint32_t layer = 0;
  std::uint32_t dim = 0;
  std::vector<StateMatrix> sentences;

  std::size_t sentence_count() const { return sentences.size(); }
};

std::string serialize_hidden_states(const HiddenStateSet& set);
HiddenStateSet deserialize_hidden_states(std::string_view bytes);
void write_hidden_states(const std::string& path, const HiddenStateSet& set);
HiddenStateSet read_hidden_states(const std::string& path);

// Throws AlignmentError naming the first sentence whose row count differs
// from the parse's token count (or when the sentence counts differ).
void check_alignment(const HiddenStateSet& set, std::span<const SentenceParse> parses);

// layer_states - embedding_states, elementwise. Keeps layer_states.layer.
HiddenStateSet subtract_embeddings(const HiddenStateSet& layer_states,
                                   const HiddenStateSet& embedding_states);

class GloveTable {
 public:
  GloveTable() = default;
  explicit GloveTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }

  // Returns false (and keeps the existing vector) for duplicates.
  bool insert(std::string word, std::vector<float> vec);
  // Case-insensitive: the query is lowercased before lookup.
  std::optional<std::span<const float>> lookup(std::string_view word) const;

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<float>> entries_;
};

GloveTable parse_glove(std::string_view text);
GloveTable load_glove(const std::string& path);

std::string to_lower_ascii(std::string_view s);

// One exported split: a parse file and the per-layer HSB1 files aligned to it.
struct ManifestSplit {
  std::string name;
  std::string parse_file;
  std::map<std::uint32_t, std::string> layer_files;
};

// JSON manifest written by the extractor. Relative paths are resolved
// against the manifest's directory on load.
struct ExportManifest {
  std::string model_id;
  std::string architecture;  // decoder | encoder | encoder-decoder
  std::string stack;         // which stack's layers were exported
  std::string scoring;       // causal | pll
  std::string pooling = "mean";
  std::uint32_t num_layers = 0;
  std::uint32_t dim = 0;
  std::map<std::string, ManifestSplit> splits;
  std::string scores_file;
  std::map<std::string, std::string> checksums;  // path -> sha256 hex

  const ManifestSplit& split(const std::string& name) const;
  bool has_split(const std::string& name) const { return splits.count(name) != 0; }
};

ExportManifest load_manifest(const std::string& path);
// Verifies every listed checksum; throws FormatError on mismatch.
void verify_manifest_checksums(const ExportManifest& manifest);

}  // namespace synprobe
