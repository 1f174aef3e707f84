#include "synprobe/tensors.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "synprobe/error.hpp"
#include "synprobe/hashing.hpp"

namespace synprobe {

namespace {
constexpr char kHsbMagic[4] = {'H', 'S', 'B', '1'};
constexpr std::uint32_t kHsbVersion = 1;
}  // namespace

std::string serialize_hidden_states(const HiddenStateSet& set) {
  detail::ByteWriter w;
  w.put_bytes(kHsbMagic, 4);
  w.put<std::uint32_t>(kHsbVersion);
  w.put_string(set.model_id);
  w.put_string(set.parse_file);
  w.put<std::uint32_t>(set.layer);
  w.put<std::uint32_t>(set.dim);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(set.sentences.size()));
  for (const auto& m : set.sentences) {
    if (m.cols() != static_cast<Eigen::Index>(set.dim)) {
      throw ShapeError("sentence matrix has " + std::to_string(m.cols()) + " columns, set dim is " +
                       std::to_string(set.dim));
    }
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.rows()));
  }
  for (const auto& m : set.sentences) w.put_bytes(m.data(), sizeof(float) * m.size());
  return w.take();
}

HiddenStateSet deserialize_hidden_states(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kHsbMagic, 4) != 0) {
    throw FormatError("not an HSB1 file (magic mismatch)");
  }
  detail::ByteReader r(bytes.substr(4));
  const auto version = r.get<std::uint32_t>();
  if (version != kHsbVersion) throw FormatError("unsupported HSB1 version " + std::to_string(version));
  HiddenStateSet set;
  set.model_id = r.get_string();
  set.parse_file = r.get_string();
  set.layer = r.get<std::uint32_t>();
  set.dim = r.get<std::uint32_t>();
  const auto count = r.get<std::uint32_t>();
  std::vector<std::uint32_t> rows(count);
  std::uint64_t total_rows = 0;
  for (auto& n : rows) {
    n = r.get<std::uint32_t>();
    total_rows += n;
  }
  const std::uint64_t expected = total_rows * set.dim * sizeof(float);
  if (r.remaining() != expected) {
    throw TruncationError("header declares " + std::to_string(total_rows) + " rows of dim " +
                          std::to_string(set.dim) + " (" + std::to_string(expected) +
                          " bytes) but payload has " + std::to_string(r.remaining()) + " bytes");
  }
  set.sentences.reserve(count);
  for (auto n : rows) {
    StateMatrix m(n, set.dim);
    r.get_bytes(m.data(), sizeof(float) * m.size());
    set.sentences.push_back(std::move(m));
  }
  return set;
}

void write_hidden_states(const std::string& path, const HiddenStateSet& set) {
  const auto bytes = serialize_hidden_states(set);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path);
}

HiddenStateSet read_hidden_states(const std::string& path) {
  return deserialize_hidden_states(read_file_bytes(path));
}

void check_alignment(const HiddenStateSet& set, std::span<const SentenceParse> parses) {
  if (set.sentences.size() != parses.size()) {
    throw AlignmentError("hidden-state set has " + std::to_string(set.sentences.size()) +
                         " sentences but the parse file has " + std::to_string(parses.size()));
  }
  for (std::size_t s = 0; s < parses.size(); ++s) {
    const auto rows = static_cast<std::size_t>(set.sentences[s].rows());
    if (rows != parses[s].size()) {
      throw AlignmentError("matrix has " + std::to_string(rows) + " rows but the parse has " +
                               std::to_string(parses[s].size()) + " tokens",
                           s);
    }
  }
}

HiddenStateSet subtract_embeddings(const HiddenStateSet& layer_states,
                                   const HiddenStateSet& embedding_states) {
  if (embedding_states.layer != 0) {
    throw AlignmentError("embedding states must come from layer 0, got layer " +
                         std::to_string(embedding_states.layer));
  }
  if (layer_states.dim != embedding_states.dim) {
    throw AlignmentError("dim mismatch: " + std::to_string(layer_states.dim) + " vs " +
                         std::to_string(embedding_states.dim));
  }
  if (layer_states.sentences.size() != embedding_states.sentences.size()) {
    throw AlignmentError("sentence count mismatch: " + std::to_string(layer_states.sentences.size()) +
                         " vs " + std::to_string(embedding_states.sentences.size()));
  }
  HiddenStateSet out;
  out.model_id = layer_states.model_id;
  out.parse_file = layer_states.parse_file;
  out.layer = layer_states.layer;
  out.dim = layer_states.dim;
  out.sentences.reserve(layer_states.sentences.size());
  for (std::size_t s = 0; s < layer_states.sentences.size(); ++s) {
    const auto& a = layer_states.sentences[s];
    const auto& b = embedding_states.sentences[s];
    if (a.rows() != b.rows()) {
      throw AlignmentError("row count mismatch " + std::to_string(a.rows()) + " vs " +
                               std::to_string(b.rows()),
                           s);
    }
    out.sentences.emplace_back(a - b);
  }
  return out;
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool GloveTable::insert(std::string word, std::vector<float> vec) {
  if (vec.size() != dim_) throw FormatError("vector for '" + word + "' has wrong dim");
  return entries_.try_emplace(std::move(word), std::move(vec)).second;
}

std::optional<std::span<const float>> GloveTable::lookup(std::string_view word) const {
  const auto it = entries_.find(to_lower_ascii(word));
  if (it == entries_.end()) return std::nullopt;
  return std::span<const float>(it->second);
}

GloveTable parse_glove(std::string_view text) {
  GloveTable table;
  bool have_dim = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    const auto sp = line.find(' ');
    if (sp == std::string_view::npos || sp == 0) throw ParseError("expected a word followed by floats", line_no);
    std::string word(line.substr(0, sp));
    std::vector<float> vec;
    std::size_t p = sp;
    while (p < line.size()) {
      while (p < line.size() && line[p] == ' ') ++p;
      if (p >= line.size()) break;
      auto end = line.find(' ', p);
      if (end == std::string_view::npos) end = line.size();
      float v = 0;
      auto [ptr, ec] = std::from_chars(line.data() + p, line.data() + end, v);
      if (ec != std::errc() || ptr != line.data() + end) {
        throw ParseError("bad float '" + std::string(line.substr(p, end - p)) + "'", line_no);
      }
      vec.push_back(v);
      p = end;
    }
    if (!have_dim) {
      if (vec.empty()) throw ParseError("line has no vector components", line_no);
      table = GloveTable(vec.size());
      have_dim = true;
    } else if (vec.size() != table.dim()) {
      throw ParseError("inconsistent dimension " + std::to_string(vec.size()) + " (expected " +
                           std::to_string(table.dim()) + ")",
                       line_no);
    }
    table.insert(to_lower_ascii(word), std::move(vec));
  }
  return table;
}

GloveTable load_glove(const std::string& path) { return parse_glove(read_file_bytes(path)); }

const ManifestSplit& ExportManifest::split(const std::string& name) const {
  const auto it = splits.find(name);
  if (it == splits.end()) throw ValidationError("manifest for " + model_id + " has no split '" + name + "'");
  return it->second;
}

ExportManifest load_manifest(const std::string& path) {
  namespace fs = std::filesystem;
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    const fs::path fp(p);
    return (fp.is_absolute() ? fp : base / fp).lexically_normal().string();
  };
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file_bytes(path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest " + path + ": " + e.what());
  }
  ExportManifest m;
  try {
    m.model_id = j.at("model_id").get<std::string>();
    m.architecture = j.value("architecture", "decoder");
    m.stack = j.value("stack", m.architecture == "encoder-decoder" ? "encoder" : m.architecture);
    m.scoring = j.value("scoring", m.architecture == "decoder" ? "causal" : "pll");
    m.pooling = j.value("pooling", "mean");
    m.num_layers = j.at("num_layers").get<std::uint32_t>();
    m.dim = j.at("dim").get<std::uint32_t>();
    for (const auto& e : j.at("exports")) {
      ManifestSplit s;
      s.name = e.at("split").get<std::string>();
      s.parse_file = resolve(e.at("parse_file").get<std::string>());
      for (const auto& [layer, file] : e.at("layers").items()) {
        s.layer_files[static_cast<std::uint32_t>(std::stoul(layer))] = resolve(file.get<std::string>());
      }
      m.splits[s.name] = std::move(s);
    }
    if (j.contains("scores_file")) m.scores_file = resolve(j["scores_file"].get<std::string>());
    if (j.contains("checksums")) {
      for (const auto& [file, sum] : j["checksums"].items()) m.checksums[resolve(file)] = sum.get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest " + path + ": " + e.what());
  }
  for (const auto& [name, split] : m.splits) {
    for (std::uint32_t l = 0; l <= m.num_layers; ++l) {
      if (!split.layer_files.count(l)) {
        throw FormatError("manifest " + path + ": split '" + name + "' lacks layer " + std::to_string(l));
      }
    }
  }
  return m;
}

void verify_manifest_checksums(const ExportManifest& manifest) {
  for (const auto& [file, expected] : manifest.checksums) {
    const auto actual = sha256_file(file);
    if (actual != expected) throw FormatError("checksum mismatch for " + file);
  }
}

}  // namespace synprobe
