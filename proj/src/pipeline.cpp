#include "synprobe/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "synprobe/hashing.hpp"
#include "synprobe/log.hpp"
#include "synprobe/parse_metrics.hpp"

namespace synprobe {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// Bumped whenever trained-probe semantics change so stale caches miss.
constexpr const char* kCacheFormat = "synprobe-cache-v1";

std::string resolve(const std::string& base, const std::string& p) {
  const fs::path fp(p);
  return (fp.is_absolute() ? fp : fs::path(base) / fp).lexically_normal().string();
}

const nlohmann::json& require(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key)) throw ValidationError(std::string("config: missing required field '") + key + "'");
  return doc.at(key);
}

std::string label_file(const std::string& label) {
  std::string out = label;
  std::replace(out.begin(), out.end(), '@', '-');
  return out;
}

std::string opt_bool(const std::optional<bool>& b) { return b ? (*b ? "1" : "0") : ""; }

ojson parse_ordered(const std::string& text) { return ojson::parse(text); }

ojson train_config_json(const TrainConfig& c) {
  ojson j;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["lr"] = format_stat(c.lr);
  j["warmup_frac"] = format_stat(c.warmup_frac);
  j["linear_decay"] = c.linear_decay;
  j["weight_decay"] = format_stat(c.weight_decay);
  j["lambda_o"] = format_stat(c.lambda_o);
  j["huber_delta"] = format_stat(c.huber_delta);
  j["rank"] = c.rank;
  j["beta1"] = format_stat(c.beta1);
  j["beta2"] = format_stat(c.beta2);
  j["eps"] = format_stat(c.eps);
  j["seed"] = c.seed;
  return j;
}

const std::vector<ProbeFamily>& syntax_families() {
  static const std::vector<ProbeFamily> f = {ProbeFamily::structural, ProbeFamily::headword,
                                             ProbeFamily::orthogonal};
  return f;
}

std::string pair_sentence_id(const std::string& uid, int index) { return uid + ":" + std::to_string(index); }

}  // namespace

// ---------------------------------------------------------------------------
// Config

void apply_train_overrides(TrainConfig& c, const nlohmann::json& o) {
  if (!o.is_object()) throw ValidationError("training overrides must be an object");
  for (const auto& [key, val] : o.items()) {
    try {
      if (key == "batch_size") c.batch_size = val.get<int>();
      else if (key == "max_epochs") c.max_epochs = val.get<int>();
      else if (key == "patience") c.patience = val.get<int>();
      else if (key == "lr") c.lr = val.get<double>();
      else if (key == "warmup_frac") c.warmup_frac = val.get<double>();
      else if (key == "linear_decay") c.linear_decay = val.get<bool>();
      else if (key == "weight_decay") c.weight_decay = val.get<double>();
      else if (key == "lambda_o") c.lambda_o = val.get<double>();
      else if (key == "huber_delta") c.huber_delta = val.get<double>();
      else if (key == "rank") c.rank = val.get<int>();
      else if (key == "beta1") c.beta1 = val.get<double>();
      else if (key == "beta2") c.beta2 = val.get<double>();
      else if (key == "eps") c.eps = val.get<double>();
      else throw ValidationError("unknown training option '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("training option '" + key + "': " + e.what());
    }
  }
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& doc, const std::string& base_dir) {
  if (!doc.is_object()) throw ValidationError("config must be a JSON object");
  PipelineConfig c;
  c.base_dir = base_dir;
  try {
    c.output_dir = resolve(base_dir, doc.value("output_dir", std::string("out")));
    if (doc.contains("seed")) {
      if (!doc["seed"].is_number_integer() || doc["seed"].get<long long>() < 0) {
        throw ValidationError("config: seed must be a non-negative integer");
      }
      c.seed = doc["seed"].get<std::uint64_t>();
    }
    const auto& tb = require(doc, "treebank");
    c.train_parses = resolve(base_dir, require(tb, "train").get<std::string>());
    c.dev_parses = resolve(base_dir, require(tb, "dev").get<std::string>());
    c.test_parses = resolve(base_dir, require(tb, "test").get<std::string>());
    for (const auto& m : require(doc, "models")) c.model_manifests.push_back(resolve(base_dir, m.get<std::string>()));
    if (doc.contains("glove") && !doc["glove"].is_null()) c.glove = resolve(base_dir, doc["glove"].get<std::string>());
    const auto& blimp = require(doc, "blimp");
    for (const auto& f : require(blimp, "pairs")) c.blimp_pairs.push_back(resolve(base_dir, f.get<std::string>()));
    c.blimp_parses = resolve(base_dir, require(blimp, "parses").get<std::string>());
    if (doc.contains("scores")) {
      for (const auto& [model, path] : doc["scores"].items()) {
        c.score_overrides[model] = resolve(base_dir, path.get<std::string>());
      }
    }
    if (doc.contains("contexts") && !doc["contexts"].is_null()) {
      c.contexts = resolve(base_dir, doc["contexts"].get<std::string>());
    }
    if (doc.contains("probes")) {
      for (const auto& p : doc["probes"]) c.probes.push_back(parse_family(p.get<std::string>()));
    } else {
      c.probes = {ProbeFamily::structural, ProbeFamily::headword, ProbeFamily::orthogonal, ProbeFamily::control};
    }
    if (doc.contains("granularities")) {
      for (const auto& g : doc["granularities"]) c.granularities.push_back(parse_granularity(g.get<std::string>()));
    } else {
      c.granularities = {Granularity::full, Granularity::phenomenon, Granularity::paradigm};
    }
    if (doc.contains("aggregation")) c.aggregation = parse_aggregation(doc["aggregation"].get<std::string>());
    if (doc.contains("training")) c.training = doc["training"];
    if (doc.contains("training_per_family")) {
      for (const auto& [fam, o] : doc["training_per_family"].items()) c.training_per_family[parse_family(fam)] = o;
    }
    if (doc.contains("layers")) {
      for (const auto& l : doc["layers"]) c.layers.push_back(l.get<int>());
    }
    c.verify_checksums = doc.value("verify_checksums", true);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.raw = doc;
  c.raw.erase("output_dir");
  return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  if (!fs::exists(path)) throw ValidationError("config file not found: " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file_bytes(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config " + path + ": " + e.what());
  }
  return from_json(doc, fs::absolute(path).parent_path().string());
}

bool PipelineConfig::wants(ProbeFamily f) const { return std::find(probes.begin(), probes.end(), f) != probes.end(); }

TrainConfig PipelineConfig::train_config(ProbeFamily family) const {
  TrainConfig c = TrainConfig::defaults_for(family);
  apply_train_overrides(c, training);
  if (auto it = training_per_family.find(family); it != training_per_family.end()) apply_train_overrides(c, it->second);
  c.seed = seed;
  return c;
}

void PipelineConfig::validate() const {
  if (probes.empty()) throw ValidationError("config: no probes requested");
  if (granularities.empty()) throw ValidationError("config: no granularities requested");
  if (model_manifests.empty()) throw ValidationError("config: no models listed");
  if (wants(ProbeFamily::orthogonal) && !wants(ProbeFamily::structural)) {
    throw ValidationError("config: the orthogonal probe is trained at the structural probe's best layer; "
                          "request 'structural' as well");
  }
  if (wants(ProbeFamily::control)) {
    if (!wants(ProbeFamily::structural) && !wants(ProbeFamily::headword)) {
      throw ValidationError("config: the control probe needs 'structural' or 'headword' to pick its layers");
    }
    if (glove.empty()) throw ValidationError("config: control probe requested but no GloVe path given");
    if (!fs::exists(glove)) throw ValidationError("config: GloVe file not found: " + glove);
  }
  auto must_exist = [](const std::string& what, const std::string& path) {
    if (!fs::exists(path)) throw ValidationError("config: " + what + " not found: " + path);
  };
  must_exist("train parses", train_parses);
  must_exist("dev parses", dev_parses);
  must_exist("test parses", test_parses);
  must_exist("BLiMP parses", blimp_parses);
  for (const auto& p : blimp_pairs) must_exist("BLiMP pairs", p);
  for (const auto& m : model_manifests) must_exist("model manifest", m);
  for (const auto& [model, p] : score_overrides) must_exist("score file for " + model, p);
  if (!contexts.empty()) must_exist("contexts", contexts);
  for (int l : layers) {
    if (l < 1) throw ValidationError("config: layers must be >= 1 (layer 0 is zero after embedding subtraction)");
  }
  for (auto f : probes) {
    try {
      train_config(f).validate();
    } catch (const Error& e) {
      throw ValidationError(std::string("config: training for ") + std::string(family_name(f)) + ": " + e.what());
    }
  }
}

std::string ProbeSlot::label() const {
  std::string s(family_name(family));
  if (anchor) s += "@" + std::string(family_name(*anchor));
  return s;
}

// ---------------------------------------------------------------------------
// Pipeline setup

namespace {

std::vector<std::string> hashed_inputs(const PipelineConfig& c, const std::vector<ExportManifest>& manifests) {
  std::set<std::string> files = {c.train_parses, c.dev_parses, c.test_parses, c.blimp_parses};
  files.insert(c.blimp_pairs.begin(), c.blimp_pairs.end());
  files.insert(c.model_manifests.begin(), c.model_manifests.end());
  if (!c.glove.empty()) files.insert(c.glove);
  if (!c.contexts.empty()) files.insert(c.contexts);
  for (const auto& [m, p] : c.score_overrides) files.insert(p);
  for (const auto& m : manifests) {
    if (!m.scores_file.empty()) files.insert(m.scores_file);
    for (const auto& [name, split] : m.splits) {
      for (const auto& [l, f] : split.layer_files) files.insert(f);
    }
  }
  return {files.begin(), files.end()};
}

std::string hash_config(const PipelineConfig& c, const std::vector<ExportManifest>& manifests,
                        const std::function<std::string(const std::string&)>& hash_of) {
  ojson h;
  h["format"] = kCacheFormat;
  h["config"] = c.raw;
  ojson files = ojson::object();
  for (const auto& f : hashed_inputs(c, manifests)) {
    files[fs::path(f).lexically_relative(c.base_dir).generic_string()] = fs::exists(f) ? hash_of(f) : "missing";
  }
  h["files"] = files;
  return sha256_hex(h.dump());
}

}  // namespace

std::string compute_config_hash(const PipelineConfig& config) {
  std::vector<ExportManifest> manifests;
  for (const auto& m : config.model_manifests) manifests.push_back(load_manifest(m));
  return hash_config(config, manifests, [](const std::string& p) { return sha256_file(p); });
}

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {
  config_.validate();
  std::set<std::string> ids;
  for (const auto& path : config_.model_manifests) {
    ExportManifest m;
    try {
      m = load_manifest(path);
      if (config_.verify_checksums) verify_manifest_checksums(m);
    } catch (const FormatError& e) {
      throw ValidationError(e.what());
    }
    if (!ids.insert(m.model_id).second) throw ValidationError("duplicate model id " + m.model_id);
    std::vector<std::string> need = {"train", "dev", "test", "blimp"};
    if (!config_.contexts.empty()) need.push_back("contexts");
    for (const auto& s : need) {
      if (!m.has_split(s)) throw ValidationError("manifest " + path + " lacks split '" + s + "'");
    }
    for (int l : config_.layers) {
      if (std::uint32_t(l) > m.num_layers) {
        throw ValidationError("layer " + std::to_string(l) + " exceeds " + m.model_id + "'s " +
                              std::to_string(m.num_layers) + " layers");
      }
    }
    const bool has_override = config_.score_overrides.count(m.model_id) != 0;
    if (!has_override && m.scores_file.empty()) {
      throw ValidationError("no score file for model " + m.model_id);
    }
    if (!has_override && !fs::exists(m.scores_file)) throw ValidationError("score file not found: " + m.scores_file);
    manifests_.push_back(std::move(m));
  }
  provenance_.config_hash = hash_config(config_, manifests_, [this](const std::string& p) { return file_hash(p); });
  provenance_.seed = config_.seed;

  fs::create_directories(config_.output_dir);
  lock_path_ = (fs::path(config_.output_dir) / ".synprobe.lock").string();
  const int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    const std::string why = errno == EEXIST ? "is locked by another run (" + lock_path_ + ")" : std::strerror(errno);
    lock_path_.clear();
    throw StageError("lock", "artifact directory " + config_.output_dir + " " + why);
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

Pipeline::~Pipeline() {
  if (!lock_path_.empty()) {
    std::error_code ec;
    fs::remove(lock_path_, ec);
  }
}

template <typename F>
void Pipeline::stage(const std::string& name, bool& done, F&& body) {
  if (done) return;
  try {
    body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
  done = true;
}

const std::string& Pipeline::file_hash(const std::string& path) {
  auto it = hashes_.find(path);
  if (it == hashes_.end()) it = hashes_.emplace(path, sha256_file(path)).first;
  return it->second;
}

const ExportManifest& Pipeline::manifest(std::size_t m) { return manifests_.at(m); }

const GloveTable* Pipeline::glove() {
  if (config_.glove.empty()) return nullptr;
  if (!glove_) glove_ = load_glove(config_.glove);
  return &*glove_;
}

const std::vector<SentenceParse>& Pipeline::parses(const std::string& which) {
  auto it = parses_.find(which);
  if (it != parses_.end()) return it->second;
  std::string path;
  if (which == "train") path = config_.train_parses;
  else if (which == "dev") path = config_.dev_parses;
  else if (which == "test") path = config_.test_parses;
  else if (which == "blimp") path = config_.blimp_parses;
  else if (which == "contexts") path = config_.contexts;
  else throw Error("unknown split " + which);
  return parses_.emplace(which, read_conllu_file(path)).first->second;
}

const std::vector<MinimalPair>& Pipeline::blimp_pairs() {
  if (!pairs_) pairs_ = load_blimp(config_.blimp_pairs);
  return *pairs_;
}

HiddenStateSet Pipeline::load_states(std::size_t m, const std::string& split, int layer) {
  const auto& man = manifest(m);
  const auto& s = man.split(split);
  const auto& ps = parses(split);
  auto read = [&](std::uint32_t l) {
    auto set = read_hidden_states(s.layer_files.at(l));
    if (set.dim != man.dim) {
      throw AlignmentError(s.layer_files.at(l) + ": dim " + std::to_string(set.dim) + " but manifest says " +
                           std::to_string(man.dim));
    }
    check_alignment(set, ps);
    return set;
  };
  const auto base = read(0);
  const auto states = read(std::uint32_t(layer));
  return subtract_embeddings(states, base);
}

std::string Pipeline::probe_path(const std::string& model_id, const std::string& label, int layer,
                                 const std::string& ext) const {
  return (fs::path(config_.output_dir) / "probes" / model_id / (label + "-L" + std::to_string(layer) + ext)).string();
}

void Pipeline::write_file(const std::string& relative, const std::string& content) {
  const fs::path p = fs::path(config_.output_dir) / relative;
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << content;
  if (!out) throw Error("write failed for " + p.string());
}

// ---------------------------------------------------------------------------
// train-probe

ProbeCheckpoint Pipeline::train_or_load(std::size_t m, ProbeFamily family, int layer, const std::string& label) {
  const auto& man = manifest(m);
  TrainConfig cfg = config_.train_config(family);
  cfg.seed = seed_from_label(std::to_string(config_.seed) + "|" + man.model_id + "|" + std::string(family_name(family)) +
                             "|" + std::to_string(layer));

  ojson key;
  key["format"] = kCacheFormat;
  key["model_id"] = man.model_id;
  key["family"] = family_name(family);
  key["layer"] = layer;
  key["train"] = train_config_json(cfg);
  for (const char* split : {"train", "dev"}) {
    const auto& s = man.split(split);
    const auto& parse_file = std::string(split) == "train" ? config_.train_parses : config_.dev_parses;
    key["inputs"][split] = {file_hash(parse_file), file_hash(s.layer_files.at(0)),
                            file_hash(s.layer_files.at(std::uint32_t(layer)))};
  }
  if (family == ProbeFamily::control) key["glove"] = file_hash(config_.glove);
  const std::string cache_key = sha256_hex(key.dump());

  ojson prov = provenance_.object();
  prov["cache_key"] = cache_key;
  const auto prb = probe_path(man.model_id, label, layer, ".prb");
  const auto log_path = probe_path(man.model_id, label, layer, ".log.jsonl");
  auto write_all = [&](ProbeCheckpoint& ck) {
    ck.provenance = prov.dump();
    fs::create_directories(fs::path(prb).parent_path());
    write_checkpoint(prb, ck);
    std::ofstream(log_path, std::ios::binary) << prov.dump() << "\n" << training_log_jsonl(ck.log);
  };

  if (fs::exists(prb)) {
    try {
      auto ck = read_checkpoint(prb);
      const auto old = nlohmann::json::parse(ck.provenance);
      if (old.value("cache_key", "") == cache_key) {
        if (old.value("config_hash", "") != provenance_.config_hash || !fs::exists(log_path)) write_all(ck);
        return ck;
      }
    } catch (const std::exception& e) {
      log_warning("ignoring unreadable cached probe " + prb + ": " + e.what());
    }
  }

  const auto train_states = load_states(m, "train", layer);
  const auto dev_states = load_states(m, "dev", layer);
  const GloveTable* g = family == ProbeFamily::control ? glove() : nullptr;
  const auto train = make_examples(parses("train"), train_states, g);
  const auto dev = make_examples(parses("dev"), dev_states, g);
  auto result = train_probe(family, train, dev, cfg);
  ProbeCheckpoint ck;
  ck.params = std::move(result.params);
  ck.config = cfg;
  ck.log = std::move(result.log);
  ck.best_epoch = result.best_epoch;
  ck.layer = layer;
  ck.model_id = man.model_id;
  write_all(ck);
  return ck;
}

void Pipeline::train_probes() {
  stage("train-probe", trained_, [&] {
    probes_.clear();
    for (std::size_t m = 0; m < manifests_.size(); ++m) {
      const auto& man = manifest(m);
      ModelProbes mp;
      mp.model_id = man.model_id;
      std::vector<int> layers = config_.layers;
      if (layers.empty()) {
        for (std::uint32_t l = 1; l <= man.num_layers; ++l) layers.push_back(int(l));
      }
      const auto& test = parses("test");
      ojson sel = provenance_.object();
      sel["model_id"] = man.model_id;
      sel["architecture"] = man.architecture;
      sel["stack"] = man.stack;
      sel["scoring"] = man.scoring;

      auto test_metric = [&](const ProbeParams& params, int layer) {
        const auto states = load_states(m, "test", layer);
        const GloveTable* g = params.family == ProbeFamily::control ? glove() : nullptr;
        return evaluate_probe(params, test, make_examples(test, states, g)).aggregate;
      };

      std::map<ProbeFamily, int> best;
      for (auto fam : {ProbeFamily::structural, ProbeFamily::headword}) {
        if (!config_.wants(fam)) continue;
        LayerSweep sweep;
        sweep.family = fam;
        std::map<int, ProbeCheckpoint> ckpts;
        ojson per_layer = ojson::array();
        for (int l : layers) {
          auto ck = train_or_load(m, fam, l, std::string(family_name(fam)));
          const double metric = test_metric(ck.params, l);
          sweep.test_metrics.push_back({l, metric});
          per_layer.push_back({{"layer", l}, {"test_metric", format_stat(metric)}, {"best_epoch", ck.best_epoch}});
          ckpts.emplace(l, std::move(ck));
        }
        sweep.best_layer = select_best_layer(sweep.test_metrics);
        best[fam] = sweep.best_layer;
        ProbeSlot slot{fam, std::nullopt, sweep.best_layer};
        mp.probes[slot.label()] = std::move(ckpts.at(sweep.best_layer));
        mp.slots.push_back(slot);
        mp.sweeps.push_back(sweep);
        sel[std::string(family_name(fam))] = {{"metric", metric_name(native_metric(fam))},
                                              {"layers", per_layer},
                                              {"best_layer", sweep.best_layer}};
      }
      auto single = [&](ProbeFamily fam, std::optional<ProbeFamily> anchor, int layer) {
        ProbeSlot slot{fam, anchor, layer};
        auto ck = train_or_load(m, fam, layer, std::string(family_name(fam)));
        const double metric = test_metric(ck.params, layer);
        sel[slot.label()] = {{"metric", metric_name(native_metric(fam))},
                             {"layer", layer},
                             {"test_metric", format_stat(metric)},
                             {"best_epoch", ck.best_epoch}};
        mp.probes[slot.label()] = std::move(ck);
        mp.slots.push_back(slot);
      };
      if (config_.wants(ProbeFamily::orthogonal)) single(ProbeFamily::orthogonal, std::nullopt, best.at(ProbeFamily::structural));
      if (config_.wants(ProbeFamily::control)) {
        for (auto anchor : {ProbeFamily::structural, ProbeFamily::headword}) {
          if (best.count(anchor)) single(ProbeFamily::control, anchor, best.at(anchor));
        }
      }
      write_file("probes/" + man.model_id + "/selection.json", sel.dump(2) + "\n");
      probes_.push_back(std::move(mp));
    }
  });
}

const std::vector<ModelProbes>& Pipeline::model_probes() {
  train_probes();
  return probes_;
}

// ---------------------------------------------------------------------------
// eval-probe

void Pipeline::eval_probes() {
  train_probes();
  stage("eval-probe", evaluated_, [&] {
    const auto& bparses = parses("blimp");
    for (std::size_t m = 0; m < manifests_.size(); ++m) {
      const auto& mp = probes_[m];
      std::map<int, HiddenStateSet> by_layer;
      for (const auto& slot : mp.slots) {
        if (!by_layer.count(slot.layer)) by_layer.emplace(slot.layer, load_states(m, "blimp", slot.layer));
        const auto& ck = mp.probes.at(slot.label());
        const GloveTable* g = slot.family == ProbeFamily::control ? glove() : nullptr;
        const auto examples = make_examples(bparses, by_layer.at(slot.layer), g);
        auto summary = evaluate_probe(ck.params, bparses, examples);
        const std::string base = "eval/" + mp.model_id + "/" + label_file(slot.label());
        write_file(base + ".csv", provenance_.csv_comment() + "\n" + summary.to_csv());
        ojson agg = provenance_.object();
        agg["model_id"] = mp.model_id;
        agg["probe"] = slot.label();
        agg["layer"] = slot.layer;
        const auto parsed = parse_ordered(summary.aggregate_json());
        for (const auto& [k, v] : parsed.items()) agg[k] = v;
        agg["aggregate"] = format_stat(summary.aggregate);
        write_file(base + ".json", agg.dump(2) + "\n");
        blimp_eval_[mp.model_id][slot.label()] = std::move(summary);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// score-join

void Pipeline::score_join() {
  eval_probes();
  stage("score-join", joined_done_, [&] {
    for (std::size_t m = 0; m < manifests_.size(); ++m) {
      const auto& man = manifest(m);
      const auto& mp = probes_[m];
      auto pairs = blimp_pairs();
      const auto it = config_.score_overrides.find(man.model_id);
      const auto scores = load_score_csv(it != config_.score_overrides.end() ? it->second : man.scores_file);
      const auto scored = attach_scores(pairs, scores);
      if (scored < pairs.size()) {
        log_warning(man.model_id + ": " + std::to_string(pairs.size() - scored) + " of " +
                    std::to_string(pairs.size()) + " pairs have no scores");
      }
      std::map<std::string, std::map<std::string, std::optional<double>>> by_sentence;  // id -> label -> score
      for (const auto& slot : mp.slots) {
        for (const auto& s : blimp_eval_.at(mp.model_id).at(slot.label()).per_sentence) {
          const bool undefined = slot.family == ProbeFamily::control && s.degenerate;
          by_sentence[s.sentence_id][slot.label()] = undefined ? std::nullopt : std::optional(s.score);
        }
      }
      std::vector<JoinedPair> rows;
      std::string csv = provenance_.csv_comment() + "\nuid,pair_index,phenomenon,logp_acc,logp_unacc,outcome";
      for (const auto& slot : mp.slots) csv += "," + slot.label();
      csv += "\n";
      for (const auto& p : pairs) {
        JoinedPair j;
        j.uid = p.uid;
        j.pair_index = p.pair_index;
        j.phenomenon = p.phenomenon;
        j.logp_acc = p.logp_acc;
        j.logp_unacc = p.logp_unacc;
        if (p.scored()) j.outcome = p.outcome();
        const auto sit = by_sentence.find(pair_sentence_id(p.uid, p.pair_index));
        for (const auto& slot : mp.slots) {
          j.probe_scores[slot.label()] =
              sit == by_sentence.end() ? std::nullopt : sit->second[slot.label()];
        }
        csv += j.uid + "," + std::to_string(j.pair_index) + "," + j.phenomenon + "," + format_stat(j.logp_acc) + "," +
               format_stat(j.logp_unacc) + "," + opt_bool(j.outcome);
        for (const auto& slot : mp.slots) csv += "," + format_stat(j.probe_scores[slot.label()]);
        csv += "\n";
        rows.push_back(std::move(j));
      }
      write_file("joined/" + man.model_id + ".csv", csv);
      joined_[man.model_id] = std::move(rows);
    }
  });
}

const std::map<std::string, std::vector<JoinedPair>>& Pipeline::joined() {
  score_join();
  return joined_;
}

// ---------------------------------------------------------------------------
// regress

std::optional<std::string> Pipeline::control_label_for(ProbeFamily family) const {
  if (!config_.wants(ProbeFamily::control)) return std::nullopt;
  const ProbeFamily anchor = family == ProbeFamily::headword ? ProbeFamily::headword : ProbeFamily::structural;
  if (!config_.wants(anchor)) return std::nullopt;
  return ProbeSlot{ProbeFamily::control, anchor, 0}.label();
}

void Pipeline::regress() {
  score_join();
  stage("regress", regressed_, [&] {
    tables_.clear();
    for (auto fam : syntax_families()) {
      if (!config_.wants(fam)) continue;
      const std::string label(family_name(fam));
      const auto ctrl = control_label_for(fam);
      for (auto gran : config_.granularities) {
        std::vector<std::string> cells;
        if (gran == Granularity::full) cells = {"all"};
        if (gran == Granularity::phenomenon) cells = phenomena();
        if (gran == Granularity::paradigm) {
          for (const auto& p : paradigm_table()) cells.emplace_back(p.uid);
        }
        std::vector<ModelObservation> obs;
        for (const auto& mp : probes_) {
          const auto& rows = joined_.at(mp.model_id);
          for (const auto& cell : cells) {
            std::vector<TaggedScore> syn, con, acc;
            bool any = false;
            for (const auto& r : rows) {
              const bool in = gran == Granularity::full || (gran == Granularity::phenomenon && r.phenomenon == cell) ||
                              (gran == Granularity::paradigm && r.uid == cell);
              if (!in) continue;
              any = true;
              if (auto v = r.probe_scores.at(label)) syn.push_back({r.uid, *v});
              if (ctrl) {
                if (auto v = r.probe_scores.at(*ctrl)) con.push_back({r.uid, *v});
              }
              if (r.outcome) acc.push_back({r.uid, *r.outcome ? 1.0 : 0.0});
            }
            if (!any) continue;
            ModelObservation o;
            o.model_id = mp.model_id;
            o.cell = cell;
            o.syntax_score = aggregate_predictor(syn, config_.aggregation);
            o.control_score = aggregate_predictor(con, config_.aggregation);
            o.accuracy = aggregate_predictor(acc, config_.aggregation);
            obs.push_back(std::move(o));
          }
        }
        auto table = build_regression_table(label, gran, obs, cells);
        const std::string base = "regress/" + label + "_" + granularity_name(gran);
        write_file(base + ".csv", provenance_.csv_comment() + "\n" + table.to_csv());
        ojson j = provenance_.object();
        j["aggregation"] = aggregation_name(config_.aggregation);
        j["syntax_metric"] = metric_name(native_metric(fam));
        j["control_probe"] = ctrl ? ojson(*ctrl) : ojson(nullptr);
        j["holm_corrected"] = gran != Granularity::full;
        const auto parsed = parse_ordered(table.to_json());
        for (const auto& [k, v] : parsed.items()) j[k] = v;
        write_file(base + ".json", j.dump(2) + "\n");
        tables_.push_back(std::move(table));
      }
    }
  });
}

const std::vector<RegressionTable>& Pipeline::tables() {
  regress();
  return tables_;
}

// ---------------------------------------------------------------------------
// ttest

void Pipeline::ttest() {
  score_join();
  stage("ttest", ttested_, [&] {
    for (auto fam : syntax_families()) {
      if (!config_.wants(fam)) continue;
      const std::string label(family_name(fam));
      std::string csv = provenance_.csv_comment() +
                        "\nmodel_id,suite,n_correct,n_incorrect,t,df,p,p_holm,status\n";
      std::map<std::string, int> significant;  // suite -> models with p_holm < 0.05
      for (const auto& mp : probes_) {
        const auto& rows = joined_.at(mp.model_id);
        struct Test {
          std::string suite;
          std::size_t na = 0, nb = 0;
          std::optional<TTestResult> r;
        };
        std::vector<Test> tests;
        for (const auto& p : paradigm_table()) {
          std::vector<double> a, b;
          bool any = false;
          for (const auto& r : rows) {
            if (r.uid != p.uid) continue;
            any = true;
            const auto v = r.probe_scores.at(label);
            if (!v || !r.outcome) continue;
            (*r.outcome ? a : b).push_back(*v);
          }
          if (!any) continue;
          tests.push_back({std::string(p.uid), a.size(), b.size(), welch_ttest_greater(a, b)});
        }
        std::vector<double> ps;
        for (const auto& t : tests) {
          if (t.r) ps.push_back(t.r->p_value);
        }
        const auto corrected = holm_bonferroni(ps);
        std::size_t k = 0;
        for (const auto& t : tests) {
          csv += mp.model_id + "," + t.suite + "," + std::to_string(t.na) + "," + std::to_string(t.nb) + ",";
          if (t.r) {
            const double ph = corrected[k++];
            csv += format_stat(t.r->t) + "," + format_stat(t.r->df) + "," + format_stat(t.r->p_value) + "," +
                   format_stat(ph) + ",ok\n";
            if (ph < 0.05) ++significant[t.suite];
          } else {
            csv += ",,,,undefined\n";
          }
        }
      }
      write_file("ttest/" + label + ".csv", csv);
      ojson j = provenance_.object();
      j["probe"] = label;
      j["alternative"] = "mean score of correctly resolved pairs > incorrectly resolved";
      j["correction"] = "holm across suites within each model";
      j["models_significant_per_suite"] = significant;
      write_file("ttest/" + label + ".json", j.dump(2) + "\n");
    }
  });
}

// ---------------------------------------------------------------------------
// critical

void Pipeline::critical() {
  score_join();
  stage("critical", critical_done_, [&] {
    const auto& bparses = parses("blimp");
    for (auto fam : syntax_families()) {
      if (!config_.wants(fam)) continue;
      const std::string label(family_name(fam));
      std::string records_csv = provenance_.csv_comment() +
                                "\nmodel_id,uid,pair_index,status,dependent,head,relation,filter_reason,probe_hit,"
                                "outcome\n";
      std::string summary_csv = provenance_.csv_comment() +
                                "\nmodel_id,uid,kept,filtered,hamming,match_rate,probe_accuracy,outcome_accuracy\n";
      ojson summary = provenance_.object();
      summary["probe"] = label;
      summary["hit_rule"] = fam == ProbeFamily::headword ? "directed predicted head" : "undirected MST edge";
      summary["rows"] = ojson::array();
      for (std::size_t m = 0; m < manifests_.size(); ++m) {
        const auto& mp = probes_[m];
        const auto& ck = mp.probes.at(label);
        const auto states = load_states(m, "blimp", ck.layer);
        std::map<std::string, std::size_t> index;
        for (std::size_t s = 0; s < bparses.size(); ++s) index[bparses[s].id()] = s;
        std::map<PairKey, std::optional<bool>> outcomes;
        for (const auto& r : joined_.at(mp.model_id)) outcomes[{r.uid, r.pair_index}] = r.outcome;

        std::map<std::string, std::vector<CriticalEdgeRecord>> kept;
        std::map<std::string, std::size_t> filtered;
        for (const auto& pair : blimp_pairs()) {
          if (!has_critical_edge_definition(pair.uid)) continue;
          const auto sid = pair_sentence_id(pair.uid, pair.pair_index);
          const auto pit = index.find(sid);
          if (pit == index.end()) continue;
          const auto& parse = bparses[pit->second];
          auto rec = find_critical_edge(pair, parse);
          rec.outcome = outcomes[{pair.uid, pair.pair_index}];
          if (rec.edge) {
            const Eigen::MatrixXd h = states.sentences[pit->second].cast<double>();
            if (fam == ProbeFamily::headword) {
              rec.probe_hit = critical_hit(*rec.edge, predict_heads(head_scores(ck.params, h)));
            } else {
              const auto mst = extract_mst(predicted_distance_matrix(ck.params, h), parse.punct_mask());
              rec.probe_hit = critical_hit(*rec.edge, mst);
            }
          }
          records_csv += mp.model_id + "," + rec.uid + "," + std::to_string(rec.pair_index) + "," +
                         (rec.edge ? "kept" : "filtered") + ",";
          if (rec.edge) {
            records_csv += std::to_string(rec.edge->dependent) + "," + std::to_string(rec.edge->head) + "," +
                           rec.edge->relation + ",,";
          } else {
            records_csv += ",,," + rec.filter_reason + ",";
          }
          records_csv += opt_bool(rec.probe_hit) + "," + opt_bool(rec.outcome) + "\n";
          if (rec.edge) {
            if (rec.outcome) kept[rec.uid].push_back(std::move(rec));
          } else {
            ++filtered[rec.uid];
          }
        }
        for (const auto& uid : critical_paradigms()) {
          const std::string u(uid);
          const auto& recs = kept[u];
          ojson row;
          row["model_id"] = mp.model_id;
          row["uid"] = u;
          row["kept"] = recs.size();
          row["filtered"] = filtered[u];
          summary_csv += mp.model_id + "," + u + "," + std::to_string(recs.size()) + "," + std::to_string(filtered[u]);
          if (!recs.empty()) {
            const auto s = critical_match_analysis(recs);
            summary_csv += "," + format_stat(s.hamming) + "," + format_stat(s.match_rate) + "," +
                           format_stat(s.probe_accuracy) + "," + format_stat(s.outcome_accuracy) + "\n";
            row["hamming"] = format_stat(s.hamming);
            row["match_rate"] = format_stat(s.match_rate);
            row["probe_accuracy"] = format_stat(s.probe_accuracy);
            row["outcome_accuracy"] = format_stat(s.outcome_accuracy);
          } else {
            summary_csv += ",,,,\n";
          }
          summary["rows"].push_back(row);
        }
      }
      write_file("critical/" + label + "_records.csv", records_csv);
      write_file("critical/" + label + "_summary.csv", summary_csv);
      write_file("critical/" + label + "_summary.json", summary.dump(2) + "\n");
    }
  });
}

// ---------------------------------------------------------------------------
// control variance

void Pipeline::control_variance() {
  train_probes();
  stage("control-variance", variance_done_, [&] {
    if (config_.contexts.empty() || !config_.wants(ProbeFamily::control)) return;
    const auto& ctx = parses("contexts");
    ojson out = provenance_.object();
    out["models"] = ojson::array();
    for (std::size_t m = 0; m < manifests_.size(); ++m) {
      const auto& mp = probes_[m];
      ojson model;
      model["model_id"] = mp.model_id;
      model["probes"] = ojson::array();
      for (const auto& slot : mp.slots) {
        if (slot.family != ProbeFamily::control) continue;
        const auto states = load_states(m, "contexts", slot.layer);
        std::map<std::string, std::vector<Eigen::VectorXd>> groups;
        for (std::size_t s = 0; s < ctx.size(); ++s) {
          const auto it = ctx[s].metadata().find("target_word");
          if (it == ctx[s].metadata().end()) continue;
          const auto target = to_lower_ascii(it->second);
          bool found = false;
          for (const auto& t : ctx[s].tokens()) {
            if (to_lower_ascii(t.form) == target) {
              groups[target].push_back(states.sentences[s].row(t.index - 1).cast<double>().transpose());
              found = true;
              break;
            }
          }
          if (!found) log_warning("context " + ctx[s].id() + " does not contain its target word '" + target + "'");
        }
        std::vector<std::vector<Eigen::VectorXd>> vecs;
        for (auto& [w, v] : groups) vecs.push_back(std::move(v));
        const auto rep = control_variance_report(vecs, mp.probes.at(slot.label()).params);
        model["probes"].push_back({{"probe", slot.label()},
                                   {"layer", slot.layer},
                                   {"words_used", rep.words_used},
                                   {"words_skipped", rep.words_skipped},
                                   {"mean_variance_before", format_stat(rep.mean_variance_before)},
                                   {"mean_variance_after", format_stat(rep.mean_variance_after)}});
      }
      out["models"].push_back(model);
    }
    write_file("control_variance.json", out.dump(2) + "\n");
  });
}

// ---------------------------------------------------------------------------
// report

void Pipeline::report() {
  regress();
  ttest();
  critical();
  control_variance();
  stage("report", reported_, [&] {
    ojson summary = provenance_.object();
    summary["aggregation"] = aggregation_name(config_.aggregation);
    summary["models"] = ojson::array();
    for (const auto& mp : probes_) {
      ojson m;
      m["model_id"] = mp.model_id;
      for (const auto& slot : mp.slots) m["layers"][slot.label()] = slot.layer;
      summary["models"].push_back(m);
    }
    summary["figures"] = ojson::array();
    summary["full_dataset"] = ojson::object();
    for (const auto& table : tables_) {
      const auto fam = parse_family(table.family);
      const auto panels = panels_from_table(table);
      const std::string file = "report/" + table.family + "_" + granularity_name(table.granularity) + ".svg";
      const std::string title = table.family + " probe vs minimal-pair accuracy (" +
                                granularity_name(table.granularity) + ")";
      write_file(file, render_scatter_svg(title, metric_name(native_metric(fam)), "minimal-pair accuracy", panels,
                                          provenance_));
      std::size_t markers = 0;
      for (const auto& p : panels) markers += p.x.size();
      summary["figures"].push_back({{"file", file}, {"panels", panels.size()}, {"markers", markers}});
      if (table.granularity == Granularity::full && !table.rows.empty()) {
        const auto& row = table.rows.front();
        ojson f;
        f["status"] = row.status;
        f["n"] = row.n;
        if (row.simple) {
          f["simple_beta1"] = format_stat(row.simple->coefficients(1));
          f["simple_p"] = format_stat(row.simple_p);
          f["simple_adj_r2"] = format_stat(row.simple->adj_r2);
        }
        if (row.multiple) {
          f["multiple_beta1"] = format_stat(row.multiple->coefficients(1));
          f["multiple_p"] = format_stat(row.multiple_p);
          f["multiple_adj_r2"] = format_stat(row.multiple->adj_r2);
        }
        if (row.lrt) {
          f["lrt_stat"] = format_stat(row.lrt->statistic);
          f["lrt_p"] = format_stat(row.lrt_p);
        }
        summary["full_dataset"][table.family] = f;
      }
    }
    write_file("report/summary.json", summary.dump(2) + "\n");
  });
}

void Pipeline::run_all() { report(); }

}  // namespace synprobe
