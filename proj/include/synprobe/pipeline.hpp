#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "synprobe/error.hpp"
#include "synprobe/outcomes.hpp"
#include "synprobe/parse_metrics.hpp"
#include "synprobe/probes.hpp"
#include "synprobe/report.hpp"
#include "synprobe/stats.hpp"
#include "synprobe/tensors.hpp"

namespace synprobe {

// A pipeline stage failed; carries the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause)
      : Error("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Declarative run description. Relative paths are resolved against the
// directory of the config file.
struct PipelineConfig {
  std::string base_dir;
  std::string output_dir;
  std::uint64_t seed = 0;
  std::string train_parses;
  std::string dev_parses;
  std::string test_parses;
  std::vector<std::string> model_manifests;
  std::string glove;
  std::vector<std::string> blimp_pairs;
  std::string blimp_parses;
  std::map<std::string, std::string> score_overrides;  // model_id -> CSV
  std::string contexts;                                // optional
  std::vector<ProbeFamily> probes;
  std::vector<Granularity> granularities;
  PredictorAggregation aggregation = PredictorAggregation::paradigm_mean;
  nlohmann::json training = nlohmann::json::object();
  std::map<ProbeFamily, nlohmann::json> training_per_family;
  std::vector<int> layers;  // empty: every layer 1..L
  bool verify_checksums = true;
  nlohmann::json raw;  // the document as loaded, minus output_dir

  static PipelineConfig from_json(const nlohmann::json& doc, const std::string& base_dir);
  static PipelineConfig load(const std::string& path);

  bool wants(ProbeFamily f) const;
  // Published per-family defaults, then `training`, then the family block.
  TrainConfig train_config(ProbeFamily family) const;
  // Structural checks plus existence of every referenced file. Throws
  // ValidationError; never starts any training.
  void validate() const;
};

// Applies {"max_epochs": 10, ...} onto a TrainConfig; unknown keys throw.
void apply_train_overrides(TrainConfig& config, const nlohmann::json& overrides);

// Probe used for BLiMP evaluation. Control probes are keyed by the syntax
// family whose best layer they were trained on.
struct ProbeSlot {
  ProbeFamily family = ProbeFamily::structural;
  std::optional<ProbeFamily> anchor;  // control only
  int layer = 0;

  std::string label() const;  // structural | control@structural | ...
};

struct LayerSweep {
  ProbeFamily family = ProbeFamily::structural;
  std::vector<LayerMetric> test_metrics;
  int best_layer = 0;
};

struct ModelProbes {
  std::string model_id;
  std::vector<LayerSweep> sweeps;
  std::map<std::string, ProbeCheckpoint> probes;  // by slot label
  std::vector<ProbeSlot> slots;
};

// Per-pair join of scores, outcome and the probes' sentence-level scores.
struct JoinedPair {
  std::string uid;
  int pair_index = 0;
  std::string phenomenon;
  std::optional<double> logp_acc;
  std::optional<double> logp_unacc;
  std::optional<bool> outcome;
  std::map<std::string, std::optional<double>> probe_scores;  // by slot label
};

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);
  ~Pipeline();
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  const std::string& config_hash() const { return provenance_.config_hash; }
  const PipelineConfig& config() const { return config_; }

  // Each stage runs the stages it depends on first; trained probes are
  // reused from the artifact directory when their content key matches.
  void train_probes();
  void eval_probes();
  void score_join();
  void regress();
  void ttest();
  void critical();
  void control_variance();
  void report();
  void run_all();

  const std::vector<ModelProbes>& model_probes();
  const std::map<std::string, std::vector<JoinedPair>>& joined();
  const std::vector<RegressionTable>& tables();

 private:
  template <typename F>
  void stage(const std::string& name, bool& done, F&& body);

  const ExportManifest& manifest(std::size_t m);
  HiddenStateSet load_states(std::size_t m, const std::string& split, int layer);
  const std::string& file_hash(const std::string& path);
  const GloveTable* glove();
  const std::vector<SentenceParse>& parses(const std::string& which);
  const std::vector<MinimalPair>& blimp_pairs();

  ProbeCheckpoint train_or_load(std::size_t m, ProbeFamily family, int layer, const std::string& label);
  std::string probe_path(const std::string& model_id, const std::string& label, int layer,
                         const std::string& ext) const;
  void write_file(const std::string& relative, const std::string& content);
  std::optional<std::string> control_label_for(ProbeFamily family) const;

  PipelineConfig config_;
  Provenance provenance_;
  std::string lock_path_;

  std::vector<ExportManifest> manifests_;
  std::map<std::string, std::string> hashes_;
  std::optional<GloveTable> glove_;
  std::map<std::string, std::vector<SentenceParse>> parses_;
  std::optional<std::vector<MinimalPair>> pairs_;

  std::vector<ModelProbes> probes_;
  std::map<std::string, std::map<std::string, ProbeEvalSummary>> blimp_eval_;  // model -> label -> summary
  std::map<std::string, std::vector<JoinedPair>> joined_;
  std::vector<RegressionTable> tables_;

  bool trained_ = false, evaluated_ = false, joined_done_ = false, regressed_ = false, ttested_ = false,
       critical_done_ = false, variance_done_ = false, reported_ = false;
};

// Content hash of the config (without output_dir) and every input file it
// references, so equal hashes imply equal inputs.
std::string compute_config_hash(const PipelineConfig& config);

}  // namespace synprobe
