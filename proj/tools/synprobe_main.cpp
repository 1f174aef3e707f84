// synprobe: probe training, minimal-pair joins and regression reports.
#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <nlohmann/json.hpp>

#include "synprobe/hashing.hpp"
#include "synprobe/log.hpp"
#include "synprobe/pipeline.hpp"
#include "synprobe/synthetic.hpp"

namespace fs = std::filesystem;
using namespace synprobe;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitStage = 3;

struct Overrides {
  std::string config;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::string glove;
  std::string aggregation;
  std::vector<std::string> probes;
  std::vector<std::string> granularities;
  std::vector<int> layers;
  std::optional<int> max_epochs;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "pipeline config (JSON)")->required();
  cmd->add_option("-o,--output-dir", o.output_dir, "artifact directory (overrides output_dir)");
  cmd->add_option("--seed", o.seed, "run seed (overrides seed)");
  cmd->add_option("--glove", o.glove, "GloVe text file (overrides glove)");
  cmd->add_option("--aggregation", o.aggregation, "paradigm_mean | pooled");
  cmd->add_option("--probes", o.probes, "probe families to run")->delimiter(',');
  cmd->add_option("--granularities", o.granularities, "full, phenomenon, paradigm")->delimiter(',');
  cmd->add_option("--layers", o.layers, "layers to sweep (default: all)")->delimiter(',');
  cmd->add_option("--max-epochs", o.max_epochs, "training epoch cap for every family");
  cmd->add_flag("-q,--quiet", o.quiet, "suppress warnings");
}

PipelineConfig build_config(const Overrides& o) {
  if (!fs::exists(o.config)) throw ValidationError("config file not found: " + o.config);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file_bytes(o.config));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config " + o.config + ": " + e.what());
  }
  if (!doc.is_object()) throw ValidationError("config must be a JSON object");
  // CLI paths are relative to the working directory, config paths to the
  // config file; absolute paths keep both meanings intact.
  if (!o.output_dir.empty()) doc["output_dir"] = fs::absolute(o.output_dir).string();
  if (o.seed) doc["seed"] = *o.seed;
  if (!o.glove.empty()) doc["glove"] = fs::absolute(o.glove).string();
  if (!o.aggregation.empty()) doc["aggregation"] = o.aggregation;
  if (!o.probes.empty()) doc["probes"] = o.probes;
  if (!o.granularities.empty()) doc["granularities"] = o.granularities;
  if (!o.layers.empty()) doc["layers"] = o.layers;
  if (o.max_epochs) doc["training"]["max_epochs"] = *o.max_epochs;
  return PipelineConfig::from_json(doc, fs::absolute(o.config).parent_path().string());
}

int run_guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Syntactic probes vs minimal-pair outcomes"};
  app.require_subcommand(1);

  Overrides o;
  struct Stage {
    const char* name;
    const char* help;
    void (Pipeline::*run)();
  };
  const std::vector<Stage> stages = {
      {"train-probe", "train per-layer probes and select the best layers", &Pipeline::train_probes},
      {"eval-probe", "score acceptable BLiMP sentences with the selected probes", &Pipeline::eval_probes},
      {"score-join", "join model scores, outcomes and probe scores per pair", &Pipeline::score_join},
      {"regress", "regression tables at each granularity", &Pipeline::regress},
      {"ttest", "sentence-level t-tests per suite and model", &Pipeline::ttest},
      {"critical", "critical-edge match analysis", &Pipeline::critical},
      {"report", "tables, plots and the summary", &Pipeline::report},
      {"run-all", "every stage", &Pipeline::run_all},
  };
  std::vector<std::pair<CLI::App*, const Stage*>> commands;
  for (const auto& s : stages) {
    auto* cmd = app.add_subcommand(s.name, s.help);
    add_common(cmd, o);
    commands.emplace_back(cmd, &s);
  }

  std::string fixture_dir;
  synthetic::SmokeOptions fixture;
  auto* make = app.add_subcommand("make-fixture", "write the synthetic smoke fixture");
  make->add_option("dir", fixture_dir, "destination directory")->required();
  make->add_option("--models", fixture.models, "number of toy models");
  make->add_option("--layers", fixture.layers, "layers per toy model");
  make->add_option("--dim", fixture.dim, "hidden width");
  make->add_option("--pairs", fixture.pairs_per_paradigm, "pairs per paradigm");
  make->add_option("--max-epochs", fixture.max_epochs, "epoch cap written into the config");
  make->add_option("--seed", fixture.seed, "fixture seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  if (make->parsed()) {
    return run_guarded([&] { std::cout << synthetic::write_smoke_fixture(fixture_dir, fixture) << "\n"; });
  }
  for (const auto& [cmd, s] : commands) {
    if (!cmd->parsed()) continue;
    if (o.quiet) set_warnings_enabled(false);
    return run_guarded([&] {
      Pipeline pipeline(build_config(o));
      (pipeline.*(s->run))();
      std::cout << s->name << " done: " << pipeline.config().output_dir << " (config " << pipeline.config_hash()
                << ")\n";
    });
  }
  return kExitValidation;
}
