#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "synprobe/tensors.hpp"
#include "synprobe/treebank.hpp"

namespace synprobe {

enum class ProbeFamily : std::uint8_t { structural = 0, orthogonal = 1, headword = 2, control = 3 };

std::string_view family_name(ProbeFamily family);
ProbeFamily parse_family(std::string_view name);

// Parameters of one probe. Matrices multiply row vectors of hidden states:
// the structural/headword/control map is g(h) = h * proj (proj is d x k);
// the orthogonal map is g(h) = scale .* (ortho * h), ortho is d x d.
// Tensors a family does not use stay empty.
struct ProbeParams {
  ProbeFamily family = ProbeFamily::structural;
  Eigen::MatrixXd proj;
  Eigen::MatrixXd ortho;
  Eigen::VectorXd scale;
  Eigen::VectorXd root;

  Eigen::Index dim() const;
  Eigen::Index rank() const;

  // Applies f to every tensor this family uses, in a fixed order.
  template <typename F>
  void for_each_tensor(F&& f) {
    if (proj.size()) f(proj);
    if (ortho.size()) f(ortho);
    if (scale.size()) f(scale);
    if (root.size()) f(root);
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    if (proj.size()) f(proj);
    if (ortho.size()) f(ortho);
    if (scale.size()) f(scale);
    if (root.size()) f(root);
  }

  ProbeParams zeros_like() const;
};

struct ControlPair {
  int i = 0;  // 0-based token positions
  int j = 0;
  double target = 0;  // ||v_i - v_j|| between GloVe vectors
};

// One training sentence in 64-bit form with every target a probe needs.
struct ProbeExample {
  Eigen::MatrixXd states;          // N x d
  Eigen::MatrixXd tree_distances;  // N x N gold distances
  std::vector<int> heads;          // per token; 0 = ROOT, else 1-based head
  std::vector<bool> punct;
  std::vector<ControlPair> control_pairs;

  Eigen::Index size() const { return states.rows(); }
};

// Same-XPOS pairs whose words both have GloVe vectors. Pairs with an
// out-of-vocabulary word are dropped.
std::vector<ControlPair> build_control_pairs(const SentenceParse& parse, const GloveTable& glove);

ProbeExample make_example(const SentenceParse& parse, const StateMatrix& states,
                          const GloveTable* glove = nullptr);
std::vector<ProbeExample> make_examples(std::span<const SentenceParse> parses,
                                        const HiddenStateSet& states,
                                        const GloveTable* glove = nullptr);

struct TrainConfig {
  int batch_size = 32;
  int max_epochs = 300;
  int patience = 50;
  double lr = 1e-4;
  double warmup_frac = 0.1;
  bool linear_decay = true;
  double weight_decay = 0.01;
  double lambda_o = 0.05;
  double huber_delta = 1.0;
  int rank = 256;  // k; clipped to d, ignored by the orthogonal family
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;

  static TrainConfig defaults_for(ProbeFamily family);
  void validate() const;
};

struct LossGrad {
  double loss = 0;
  ProbeParams grad;
};

// Rows g(h_i) of the probe's projected space.
Eigen::MatrixXd project(const ProbeParams& params, const Eigen::MatrixXd& states);

double dso_penalty(const Eigen::MatrixXd& v);
Eigen::MatrixXd dso_gradient(const Eigen::MatrixXd& v);
double huber(double residual, double delta);

// Sum over sentences of (1/|S|^2) sum_{i != j} |d_ij - ||g(h_i - h_j)||^2|.
LossGrad struct_loss_grad(const ProbeParams& params, std::span<const ProbeExample> batch);
// Distance term with g(h) = scale .* (V h) plus lambda_o * DSO(V).
LossGrad ortho_loss_grad(const ProbeParams& params, std::span<const ProbeExample> batch,
                         double lambda_o);
// Sum over sentences of (1/|S|) sum_i cross-entropy over candidates {ROOT} u
// {w_j : j != i} with logits -||g(h_i - h_c)||, h_ROOT = params.root.
LossGrad head_loss_grad(const ProbeParams& params, std::span<const ProbeExample> batch);
// Sum over sentences of (1/|S|) sum_pairs Huber_delta(||g(h_i - h_j)|| - target).
LossGrad ctrl_loss_grad(const ProbeParams& params, std::span<const ProbeExample> batch,
                        double delta);

// Dispatches on params.family.
LossGrad loss_grad(const ProbeParams& params, std::span<const ProbeExample> batch,
                   const TrainConfig& config);

// Candidate logits for the headword probe: N x (N+1), column 0 is ROOT and
// column j is token j (1-based). Self candidates are -infinity.
Eigen::MatrixXd head_scores(const ProbeParams& params, const Eigen::MatrixXd& states);
// Argmax head per token (0 = ROOT); ties go to the lowest candidate column.
std::vector<int> predict_heads(const Eigen::MatrixXd& scores);

struct AdamState {
  ProbeParams m;
  ProbeParams v;
  std::int64_t step = 0;

  static AdamState for_params(const ProbeParams& params);
};

// One decoupled-weight-decay Adam update at learning rate lr. Throws
// NumericError if any gradient entry is not finite.
void adamw_step(ProbeParams& params, const ProbeParams& grads, AdamState& state, double lr,
                const TrainConfig& config);

ProbeParams init_params(ProbeFamily family, Eigen::Index dim, const TrainConfig& config,
                        std::mt19937_64& rng);

// Learning rate for optimizer step `step` (0-based) out of `total_steps`.
double scheduled_lr(const TrainConfig& config, std::int64_t step, std::int64_t total_steps);

// Tracks the best dev metric and counts epochs without improvement.
class EarlyStopping {
 public:
  EarlyStopping(int patience, bool higher_is_better)
      : patience_(patience), higher_is_better_(higher_is_better) {}

  // Returns true if `metric` is a new best.
  bool observe(int epoch, double metric);
  bool should_stop() const { return since_best_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  std::optional<double> best_metric() const { return best_; }

 private:
  int patience_;
  bool higher_is_better_;
  std::optional<double> best_;
  int best_epoch_ = 0;
  int since_best_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double dev_metric = 0;
  double lr = 0;
};

struct TrainResult {
  ProbeParams params;
  std::vector<EpochRecord> log;
  int best_epoch = 0;
};

// Dev metric used for early stopping: mean dev loss, or dev UAS for the
// headword family.
double dev_metric(const ProbeParams& params, std::span<const ProbeExample> dev,
                  const TrainConfig& config);
bool higher_is_better(ProbeFamily family);

TrainResult train_probe(ProbeFamily family, std::span<const ProbeExample> train,
                        std::span<const ProbeExample> dev, const TrainConfig& config);

struct LayerMetric {
  int layer = 0;
  double metric = 0;
};
// Layer with the maximal metric, lowest layer on ties.
int select_best_layer(std::span<const LayerMetric> per_layer);

// PRB1 checkpoint: family, shapes, float64 parameters, config and log.
struct ProbeCheckpoint {
  ProbeParams params;
  TrainConfig config;
  std::vector<EpochRecord> log;
  int best_epoch = 0;
  int layer = 0;
  std::string model_id;
  std::string provenance;  // free-form run metadata, e.g. config hash and seed
};

std::string serialize_checkpoint(const ProbeCheckpoint& ckpt);
ProbeCheckpoint deserialize_checkpoint(std::string_view bytes);
void write_checkpoint(const std::string& path, const ProbeCheckpoint& ckpt);
ProbeCheckpoint read_checkpoint(const std::string& path);
// One JSON object per line: epoch, train_loss, dev_metric, lr.
std::string training_log_jsonl(std::span<const EpochRecord> log);

}  // namespace synprobe
