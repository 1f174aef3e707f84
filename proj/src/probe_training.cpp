#include <algorithm>
#include <cmath>

#include "synprobe/error.hpp"
#include "synprobe/probes.hpp"

namespace synprobe {

TrainConfig TrainConfig::defaults_for(ProbeFamily family) {
  TrainConfig c;
  switch (family) {
    case ProbeFamily::structural:
    case ProbeFamily::headword:
      break;
    case ProbeFamily::orthogonal:
      c.max_epochs = 50;
      c.patience = 5;
      c.warmup_frac = 0.0;
      c.linear_decay = false;
      break;
    case ProbeFamily::control:
      c.batch_size = 128;
      break;
  }
  return c;
}

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0)) throw ValidationError(std::string(name) + " must be positive");
  };
  positive(batch_size, "batch_size");
  positive(max_epochs, "max_epochs");
  positive(patience, "patience");
  positive(lr, "lr");
  positive(rank, "rank");
  positive(huber_delta, "huber_delta");
  if (weight_decay < 0) throw ValidationError("weight_decay must be non-negative");
  if (lambda_o < 0) throw ValidationError("lambda_o must be non-negative");
  if (!(warmup_frac >= 0 && warmup_frac <= 1)) throw ValidationError("warmup_frac must lie in [0, 1]");
}

double scheduled_lr(const TrainConfig& config, std::int64_t step, std::int64_t total_steps) {
  const auto warmup = static_cast<std::int64_t>(std::llround(config.warmup_frac * double(total_steps)));
  if (step < warmup) return config.lr * double(step + 1) / double(warmup);
  if (!config.linear_decay || total_steps <= warmup) return config.lr;
  return config.lr * std::max(0.0, double(total_steps - step) / double(total_steps - warmup));
}

bool EarlyStopping::observe(int epoch, double metric) {
  const bool better = !best_ || (higher_is_better_ ? metric > *best_ : metric < *best_);
  if (better) {
    best_ = metric;
    best_epoch_ = epoch;
    since_best_ = 0;
  } else {
    ++since_best_;
  }
  return better;
}

bool higher_is_better(ProbeFamily family) { return family == ProbeFamily::headword; }

namespace {

// Batch objective: distance/CE/Huber terms averaged over the batch's
// sentences, plus the DSO penalty once for the orthogonal family.
LossGrad mean_loss_grad(const ProbeParams& params, std::span<const ProbeExample> batch, const TrainConfig& config) {
  const double inv = batch.empty() ? 0.0 : 1.0 / double(batch.size());
  if (params.family == ProbeFamily::orthogonal) {
    LossGrad lg = ortho_loss_grad(params, batch, 0.0);
    lg.loss *= inv;
    lg.grad.ortho *= inv;
    lg.grad.scale *= inv;
    lg.loss += config.lambda_o * dso_penalty(params.ortho);
    lg.grad.ortho += config.lambda_o * dso_gradient(params.ortho);
    return lg;
  }
  LossGrad lg = loss_grad(params, batch, config);
  lg.loss *= inv;
  lg.grad.for_each_tensor([&](auto& t) { t *= inv; });
  return lg;
}

double mean_uas(const ProbeParams& params, std::span<const ProbeExample> data) {
  if (data.empty()) return 0;
  double total = 0;
  for (const auto& ex : data) {
    const auto pred = predict_heads(head_scores(params, ex.states));
    int hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == ex.heads[i];
    total += pred.empty() ? 1.0 : double(hit) / double(pred.size());
  }
  return total / double(data.size());
}

}  // namespace

double dev_metric(const ProbeParams& params, std::span<const ProbeExample> dev, const TrainConfig& config) {
  if (params.family == ProbeFamily::headword) return mean_uas(params, dev);
  return mean_loss_grad(params, dev, config).loss;
}

TrainResult train_probe(ProbeFamily family, std::span<const ProbeExample> train, std::span<const ProbeExample> dev,
                        const TrainConfig& config) {
  config.validate();
  if (train.empty()) throw ValidationError("training corpus is empty");
  if (dev.empty()) throw ValidationError("dev corpus is empty");
  const Eigen::Index dim = train.front().states.cols();

  std::mt19937_64 rng(config.seed);
  TrainResult result;
  ProbeParams params = init_params(family, dim, config, rng);
  AdamState adam = AdamState::for_params(params);
  result.params = params;

  std::vector<ProbeExample> order(train.begin(), train.end());
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const auto steps_per_epoch = static_cast<std::int64_t>((order.size() + batch - 1) / batch);
  const std::int64_t total_steps = steps_per_epoch * config.max_epochs;
  std::int64_t step = 0;
  EarlyStopping stopper(config.patience, higher_is_better(family));

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    double lr = 0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += batch, ++b) {
      const std::span<const ProbeExample> mb(order.data() + start, std::min(batch, order.size() - start));
      const LossGrad lg = mean_loss_grad(params, mb, config);
      epoch_loss += lg.loss * double(mb.size());
      lr = scheduled_lr(config, step++, total_steps);
      try {
        adamw_step(params, lg.grad, adam, lr, config);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b) + ")");
      }
    }
    const double metric = dev_metric(params, dev, config);
    if (!std::isfinite(metric)) {
      throw NumericError("dev metric is not finite at epoch " + std::to_string(epoch));
    }
    result.log.push_back({epoch, epoch_loss / double(order.size()), metric, lr});
    if (stopper.observe(epoch, metric)) result.params = params;
    if (stopper.should_stop()) break;
  }
  result.best_epoch = stopper.best_epoch();
  return result;
}

int select_best_layer(std::span<const LayerMetric> per_layer) {
  if (per_layer.empty()) throw ValidationError("no layers to select from");
  const LayerMetric* best = &per_layer.front();
  for (const auto& lm : per_layer) {
    if (lm.metric > best->metric || (lm.metric == best->metric && lm.layer < best->layer)) best = &lm;
  }
  return best->layer;
}

}  // namespace synprobe
