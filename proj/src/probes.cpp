#include "synprobe/probes.hpp"

#include <Eigen/QR>
#include <cmath>
#include <limits>

#include "synprobe/error.hpp"

namespace synprobe {

namespace {

// Row-gradient of sum_{ij} a_ij * f(T_i - T_j) when df/d(T_i - T_j) is
// `diff_scale * (T_i - T_j)`: (diag(rowsum) + diag(colsum) - A - A^T) T.
Eigen::MatrixXd pair_laplacian_times(const Eigen::MatrixXd& a, const Eigen::MatrixXd& t) {
  Eigen::VectorXd deg = a.rowwise().sum() + a.colwise().sum().transpose();
  Eigen::MatrixXd lap = -(a + a.transpose());
  lap.diagonal() += deg;
  return lap * t;
}

void check_states(const ProbeParams& params, const ProbeExample& ex) {
  if (ex.states.cols() != params.dim()) {
    throw ShapeError("hidden states have dim " + std::to_string(ex.states.cols()) +
                     " but the probe expects " + std::to_string(params.dim()));
  }
  const auto n = ex.states.rows();
  if (ex.tree_distances.size() && (ex.tree_distances.rows() != n || ex.tree_distances.cols() != n)) {
    throw ShapeError("distance matrix does not match sentence length");
  }
  if (!ex.heads.empty() && static_cast<Eigen::Index>(ex.heads.size()) != n) {
    throw ShapeError("head list does not match sentence length");
  }
}

void require_family(const ProbeParams& params, ProbeFamily expected) {
  if (params.family != expected) {
    throw ShapeError(std::string("expected a ") + std::string(family_name(expected)) + " probe, got " +
                     std::string(family_name(params.family)));
  }
}

double sign(double x) { return (x > 0) - (x < 0); }

// Distance term shared by the structural and orthogonal probes. Fills
// `grad_rows` with dL/dT for projected rows T.
double distance_term(const Eigen::MatrixXd& t, const Eigen::MatrixXd& gold, double weight,
                     Eigen::MatrixXd& grad_rows) {
  const auto n = t.rows();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  double loss = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double q = (t.row(i) - t.row(j)).squaredNorm();
      const double r = gold(i, j) - q;
      loss += weight * std::abs(r);
      a(i, j) = -weight * sign(r);
    }
  }
  grad_rows = 2.0 * pair_laplacian_times(a, t);
  return loss;
}

double ortho_distance_part(const ProbeParams& params, std::span<const ProbeExample> batch,
                           ProbeParams& grad) {
  double loss = 0;
  Eigen::MatrixXd g_rows;
  for (const auto& ex : batch) {
    check_states(params, ex);
    const auto n = ex.size();
    if (n == 0) continue;
    const Eigen::MatrixXd t = ex.states * params.ortho.transpose();
    const Eigen::MatrixXd s = t * params.scale.asDiagonal();
    loss += distance_term(s, ex.tree_distances, 1.0 / double(n * n), g_rows);
    grad.scale += (g_rows.cwiseProduct(t)).colwise().sum().transpose();
    const Eigen::MatrixXd g_t = g_rows * params.scale.asDiagonal();
    grad.ortho += g_t.transpose() * ex.states;
  }
  return loss;
}

}  // namespace

std::string_view family_name(ProbeFamily family) {
  switch (family) {
    case ProbeFamily::structural: return "structural";
    case ProbeFamily::orthogonal: return "orthogonal";
    case ProbeFamily::headword: return "headword";
    case ProbeFamily::control: return "control";
  }
  return "unknown";
}

ProbeFamily parse_family(std::string_view name) {
  if (name == "structural") return ProbeFamily::structural;
  if (name == "orthogonal") return ProbeFamily::orthogonal;
  if (name == "headword") return ProbeFamily::headword;
  if (name == "control") return ProbeFamily::control;
  throw ValidationError("unknown probe family '" + std::string(name) + "'");
}

Eigen::Index ProbeParams::dim() const {
  return family == ProbeFamily::orthogonal ? ortho.cols() : proj.rows();
}

Eigen::Index ProbeParams::rank() const {
  return family == ProbeFamily::orthogonal ? ortho.rows() : proj.cols();
}

ProbeParams ProbeParams::zeros_like() const {
  ProbeParams z;
  z.family = family;
  z.proj = Eigen::MatrixXd::Zero(proj.rows(), proj.cols());
  z.ortho = Eigen::MatrixXd::Zero(ortho.rows(), ortho.cols());
  z.scale = Eigen::VectorXd::Zero(scale.size());
  z.root = Eigen::VectorXd::Zero(root.size());
  return z;
}

std::vector<ControlPair> build_control_pairs(const SentenceParse& parse, const GloveTable& glove) {
  std::vector<ControlPair> out;
  for (const auto& [i, j] : same_xpos_pairs(parse)) {
    const auto vi = glove.lookup(parse.token(i).form);
    const auto vj = glove.lookup(parse.token(j).form);
    if (!vi || !vj) continue;
    double sq = 0;
    for (std::size_t c = 0; c < vi->size(); ++c) {
      const double diff = double((*vi)[c]) - double((*vj)[c]);
      sq += diff * diff;
    }
    out.push_back({i - 1, j - 1, std::sqrt(sq)});
  }
  return out;
}

ProbeExample make_example(const SentenceParse& parse, const StateMatrix& states, const GloveTable* glove) {
  if (static_cast<std::size_t>(states.rows()) != parse.size()) {
    throw AlignmentError("matrix has " + std::to_string(states.rows()) + " rows but sentence " +
                         parse.id() + " has " + std::to_string(parse.size()) + " tokens");
  }
  ProbeExample ex;
  const auto n = static_cast<Eigen::Index>(parse.size());
  ex.states = states.cast<double>();
  ex.tree_distances.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) ex.tree_distances(i, j) = parse.distance(int(i) + 1, int(j) + 1);
  }
  for (const auto& t : parse.tokens()) {
    ex.heads.push_back(t.head);
    ex.punct.push_back(t.is_punct);
  }
  if (glove) ex.control_pairs = build_control_pairs(parse, *glove);
  return ex;
}

std::vector<ProbeExample> make_examples(std::span<const SentenceParse> parses, const HiddenStateSet& states,
                                        const GloveTable* glove) {
  check_alignment(states, parses);
  std::vector<ProbeExample> out;
  out.reserve(parses.size());
  for (std::size_t s = 0; s < parses.size(); ++s) out.push_back(make_example(parses[s], states.sentences[s], glove));
  return out;
}

Eigen::MatrixXd project(const ProbeParams& params, const Eigen::MatrixXd& states) {
  if (states.cols() != params.dim()) {
    throw ShapeError("hidden states have dim " + std::to_string(states.cols()) + " but the probe expects " +
                     std::to_string(params.dim()));
  }
  if (params.family == ProbeFamily::orthogonal) {
    return (states * params.ortho.transpose()) * params.scale.asDiagonal();
  }
  return states * params.proj;
}

double dso_penalty(const Eigen::MatrixXd& v) {
  const auto n = v.rows();
  const Eigen::MatrixXd a = v.transpose() * v - Eigen::MatrixXd::Identity(v.cols(), v.cols());
  const Eigen::MatrixXd b = v * v.transpose() - Eigen::MatrixXd::Identity(n, n);
  return a.squaredNorm() + b.squaredNorm();
}

Eigen::MatrixXd dso_gradient(const Eigen::MatrixXd& v) {
  const Eigen::MatrixXd a = v.transpose() * v - Eigen::MatrixXd::Identity(v.cols(), v.cols());
  const Eigen::MatrixXd b = v * v.transpose() - Eigen::MatrixXd::Identity(v.rows(), v.rows());
  return 4.0 * (v * a + b * v);
}

double huber(double residual, double delta) {
  const double r = std::abs(residual);
  return r <= delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
}

LossGrad struct_loss_grad(const ProbeParams& params, std::span<const ProbeExample> batch) {
  require_family(params, ProbeFamily::structural);
  LossGrad out{0, params.zeros_like()};
  Eigen::MatrixXd g_rows;
  for (const auto& ex : batch) {
    check_states(params, ex);
    const auto n = ex.size();
    if (n == 0) continue;
    const Eigen::MatrixXd t = ex.states * params.proj;
    out.loss += distance_term(t, ex.tree_distances, 1.0 / double(n * n), g_rows);
    out.grad.proj += ex.states.transpose() * g_rows;
  }
  return out;
}

LossGrad ortho_loss_grad(const ProbeParams& params, std::span<const ProbeExample> batch, double lambda_o) {
  require_family(params, ProbeFamily::orthogonal);
  LossGrad out{0, params.zeros_like()};
  out.loss = ortho_distance_part(params, batch, out.grad);
  out.loss += lambda_o * dso_penalty(params.ortho);
  out.grad.ortho += lambda_o * dso_gradient(params.ortho);
  return out;
}

LossGrad head_loss_grad(const ProbeParams& params, std::span<const ProbeExample> batch) {
  require_family(params, ProbeFamily::headword);
  LossGrad out{0, params.zeros_like()};
  const Eigen::RowVectorXd root_t = params.root.transpose() * params.proj;
  for (const auto& ex : batch) {
    check_states(params, ex);
    const auto n = ex.size();
    if (n == 0) continue;
    const double w = 1.0 / double(n);
    const Eigen::MatrixXd t = ex.states * params.proj;
    Eigen::MatrixXd g_rows = Eigen::MatrixXd::Zero(n, t.cols());
    Eigen::RowVectorXd g_root = Eigen::RowVectorXd::Zero(t.cols());

    // Candidate c = 0 is ROOT, c = j + 1 is token j.
    Eigen::VectorXd logits(n + 1);
    Eigen::MatrixXd diffs(n + 1, t.cols());
    Eigen::VectorXd dists(n + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      double max_logit = -std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c <= n; ++c) {
        if (c == i + 1) continue;
        diffs.row(c) = t.row(i) - (c == 0 ? root_t : Eigen::RowVectorXd(t.row(c - 1)));
        dists(c) = diffs.row(c).norm();
        logits(c) = -dists(c);
        max_logit = std::max(max_logit, logits(c));
      }
      double z = 0;
      for (Eigen::Index c = 0; c <= n; ++c) {
        if (c != i + 1) z += std::exp(logits(c) - max_logit);
      }
      const double log_z = max_logit + std::log(z);
      const int gold = ex.heads[i];
      out.loss += w * (log_z - logits(gold));
      for (Eigen::Index c = 0; c <= n; ++c) {
        if (c == i + 1 || dists(c) == 0) continue;
        const double p = std::exp(logits(c) - log_z);
        // dL/d dist = -(p - y); d dist / d T_i = diff / dist.
        const double coef = -w * (p - (c == gold ? 1.0 : 0.0)) / dists(c);
        g_rows.row(i) += coef * diffs.row(c);
        if (c == 0) {
          g_root -= coef * diffs.row(c);
        } else {
          g_rows.row(c - 1) -= coef * diffs.row(c);
        }
      }
    }
    out.grad.proj += ex.states.transpose() * g_rows + params.root * g_root;
    out.grad.root += params.proj * g_root.transpose();
  }
  return out;
}

LossGrad ctrl_loss_grad(const ProbeParams& params, std::span<const ProbeExample> batch, double delta) {
  require_family(params, ProbeFamily::control);
  LossGrad out{0, params.zeros_like()};
  for (const auto& ex : batch) {
    check_states(params, ex);
    const auto n = ex.size();
    if (n == 0 || ex.control_pairs.empty()) continue;
    const double w = 1.0 / double(n);
    const Eigen::MatrixXd t = ex.states * params.proj;
    Eigen::MatrixXd g_rows = Eigen::MatrixXd::Zero(n, t.cols());
    for (const auto& pair : ex.control_pairs) {
      const Eigen::RowVectorXd diff = t.row(pair.i) - t.row(pair.j);
      const double dist = diff.norm();
      const double r = dist - pair.target;
      out.loss += w * huber(r, delta);
      if (dist == 0) continue;
      const double coef = w * std::clamp(r, -delta, delta) / dist;
      g_rows.row(pair.i) += coef * diff;
      g_rows.row(pair.j) -= coef * diff;
    }
    out.grad.proj += ex.states.transpose() * g_rows;
  }
  return out;
}

LossGrad loss_grad(const ProbeParams& params, std::span<const ProbeExample> batch, const TrainConfig& config) {
  switch (params.family) {
    case ProbeFamily::structural: return struct_loss_grad(params, batch);
    case ProbeFamily::orthogonal: return ortho_loss_grad(params, batch, config.lambda_o);
    case ProbeFamily::headword: return head_loss_grad(params, batch);
    case ProbeFamily::control: return ctrl_loss_grad(params, batch, config.huber_delta);
  }
  throw ShapeError("unknown probe family");
}

Eigen::MatrixXd head_scores(const ProbeParams& params, const Eigen::MatrixXd& states) {
  require_family(params, ProbeFamily::headword);
  const Eigen::MatrixXd t = project(params, states);
  const Eigen::RowVectorXd root_t = params.root.transpose() * params.proj;
  const auto n = t.rows();
  Eigen::MatrixXd scores(n, n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    scores(i, 0) = -(t.row(i) - root_t).norm();
    for (Eigen::Index j = 0; j < n; ++j) {
      scores(i, j + 1) = i == j ? -std::numeric_limits<double>::infinity() : -(t.row(i) - t.row(j)).norm();
    }
  }
  return scores;
}

std::vector<int> predict_heads(const Eigen::MatrixXd& scores) {
  std::vector<int> heads(scores.rows());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c) {
      if (scores(i, c) > scores(i, best)) best = c;
    }
    heads[i] = static_cast<int>(best);
  }
  return heads;
}

AdamState AdamState::for_params(const ProbeParams& params) {
  return AdamState{params.zeros_like(), params.zeros_like(), 0};
}

void adamw_step(ProbeParams& params, const ProbeParams& grads, AdamState& state, double lr,
                const TrainConfig& config) {
  // Check everything before touching any state so a failed step is a no-op.
  const char* bad = nullptr;
  grads.for_each_tensor([&](const auto& g) {
    if (!bad && !g.allFinite()) bad = "gradient";
  });
  if (bad) throw NumericError("non-finite gradient entry");

  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, double(state.step));

  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    p *= (1.0 - lr * config.weight_decay);
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + config.eps);
  };
  if (params.proj.size()) update(params.proj, grads.proj, state.m.proj, state.v.proj);
  if (params.ortho.size()) update(params.ortho, grads.ortho, state.m.ortho, state.v.ortho);
  if (params.scale.size()) update(params.scale, grads.scale, state.m.scale, state.v.scale);
  if (params.root.size()) update(params.root, grads.root, state.m.root, state.v.root);
}

ProbeParams init_params(ProbeFamily family, Eigen::Index dim, const TrainConfig& config, std::mt19937_64& rng) {
  ProbeParams p;
  p.family = family;
  if (family == ProbeFamily::orthogonal) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd g(dim, dim);
    for (Eigen::Index c = 0; c < dim; ++c) {
      for (Eigen::Index r = 0; r < dim; ++r) g(r, c) = normal(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    // Fix column signs so Q is a deterministic function of G.
    for (Eigen::Index c = 0; c < dim; ++c) {
      if (r(c, c) < 0) q.col(c) *= -1.0;
    }
    p.ortho = q;
    p.scale = Eigen::VectorXd::Ones(dim);
    return p;
  }
  const Eigen::Index k = std::min<Eigen::Index>(config.rank, dim);
  const double bound = std::sqrt(6.0 / double(dim + k));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  p.proj.resize(dim, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    for (Eigen::Index r = 0; r < dim; ++r) p.proj(r, c) = uniform(rng);
  }
  if (family == ProbeFamily::headword) p.root = Eigen::VectorXd::Zero(dim);
  return p;
}

}  // namespace synprobe
