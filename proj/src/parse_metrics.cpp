#include "synprobe/parse_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "synprobe/error.hpp"
#include "synprobe/log.hpp"

namespace synprobe {

Eigen::MatrixXd predicted_distance_matrix(const ProbeParams& params, const Eigen::MatrixXd& states) {
  const Eigen::MatrixXd t = project(params, states);
  const bool squared = params.family == ProbeFamily::structural || params.family == ProbeFamily::orthogonal;
  const auto n = t.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double sq = (t.row(i) - t.row(j)).squaredNorm();
      d(i, j) = d(j, i) = squared ? sq : std::sqrt(sq);
    }
  }
  return d;
}

std::vector<UndirectedEdge> extract_mst(const Eigen::MatrixXd& distances, const std::vector<bool>& punct_mask) {
  const auto n = distances.rows();
  if (distances.cols() != n || static_cast<Eigen::Index>(punct_mask.size()) != n) {
    throw ShapeError("distance matrix and punctuation mask disagree in size");
  }
  std::vector<int> nodes;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!punct_mask[i]) nodes.push_back(static_cast<int>(i));
  }
  std::vector<UndirectedEdge> edges;
  if (nodes.size() < 2) return edges;

  using Key = std::tuple<double, int, int>;  // weight, lower, higher (0-based)
  const Key none{std::numeric_limits<double>::infinity(), std::numeric_limits<int>::max(), 0};
  std::vector<bool> in_tree(n, false);
  std::vector<Key> best(n, none);
  auto relax = [&](int u) {
    for (int v : nodes) {
      if (in_tree[v]) continue;
      const Key k{distances(u, v), std::min(u, v), std::max(u, v)};
      if (k < best[v]) best[v] = k;
    }
  };
  in_tree[nodes.front()] = true;
  relax(nodes.front());
  for (std::size_t added = 1; added < nodes.size(); ++added) {
    int pick = -1;
    for (int v : nodes) {
      if (!in_tree[v] && (pick < 0 || best[v] < best[pick])) pick = v;
    }
    const auto& [w, lo, hi] = best[pick];
    edges.push_back({lo + 1, hi + 1});
    in_tree[pick] = true;
    relax(pick);
  }
  return edges;
}

std::vector<UndirectedEdge> uuas_gold_edges(const SentenceParse& parse) {
  std::vector<UndirectedEdge> gold;
  for (const auto& arc : parse.gold_arcs()) {
    if (parse.token(arc.child).is_punct || parse.token(arc.head).is_punct) continue;
    gold.push_back(UndirectedEdge::of(arc.child, arc.head));
  }
  return gold;
}

double score_uuas(std::span<const UndirectedEdge> predicted, const SentenceParse& parse) {
  const auto gold = uuas_gold_edges(parse);
  if (gold.empty()) {
    log_warning("sentence " + parse.id() + " has no scorable gold edges; UUAS set to 1");
    return 1.0;
  }
  std::set<UndirectedEdge> pred;
  for (const auto& e : predicted) pred.insert(UndirectedEdge::of(e.a, e.b));
  std::size_t hit = 0;
  for (const auto& e : gold) hit += pred.count(e);
  return double(hit) / double(gold.size());
}

double score_uas(const ProbeParams& params, const Eigen::MatrixXd& states, const SentenceParse& parse) {
  if (static_cast<std::size_t>(states.rows()) != parse.size()) {
    throw ShapeError("state rows do not match sentence " + parse.id());
  }
  if (parse.size() == 0) return 1.0;
  const auto pred = predict_heads(head_scores(params, states));
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == parse.tokens()[i].head;
  return double(hit) / double(pred.size());
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * double(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::optional<double> spearman_rho(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ShapeError("spearman_rho needs equal-length inputs");
  if (xs.size() < 2) return std::nullopt;
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double n = double(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> control_rho(const ProbeParams& params, const ProbeExample& example) {
  const Eigen::MatrixXd t = project(params, example.states);
  std::vector<double> pred, target;
  for (const auto& p : example.control_pairs) {
    pred.push_back((t.row(p.i) - t.row(p.j)).norm());
    target.push_back(p.target);
  }
  return spearman_rho(pred, target);
}

ControlVarianceReport control_variance_report(const std::vector<std::vector<Eigen::VectorXd>>& contexts,
                                              const ProbeParams& params) {
  auto mean_coord_variance = [](const std::vector<Eigen::VectorXd>& vs) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(vs.front().size());
    for (const auto& v : vs) mean += v;
    mean /= double(vs.size());
    Eigen::VectorXd var = Eigen::VectorXd::Zero(mean.size());
    for (const auto& v : vs) var += (v - mean).cwiseAbs2();
    var /= double(vs.size());
    return var.size() ? var.mean() : 0.0;
  };
  ControlVarianceReport report;
  double before = 0, after = 0;
  for (std::size_t w = 0; w < contexts.size(); ++w) {
    const auto& vs = contexts[w];
    if (vs.size() < 2) {
      log_warning("control variance: word " + std::to_string(w) + " has fewer than 2 contexts; skipped");
      ++report.words_skipped;
      continue;
    }
    std::vector<Eigen::VectorXd> mapped;
    mapped.reserve(vs.size());
    for (const auto& v : vs) {
      const Eigen::MatrixXd row = v.transpose();
      mapped.emplace_back(project(params, row).row(0).transpose());
    }
    before += mean_coord_variance(vs);
    after += mean_coord_variance(mapped);
    ++report.words_used;
  }
  if (report.words_used) {
    report.mean_variance_before = before / double(report.words_used);
    report.mean_variance_after = after / double(report.words_used);
  }
  return report;
}

std::string metric_name(MetricKind kind) {
  switch (kind) {
    case MetricKind::uuas: return "uuas";
    case MetricKind::uas: return "uas";
    case MetricKind::spearman_rho: return "spearman_rho";
  }
  return "unknown";
}

MetricKind native_metric(ProbeFamily family) {
  switch (family) {
    case ProbeFamily::headword: return MetricKind::uas;
    case ProbeFamily::control: return MetricKind::spearman_rho;
    default: return MetricKind::uuas;
  }
}

std::string ProbeEvalSummary::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "sentence_id,score,degenerate\n";
  for (const auto& s : per_sentence) out << s.sentence_id << ',' << s.score << ',' << (s.degenerate ? 1 : 0) << '\n';
  return out.str();
}

std::string ProbeEvalSummary::aggregate_json() const {
  nlohmann::ordered_json j;
  j["metric"] = metric_name(kind);
  j["sentences"] = per_sentence.size();
  j["degenerate"] = std::count_if(per_sentence.begin(), per_sentence.end(), [](const auto& s) { return s.degenerate; });
  j["aggregate"] = aggregate;
  return j.dump(2);
}

ProbeEvalSummary evaluate_probe(const ProbeParams& params, std::span<const SentenceParse> parses,
                                std::span<const ProbeExample> examples) {
  if (parses.size() != examples.size()) throw ShapeError("parses and examples differ in count");
  ProbeEvalSummary summary;
  summary.kind = native_metric(params.family);
  double total = 0;
  std::size_t counted = 0;
  for (std::size_t s = 0; s < parses.size(); ++s) {
    SentenceScore sc;
    sc.sentence_id = parses[s].id();
    switch (summary.kind) {
      case MetricKind::uuas: {
        const auto pred = extract_mst(predicted_distance_matrix(params, examples[s].states), parses[s].punct_mask());
        sc.degenerate = uuas_gold_edges(parses[s]).empty();
        sc.score = sc.degenerate ? 1.0 : score_uuas(pred, parses[s]);
        break;
      }
      case MetricKind::uas:
        sc.score = score_uas(params, examples[s].states, parses[s]);
        break;
      case MetricKind::spearman_rho: {
        const auto rho = control_rho(params, examples[s]);
        sc.degenerate = !rho.has_value();
        sc.score = rho.value_or(0.0);
        break;
      }
    }
    if (!(summary.kind == MetricKind::spearman_rho && sc.degenerate)) {
      total += sc.score;
      ++counted;
    }
    summary.per_sentence.push_back(std::move(sc));
  }
  summary.aggregate = counted ? total / double(counted) : 0.0;
  return summary;
}

}  // namespace synprobe
