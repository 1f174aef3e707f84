#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "support.hpp"
#include "synprobe/error.hpp"
#include "synprobe/log.hpp"
#include "synprobe/parse_metrics.hpp"

using namespace synprobe;
using namespace synprobe::testing;

namespace {

Eigen::MatrixXd random_symmetric(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 10.0);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) m(i, j) = m(j, i) = u(rng);
  }
  return m;
}

bool spans(const std::vector<UndirectedEdge>& edges, const std::vector<int>& nodes) {
  // union-find connectivity over the listed nodes (1-based)
  std::vector<int> parent(64);
  for (int i = 0; i < 64; ++i) parent[i] = i;
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  for (const auto& e : edges) parent[find(e.a)] = find(e.b);
  for (int v : nodes) {
    if (find(v) != find(nodes.front())) return false;
  }
  return edges.size() + 1 == nodes.size();
}

}  // namespace

TEST(PredictedDistance, Examples) {
  ProbeParams p;
  p.family = ProbeFamily::structural;
  p.proj = Eigen::MatrixXd::Identity(1, 1);
  Eigen::MatrixXd h(3, 1);
  h << 0, 2, 0;
  const auto d = predicted_distance_matrix(p, h);
  EXPECT_DOUBLE_EQ(d(0, 1), 4.0);
  EXPECT_DOUBLE_EQ(d(0, 2), 0.0);
  p.family = ProbeFamily::headword;
  EXPECT_DOUBLE_EQ(predicted_distance_matrix(p, h)(0, 1), 2.0);
}

TEST(PredictedDistance, MatchesScalarLoops) {
  std::mt19937_64 rng(1);
  for (auto f : {ProbeFamily::structural, ProbeFamily::orthogonal, ProbeFamily::headword, ProbeFamily::control}) {
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 1 + int(rng() % 6), d = 1 + int(rng() % 6), k = 1 + int(rng() % 4);
      const auto p = random_params(f, d, k, rng);
      const auto ex = random_example(n, d, rng);
      const auto got = predicted_distance_matrix(p, ex.states);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          double sq = 0;
          if (f == ProbeFamily::orthogonal) {
            for (int r = 0; r < d; ++r) {
              double acc = 0;
              for (int c = 0; c < d; ++c) acc += p.ortho(r, c) * (ex.states(i, c) - ex.states(j, c));
              sq += (p.scale(r) * acc) * (p.scale(r) * acc);
            }
          } else {
            for (int c = 0; c < k; ++c) {
              double acc = 0;
              for (int r = 0; r < d; ++r) acc += (ex.states(i, r) - ex.states(j, r)) * p.proj(r, c);
              sq += acc * acc;
            }
          }
          const bool squared = f == ProbeFamily::structural || f == ProbeFamily::orthogonal;
          EXPECT_NEAR(got(i, j), squared ? sq : std::sqrt(sq), 1e-10);
        }
      }
    }
  }
}

TEST(Mst, ForcedChainAndDegenerate) {
  Eigen::MatrixXd d(3, 3);
  d << 0, 1, 5, 1, 0, 1, 5, 1, 0;
  const auto e = extract_mst(d, {false, false, false});
  const std::set<UndirectedEdge> got(e.begin(), e.end());
  EXPECT_EQ(got, (std::set<UndirectedEdge>{{1, 2}, {2, 3}}));
  EXPECT_TRUE(extract_mst(Eigen::MatrixXd::Zero(1, 1), {false}).empty());
  EXPECT_TRUE(extract_mst(Eigen::MatrixXd::Zero(3, 3), {true, false, true}).empty());
  EXPECT_TRUE(extract_mst(Eigen::MatrixXd::Zero(0, 0), {}).empty());
  EXPECT_THROW(extract_mst(Eigen::MatrixXd::Zero(2, 2), {false}), ShapeError);
}

TEST(Mst, PunctuationExcluded) {
  std::mt19937_64 rng(2);
  const auto d = random_symmetric(6, rng);
  const std::vector<bool> mask{false, true, false, false, true, false};
  const auto e = extract_mst(d, mask);
  for (const auto& edge : e) {
    EXPECT_FALSE(mask[edge.a - 1]);
    EXPECT_FALSE(mask[edge.b - 1]);
  }
  EXPECT_TRUE(spans(e, {1, 3, 4, 6}));
  EXPECT_NEAR(tree_weight(d, e), brute_force_mst_weight(d, {0, 2, 3, 5}), 1e-12);
}

TEST(Mst, MatchesExhaustiveMinimum) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + int(rng() % 6);
    const auto d = random_symmetric(n, rng);
    const auto e = extract_mst(d, std::vector<bool>(n, false));
    std::vector<int> all(n), one_based(n);
    for (int i = 0; i < n; ++i) all[i] = i, one_based[i] = i + 1;
    ASSERT_TRUE(spans(e, one_based));
    EXPECT_NEAR(tree_weight(d, e), brute_force_mst_weight(d, all), 1e-12);
  }
}

TEST(Mst, InvariantUnderMonotoneTransforms) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + int(rng() % 7);
    const auto d = random_symmetric(n, rng);
    const auto base = extract_mst(d, std::vector<bool>(n, false));
    const double a = 0.1 + double(rng() % 100) / 10.0;
    const Eigen::MatrixXd cubed = d.array().pow(3) * a + 7.0;
    const Eigen::MatrixXd logged = (d.array() + 1.0).log();
    EXPECT_EQ(extract_mst(cubed, std::vector<bool>(n, false)), base);
    EXPECT_EQ(extract_mst(logged, std::vector<bool>(n, false)), base);
  }
}

TEST(Mst, TiesBrokenByLowerEndpoints) {
  // all weights equal: Prim from token 1 takes (1,2), (1,3), (1,4)
  const auto e = extract_mst(Eigen::MatrixXd::Ones(4, 4), std::vector<bool>(4, false));
  EXPECT_EQ(e, (std::vector<UndirectedEdge>{{1, 2}, {1, 3}, {1, 4}}));
}

TEST(Uuas, ToyFixtureIsFourSixths) {
  const auto parse = toy_parse();
  EXPECT_EQ(uuas_gold_edges(parse).size(), 6u);
  EXPECT_DOUBLE_EQ(score_uuas(toy_predicted_tree(), parse), 4.0 / 6.0);
}

TEST(Uuas, IdentityDirectionAndEmptyGold) {
  const auto parse = relational_noun_parse();
  const auto gold = uuas_gold_edges(parse);
  // punct edge (8, 6) and the root attachment are excluded
  EXPECT_EQ(gold.size(), 6u);
  EXPECT_DOUBLE_EQ(score_uuas(gold, parse), 1.0);
  std::vector<UndirectedEdge> flipped;
  for (const auto& g : gold) flipped.push_back({g.b, g.a});
  EXPECT_DOUBLE_EQ(score_uuas(flipped, parse), 1.0);
  set_warnings_enabled(false);
  EXPECT_DOUBLE_EQ(score_uuas({}, make_parse("one", {{"a", "X", 0, "root"}})), 1.0);
  set_warnings_enabled(true);
}

TEST(Uuas, HandCountedFiveTokens) {
  const auto parse = make_parse("five", {{"a", "X", 2, "dep"},
                                         {"b", "X", 0, "root"},
                                         {"c", "X", 2, "dep"},
                                         {"d", "X", 5, "dep"},
                                         {"e", "X", 3, "dep"}});
  // gold {1-2, 2-3, 4-5, 3-5}; predicted shares 1-2 and 3-5
  const std::vector<UndirectedEdge> pred{{1, 2}, {1, 3}, {3, 5}, {2, 4}};
  EXPECT_DOUBLE_EQ(score_uuas(pred, parse), 0.5);
}

TEST(Uuas, DecodedScoresStayInUnitInterval) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + int(rng() % 8);
    const auto parse = random_tree("r", n, rng);
    const auto e = extract_mst(random_symmetric(n, rng), parse.punct_mask());
    const double s = score_uuas(e, parse);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(Uas, PerfectForcedAndArgmaxOracle) {
  // single token: ROOT is the only finite candidate
  ProbeParams p;
  p.family = ProbeFamily::headword;
  std::mt19937_64 rng(6);
  p = random_params(ProbeFamily::headword, 3, 2, rng);
  const auto one = make_parse("one", {{"a", "X", 0, "root"}});
  EXPECT_DOUBLE_EQ(score_uas(p, Eigen::MatrixXd::Ones(1, 3), one), 1.0);

  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + int(rng() % 6), d = 1 + int(rng() % 5);
    const auto parse = random_tree("r", n, rng);
    const auto q = random_params(ProbeFamily::headword, d, 1 + int(rng() % 3), rng);
    const auto ex = random_example(n, d, rng);
    const Eigen::MatrixXd t = ex.states * q.proj;
    const Eigen::RowVectorXd root = q.root.transpose() * q.proj;
    int hits = 0;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_score = -(t.row(i) - root).norm();
      for (int c = 1; c <= n; ++c) {
        if (c == i + 1) continue;
        const double s = -(t.row(i) - t.row(c - 1)).norm();
        if (s > best_score) best = c, best_score = s;
      }
      hits += best == parse.token(i + 1).head;
    }
    const double uas = score_uas(q, ex.states, parse);
    EXPECT_DOUBLE_EQ(uas, double(hits) / n);
    EXPECT_GE(uas, 0.0);
    EXPECT_LE(uas, 1.0);
  }
}

TEST(Spearman, Examples) {
  const std::vector<double> up{1, 2, 3, 4}, inc{2, 5, 9, 10}, dec{9, 4, 1, 0};
  EXPECT_DOUBLE_EQ(*spearman_rho(up, inc), 1.0);
  EXPECT_DOUBLE_EQ(*spearman_rho(up, dec), -1.0);
  const std::vector<double> xs{1, 2, 2}, ys{3, 5, 5};
  EXPECT_NEAR(*spearman_rho(xs, ys), 1.0, 1e-15);
  const std::vector<double> one{1}, flat{2, 2, 2};
  EXPECT_FALSE(spearman_rho(one, one).has_value());
  EXPECT_FALSE(spearman_rho(flat, xs).has_value());
  EXPECT_THROW(spearman_rho(up, xs), ShapeError);
}

TEST(Spearman, SelfCorrelationIsOne) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(2 + rng() % 10);
    for (auto& x : v) x = double(rng() % 5);
    if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; })) v[0] += 1;
    EXPECT_NEAR(*spearman_rho(v, v), 1.0, 1e-12);
  }
}

TEST(ControlVariance, ConstantCollapsedAndScalarOracle) {
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(4, 0.0, 3.0);
  ProbeParams p;
  p.family = ProbeFamily::control;
  std::mt19937_64 rng(8);
  p.proj = random_params(ProbeFamily::control, 4, 3, rng).proj;
  auto r = control_variance_report({{v, v, v}}, p);
  EXPECT_DOUBLE_EQ(r.mean_variance_before, 0.0);
  EXPECT_DOUBLE_EQ(r.mean_variance_after, 0.0);

  std::normal_distribution<double> normal;
  std::vector<std::vector<Eigen::VectorXd>> contexts(3);
  for (auto& w : contexts) {
    for (int c = 0; c < 10; ++c) {
      Eigen::VectorXd x(4);
      for (auto& e : x) e = normal(rng);
      w.push_back(x);
    }
  }
  ProbeParams zero = p;
  zero.proj.setZero();
  r = control_variance_report(contexts, zero);
  EXPECT_GT(r.mean_variance_before, 0.0);
  EXPECT_DOUBLE_EQ(r.mean_variance_after, 0.0);

  // scalar loop: population variance per coordinate, averaged over
  // coordinates, then over words
  auto variance = [](const std::vector<std::vector<double>>& rows) {
    const std::size_t dim = rows[0].size();
    double total = 0;
    for (std::size_t c = 0; c < dim; ++c) {
      double mean = 0;
      for (const auto& r : rows) mean += r[c];
      mean /= double(rows.size());
      double ss = 0;
      for (const auto& r : rows) ss += (r[c] - mean) * (r[c] - mean);
      total += ss / double(rows.size());
    }
    return total / double(dim);
  };
  double before = 0, after = 0;
  for (const auto& w : contexts) {
    std::vector<std::vector<double>> raw, mapped;
    for (const auto& x : w) {
      raw.emplace_back(x.data(), x.data() + x.size());
      std::vector<double> m(p.proj.cols(), 0.0);
      for (Eigen::Index c = 0; c < p.proj.cols(); ++c) {
        for (Eigen::Index r = 0; r < 4; ++r) m[c] += x(r) * p.proj(r, c);
      }
      mapped.push_back(m);
    }
    before += variance(raw);
    after += variance(mapped);
  }
  r = control_variance_report(contexts, p);
  EXPECT_NEAR(r.mean_variance_before, before / 3, 1e-12);
  EXPECT_NEAR(r.mean_variance_after, after / 3, 1e-12);
  EXPECT_EQ(r.words_used, 3u);

  set_warnings_enabled(false);
  contexts.push_back({v});
  EXPECT_EQ(control_variance_report(contexts, p).words_skipped, 1u);
  set_warnings_enabled(true);
}

TEST(EvaluateProbe, SummaryAndCsv) {
  const std::vector<SentenceParse> parses{toy_parse(), relational_noun_parse()};
  std::mt19937_64 rng(9);
  std::vector<ProbeExample> examples;
  for (const auto& p : parses) {
    StateMatrix s(p.size(), 3);
    s.setRandom();
    examples.push_back(make_example(p, s));
  }
  const auto params = random_params(ProbeFamily::structural, 3, 2, rng);
  const auto summary = evaluate_probe(params, parses, examples);
  ASSERT_EQ(summary.per_sentence.size(), 2u);
  EXPECT_EQ(summary.kind, MetricKind::uuas);
  EXPECT_NEAR(summary.aggregate, (summary.per_sentence[0].score + summary.per_sentence[1].score) / 2, 1e-15);
  EXPECT_EQ(summary.to_csv().substr(0, 30), "sentence_id,score,degenerate\nt");
  EXPECT_THROW(evaluate_probe(params, parses, std::span(examples).first(1)), ShapeError);
}
