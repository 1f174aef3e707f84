#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace synprobe::testing {

namespace fs = std::filesystem;

SentenceParse make_parse(const std::string& id, const std::vector<Row>& rows) {
  std::vector<Token> tokens;
  std::string text;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    const bool punct = r.upos == "PUNCT";
    tokens.push_back(Token{int(i) + 1, r.form, r.upos, r.xpos, r.head, r.deprel, punct});
    if (!text.empty() && !punct) text += ' ';
    text += r.form;
  }
  return SentenceParse(id, text, std::move(tokens));
}

SentenceParse relational_noun_parse() {
  return make_parse("relational", {{"The", "DT", 2, "det", "DET"},
                                   {"prints", "NNS", 6, "nsubj", "NOUN"},
                                   {"of", "IN", 5, "case", "ADP"},
                                   {"every", "DT", 5, "det", "DET"},
                                   {"vase", "NN", 2, "nmod", "NOUN"},
                                   {"aggravate", "VBP", 0, "root", "VERB"},
                                   {"Nina", "NNP", 6, "obj", "PROPN"},
                                   {".", ".", 6, "punct", "PUNCT"}});
}

SentenceParse wh_gap_parse() {
  return make_parse("wh", {{"Marcus", "NNP", 3, "nsubj", "PROPN"},
                           {"had", "VBD", 3, "aux", "AUX"},
                           {"remembered", "VBN", 0, "root", "VERB"},
                           {"who", "WP", 7, "obj", "PRON"},
                           {"some", "DT", 6, "det", "DET"},
                           {"lady", "NN", 7, "nsubj", "NOUN"},
                           {"disliked", "VBD", 3, "ccomp", "VERB"},
                           {".", ".", 3, "punct", "PUNCT"}});
}

SentenceParse auxiliary_parse() {
  return make_parse("aux", {{"The", "DT", 2, "det", "DET"},
                            {"plays", "NNS", 6, "nsubj", "NOUN"},
                            {"about", "IN", 4, "case", "ADP"},
                            {"art", "NN", 2, "nmod", "NOUN"},
                            {"have", "VBP", 6, "aux", "AUX"},
                            {"alarmed", "VBN", 0, "root", "VERB"},
                            {"Mitchell", "NNP", 6, "obj", "PROPN"},
                            {".", ".", 6, "punct", "PUNCT"}});
}

namespace {

MinimalPair pair_of(const std::string& uid, const std::string& good, const std::string& bad) {
  MinimalPair p;
  p.uid = uid;
  p.phenomenon = std::string(phenomenon_of(uid).value_or(""));
  p.sentence_good = good;
  p.sentence_bad = bad;
  return p;
}

}  // namespace

MinimalPair relational_noun_pair() {
  return pair_of("distractor_agreement_relational_noun", "The prints of every vase aggravate Nina.",
                 "The prints of every vase aggravates Nina.");
}

MinimalPair wh_gap_pair() {
  return pair_of("wh_vs_that_with_gap", "Marcus had remembered who some lady disliked.",
                 "Marcus had remembered that some lady disliked.");
}

MinimalPair auxiliary_pair() {
  return pair_of("distractor_agreement_relative_clause", "The plays about art have alarmed Mitchell.",
                 "The plays about art has alarmed Mitchell.");
}

SentenceParse toy_parse() {
  return make_parse("toy", {{"The", "DT", 2, "det"},
                            {"cat", "NN", 3, "nsubj"},
                            {"sat", "VBD", 0, "root"},
                            {"on", "IN", 7, "case"},
                            {"the", "DT", 7, "det"},
                            {"warm", "JJ", 7, "amod"},
                            {"mat", "NN", 3, "obl"}});
}

std::vector<UndirectedEdge> toy_predicted_tree() {
  // shares (1,2) (2,3) (3,7) (6,7) with the gold tree; (3,4) (4,5) are wrong
  return {{1, 2}, {2, 3}, {3, 4}, {4, 5}, {3, 7}, {6, 7}};
}

SentenceParse random_tree(const std::string& id, int n, std::mt19937_64& rng) {
  std::vector<int> parent(n + 1, 0);
  if (n >= 2) {
    std::uniform_int_distribution<int> pick(1, n);
    std::vector<int> pruefer(std::max(0, n - 2));
    for (auto& v : pruefer) v = pick(rng);
    std::vector<int> degree(n + 1, 1);
    for (int v : pruefer) ++degree[v];
    std::vector<std::vector<int>> adj(n + 1);
    for (int v : pruefer) {
      int leaf = 1;
      while (degree[leaf] != 1) ++leaf;
      adj[leaf].push_back(v);
      adj[v].push_back(leaf);
      --degree[leaf];
      --degree[v];
    }
    std::vector<int> last;
    for (int u = 1; u <= n; ++u) {
      if (degree[u] == 1) last.push_back(u);
    }
    adj[last[0]].push_back(last[1]);
    adj[last[1]].push_back(last[0]);
    // orient away from a random root
    const int root = pick(rng);
    std::vector<int> stack{root};
    std::vector<bool> seen(n + 1, false);
    seen[root] = true;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v : adj[u]) {
        if (!seen[v]) {
          seen[v] = true;
          parent[v] = u;
          stack.push_back(v);
        }
      }
    }
  }
  std::vector<Row> rows;
  for (int i = 1; i <= n; ++i) {
    rows.push_back({"w" + std::to_string(i), i % 2 ? "NN" : "VB", parent[i], parent[i] ? "dep" : "root"});
  }
  return make_parse(id, rows);
}

Eigen::MatrixXi floyd_warshall(const SentenceParse& parse) {
  const int n = int(parse.size());
  const int inf = 1 << 20;
  Eigen::MatrixXi d = Eigen::MatrixXi::Constant(n + 1, n + 1, inf);
  for (int i = 0; i <= n; ++i) d(i, i) = 0;
  for (const auto& t : parse.tokens()) {
    d(t.index, t.head) = 1;
    d(t.head, t.index) = 1;
  }
  for (int k = 0; k <= n; ++k) {
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; j <= n; ++j) d(i, j) = std::min(d(i, j), d(i, k) + d(k, j));
    }
  }
  return d.bottomRightCorner(n, n);
}

double brute_force_mst_weight(const Eigen::MatrixXd& w, const std::vector<int>& vertices) {
  const int n = int(vertices.size());
  if (n <= 1) return 0.0;
  if (n == 2) return w(vertices[0], vertices[1]);
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> seq(n - 2, 0);
  while (true) {
    // decode Prüfer sequence over positions 0..n-1
    std::vector<int> degree(n, 1);
    for (int v : seq) ++degree[v];
    double total = 0;
    for (int v : seq) {
      int leaf = 0;
      while (degree[leaf] != 1) ++leaf;
      total += w(vertices[leaf], vertices[v]);
      --degree[leaf];
      --degree[v];
    }
    int u = -1, v = -1;
    for (int x = 0; x < n; ++x) {
      if (degree[x] == 1) (u < 0 ? u : v) = x;
    }
    total += w(vertices[u], vertices[v]);
    best = std::min(best, total);

    int pos = 0;
    while (pos < n - 2 && ++seq[pos] == n) seq[pos++] = 0;
    if (pos == n - 2) break;
  }
  return best;
}

double tree_weight(const Eigen::MatrixXd& w, const std::vector<UndirectedEdge>& edges) {
  double total = 0;
  for (const auto& e : edges) total += w(e.a - 1, e.b - 1);
  return total;
}

std::vector<double> holm_reference(const std::vector<double>& p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
  std::vector<double> out(m);
  for (std::size_t rank = 0; rank < m; ++rank) {
    double v = 0;
    // adjusted value is the max over all earlier-or-equal ranks
    for (std::size_t r = 0; r <= rank; ++r) v = std::max(v, double(m - r) * p[order[r]]);
    out[order[rank]] = std::min(1.0, v);
  }
  return out;
}

double max_gradient_error(ProbeParams params, const std::function<LossGrad(const ProbeParams&)>& f, double step) {
  const LossGrad analytic = f(params);
  std::vector<Eigen::MatrixXd> grads;
  analytic.grad.for_each_tensor([&](const auto& t) { grads.emplace_back(t); });
  double worst = 0;
  std::size_t which = 0;
  params.for_each_tensor([&](auto& t) {
    const Eigen::MatrixXd& g = grads[which++];
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double saved = t.data()[i];
      t.data()[i] = saved + step;
      const double up = f(params).loss;
      t.data()[i] = saved - step;
      const double down = f(params).loss;
      t.data()[i] = saved;
      const double numeric = (up - down) / (2 * step);
      const double a = g.data()[i];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, err);
    }
  });
  return worst;
}

ProbeExample random_example(int n, int d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.2, 3.0);
  const SentenceParse parse = random_tree("r", n, rng);
  ProbeExample ex;
  ex.states.resize(n, d);
  for (Eigen::Index i = 0; i < ex.states.size(); ++i) ex.states.data()[i] = normal(rng);
  ex.tree_distances.resize(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) ex.tree_distances(i, j) = parse.distance(i + 1, j + 1);
  }
  for (const auto& t : parse.tokens()) {
    ex.heads.push_back(t.head);
    ex.punct.push_back(false);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) ex.control_pairs.push_back({i, j, unif(rng)});
  }
  return ex;
}

ProbeParams random_params(ProbeFamily family, int d, int k, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 0.5);
  auto fill = [&](auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = normal(rng);
  };
  ProbeParams p;
  p.family = family;
  if (family == ProbeFamily::orthogonal) {
    p.ortho.resize(d, d);
    p.scale.resize(d);
    fill(p.ortho);
    fill(p.scale);
    return p;
  }
  p.proj.resize(d, k);
  fill(p.proj);
  if (family == ProbeFamily::headword) {
    p.root.resize(d);
    fill(p.root);
  }
  return p;
}

TempDir::TempDir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  std::ostringstream name;
  name << "synprobe-" << tag << "-" << std::hex << rng();
  path_ = fs::temp_directory_path() / name.str();
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

std::string diff_trees(const fs::path& a, const fs::path& b) {
  auto listing = [](const fs::path& root) {
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root).string());
    }
    std::sort(files.begin(), files.end());
    return files;
  };
  const auto fa = listing(a), fb = listing(b);
  if (fa != fb) return "file lists differ (" + std::to_string(fa.size()) + " vs " + std::to_string(fb.size()) + ")";
  for (const auto& f : fa) {
    std::ifstream ia(a / f, std::ios::binary), ib(b / f, std::ios::binary);
    std::ostringstream sa, sb;
    sa << ia.rdbuf();
    sb << ib.rdbuf();
    if (sa.str() != sb.str()) return f;
  }
  return {};
}

}  // namespace synprobe::testing
