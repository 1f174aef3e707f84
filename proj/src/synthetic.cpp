#include "synprobe/synthetic.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>

#include "synprobe/error.hpp"
#include "synprobe/hashing.hpp"
#include "synprobe/outcomes.hpp"

namespace synprobe::synthetic {

namespace fs = std::filesystem;

namespace {

struct WordClass {
  const char* xpos;
  const char* upos;
  std::vector<std::string> words;
};

const std::vector<WordClass>& word_classes() {
  static const std::vector<WordClass> classes = {
      {"DT", "DET", {"the", "a", "every", "some", "this"}},
      {"NN", "NOUN", {"vase", "dog", "lady", "library", "art", "cat", "book", "teacher", "river", "song"}},
      {"NNS", "NOUN", {"prints", "dogs", "plays", "libraries", "cats", "books", "teachers"}},
      {"NNP", "PROPN", {"Nina", "Marcus", "Mitchell", "Sara", "Carl"}},
      {"VBP", "VERB", {"aggravate", "like", "see", "know"}},
      {"VBZ", "VERB", {"aggravates", "likes", "sees", "knows"}},
      {"VBD", "VERB", {"disliked", "remembered", "saw", "knew"}},
      {"IN", "ADP", {"of", "about", "with", "near"}},
      {"JJ", "ADJ", {"red", "old", "happy", "small"}},
      {"RB", "ADV", {"quickly", "often", "never"}},
  };
  return classes;
}

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = n(rng);
  }
  return m;
}

Eigen::MatrixXd orthonormal_columns(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(rows, cols, rng));
  return qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
}

std::string join_forms(const std::vector<Token>& tokens) {
  std::string s;
  for (const auto& t : tokens) {
    if (!s.empty() && !t.is_punct) s += ' ';
    s += t.form;
  }
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace

std::vector<std::string> vocabulary() {
  std::set<std::string> words;
  for (const auto& c : word_classes()) words.insert(c.words.begin(), c.words.end());
  for (const char* w : {"prints", "plays", "have", "has", "aggravated", "alarmed", "All", "that", "were",
                        "aggravating", "legislature", "joke", "jokes", "around", "talk", "talks", "wander",
                        "wanders", "helping", "visiting", "had", "forgotten", "discovered", "who", "helped",
                        "liked", "herself", "himself", "these", "hugged", "admired", "lady", "Lucy", "Mary"}) {
    words.insert(w);
  }
  return {words.begin(), words.end()};
}

Eigen::MatrixXd tree_distance_matrix(const SentenceParse& parse) {
  const auto n = static_cast<Eigen::Index>(parse.size());
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) d(i, j) = parse.distance(int(i) + 1, int(j) + 1);
  }
  return d;
}

Eigen::MatrixXd mds_embedding(const Eigen::MatrixXd& sq_dist, Eigen::Index max_dim, double tol) {
  const auto n = sq_dist.rows();
  if (sq_dist.cols() != n) throw ShapeError("distance matrix must be square");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, max_dim);
  if (n == 0) return out;
  const Eigen::MatrixXd j = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / double(n));
  const Eigen::MatrixXd gram = -0.5 * j * sq_dist * j;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const auto& vals = eig.eigenvalues();  // ascending
  const double scale = std::max(1.0, sq_dist.cwiseAbs().maxCoeff());
  Eigen::Index used = 0;
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    if (vals(k) <= tol * scale) break;
    if (used == max_dim) throw NumericError("metric needs more than " + std::to_string(max_dim) + " dimensions");
    out.col(used++) = eig.eigenvectors().col(k) * std::sqrt(vals(k));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = i + 1; k < n; ++k) {
      const double got = (out.row(i) - out.row(k)).squaredNorm();
      if (std::abs(got - sq_dist(i, k)) > tol * scale) {
        throw NumericError("distance matrix is not a squared Euclidean metric (pair " + std::to_string(i) + "," +
                           std::to_string(k) + ")");
      }
    }
  }
  return out;
}

SentenceParse random_sentence(const std::string& id, int length, bool with_punct, std::mt19937_64& rng) {
  const int words = with_punct ? length - 1 : length;
  if (words < 1) throw ValidationError("sentence needs at least one word");
  std::vector<Token> tokens(static_cast<std::size_t>(length));
  for (int i = 0; i < words; ++i) {
    const auto& cls = pick(word_classes(), rng);
    auto& t = tokens[std::size_t(i)];
    t.index = i + 1;
    t.form = pick(cls.words, rng);
    t.xpos = cls.xpos;
    t.upos = cls.upos;
  }
  std::vector<int> order(static_cast<std::size_t>(words));
  std::iota(order.begin(), order.end(), 1);
  std::shuffle(order.begin(), order.end(), rng);
  tokens[std::size_t(order[0] - 1)].head = 0;
  tokens[std::size_t(order[0] - 1)].deprel = "root";
  for (int k = 1; k < words; ++k) {
    std::uniform_int_distribution<int> d(0, k - 1);
    auto& t = tokens[std::size_t(order[std::size_t(k)] - 1)];
    t.head = order[std::size_t(d(rng))];
    t.deprel = "dep";
  }
  if (with_punct) {
    auto& p = tokens.back();
    p = Token{length, ".", "PUNCT", ".", order[0], "punct", true};
  }
  std::string text = join_forms(tokens);
  return SentenceParse(id, std::move(text), std::move(tokens));
}

PlantedCorpus build_planted_corpus(const PlantedOptions& o) {
  if (o.max_length - 1 > o.latent) throw ValidationError("latent dimension too small for the longest sentence");
  if (o.latent > o.dim) throw ValidationError("latent dimension exceeds hidden width");
  std::mt19937_64 rng(o.seed);
  PlantedCorpus corpus;
  Eigen::VectorXd s(o.latent);
  std::uniform_real_distribution<double> logu(std::log(o.scale_lo), std::log(o.scale_hi));
  for (int k = 0; k < o.latent; ++k) s(k) = std::exp(logu(rng));
  corpus.mixing = orthonormal_columns(o.dim, o.latent, rng) * s.asDiagonal();

  std::uniform_int_distribution<int> len(o.min_length, o.max_length);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto make_split = [&](PlantedSplit& split, const std::string& name, int count) {
    split.states.model_id = "planted";
    split.states.parse_file = name + ".conllu";
    split.states.dim = std::uint32_t(o.dim);
    for (int i = 0; i < count; ++i) {
      const int n = len(rng);
      const bool punct = n >= 3 && coin(rng);
      split.parses.push_back(random_sentence(name + "-" + std::to_string(i), n, punct, rng));
      const Eigen::MatrixXd z = mds_embedding(tree_distance_matrix(split.parses.back()), o.latent);
      Eigen::MatrixXd h = z * corpus.mixing.transpose();
      for (Eigen::Index r = 0; r < h.rows(); ++r) {
        for (Eigen::Index c = 0; c < h.cols(); ++c) h(r, c) += o.noise * noise(rng);
      }
      split.states.sentences.push_back(h.cast<float>());
    }
  };
  make_split(corpus.train, "train", o.train);
  make_split(corpus.dev, "dev", o.dev);
  make_split(corpus.test, "test", o.test);
  return corpus;
}

// ---------------------------------------------------------------------------
// Smoke fixture

namespace {

struct TemplateToken {
  std::string form;
  const char* upos;
  const char* xpos;
  int head;
  const char* deprel;
};

struct TemplatePair {
  std::vector<TemplateToken> good;
  int bad_position;  // 1-based token replaced in the unacceptable sentence
  std::string bad_form;
};

SentenceParse to_parse(const std::string& id, const std::vector<TemplateToken>& tt) {
  std::vector<Token> tokens;
  for (std::size_t i = 0; i < tt.size(); ++i) {
    tokens.push_back(Token{int(i) + 1, tt[i].form, tt[i].upos, tt[i].xpos, tt[i].head, tt[i].deprel,
                           std::string(tt[i].upos) == "PUNCT"});
  }
  std::string text = join_forms(tokens);
  return SentenceParse(id, std::move(text), std::move(tokens));
}

std::string sentence_with(const std::vector<TemplateToken>& tt, int position, const std::string& form) {
  std::vector<Token> tokens;
  for (std::size_t i = 0; i < tt.size(); ++i) {
    Token t;
    t.form = int(i) + 1 == position ? form : tt[i].form;
    t.is_punct = std::string(tt[i].upos) == "PUNCT";
    tokens.push_back(t);
  }
  return join_forms(tokens);
}

TemplatePair make_template(const std::string& uid, int idx, std::mt19937_64& rng) {
  const std::vector<std::string> plural = {"prints", "plays", "dogs", "libraries", "teachers", "books"};
  const std::vector<std::string> singular = {"vase", "art", "lady", "river", "song", "cat"};
  const std::vector<std::string> names = {"Nina", "Marcus", "Mitchell", "Sara", "Carl"};
  const std::vector<std::string> female = {"Nina", "Sara", "Lucy", "Mary"};
  const std::vector<std::pair<std::string, std::string>> agree = {
      {"aggravate", "aggravates"}, {"like", "likes"}, {"see", "sees"}, {"know", "knows"}};
  const std::vector<std::pair<std::string, std::string>> intrans = {
      {"joke", "jokes"}, {"talk", "talks"}, {"wander", "wanders"}};
  const std::vector<std::string> past = {"disliked", "saw", "liked", "helped"};
  const std::vector<std::string> remember = {"remembered", "forgotten", "discovered"};

  if (uid == "distractor_agreement_relational_noun") {
    if (idx % 4 == 3) {
      // Auxiliary carries the agreement; the nsubj edge attaches to the
      // participle, so this pair is filtered.
      return {{{"The", "DET", "DT", 2, "det"},
               {pick(plural, rng), "NOUN", "NNS", 6, "nsubj"},
               {"about", "ADP", "IN", 4, "case"},
               {pick(singular, rng), "NOUN", "NN", 2, "nmod"},
               {"have", "AUX", "VBP", 6, "aux"},
               {idx % 8 == 3 ? "alarmed" : "aggravated", "VERB", "VBN", 0, "root"},
               {pick(names, rng), "PROPN", "NNP", 6, "obj"},
               {".", "PUNCT", ".", 6, "punct"}},
              5,
              "has"};
    }
    const auto& v = pick(agree, rng);
    return {{{"The", "DET", "DT", 2, "det"},
             {pick(plural, rng), "NOUN", "NNS", 6, "nsubj"},
             {"of", "ADP", "IN", 5, "case"},
             {"every", "DET", "DT", 5, "det"},
             {pick(singular, rng), "NOUN", "NN", 2, "nmod"},
             {v.first, "VERB", "VBP", 0, "root"},
             {pick(names, rng), "PROPN", "NNP", 6, "obj"},
             {".", "PUNCT", ".", 6, "punct"}},
            6,
            v.second};
  }
  if (uid == "distractor_agreement_relative_clause") {
    const auto& v = pick(intrans, rng);
    return {{{"All", "DET", "DT", 2, "det"},
             {pick(plural, rng), "NOUN", "NNS", 8, "nsubj"},
             {"that", "PRON", "WDT", 5, "nsubj"},
             {"were", "AUX", "VBD", 5, "aux"},
             {idx % 2 ? "helping" : "visiting", "VERB", "VBG", 2, "acl:relcl"},
             {"a", "DET", "DT", 7, "det"},
             {pick(singular, rng), "NOUN", "NN", 5, "obj"},
             {v.first, "VERB", "VBP", 0, "root"},
             {"around", "ADV", "RB", 8, "advmod"},
             {".", "PUNCT", ".", 8, "punct"}},
            8,
            v.second};
  }
  if (uid == "wh_vs_that_with_gap") {
    return {{{pick(names, rng), "PROPN", "NNP", 3, "nsubj"},
             {"had", "AUX", "VBD", 3, "aux"},
             {pick(remember, rng), "VERB", "VBN", 0, "root"},
             {"who", "PRON", "WP", 7, "obj"},
             {"some", "DET", "DT", 6, "det"},
             {pick(singular, rng), "NOUN", "NN", 7, "nsubj"},
             {pick(past, rng), "VERB", "VBD", 3, "ccomp"},
             {".", "PUNCT", ".", 3, "punct"}},
            4,
            "that"};
  }
  if (uid == "wh_vs_that_with_gap_long_distance") {
    return {{{pick(names, rng), "PROPN", "NNP", 3, "nsubj"},
             {"had", "AUX", "VBD", 3, "aux"},
             {pick(remember, rng), "VERB", "VBN", 0, "root"},
             {"who", "PRON", "WP", 10, "obj"},
             {"the", "DET", "DT", 6, "det"},
             {pick(singular, rng), "NOUN", "NN", 10, "nsubj"},
             {"that", "PRON", "WDT", 8, "nsubj"},
             {"knew", "VERB", "VBD", 6, "acl:relcl"},
             {pick(names, rng), "PROPN", "NNP", 8, "obj"},
             {pick(past, rng), "VERB", "VBD", 3, "ccomp"},
             {".", "PUNCT", ".", 3, "punct"}},
            4,
            "that"};
  }
  if (uid == "anaphor_gender_agreement") {
    return {{{pick(female, rng), "PROPN", "NNP", 2, "nsubj"},
             {idx % 2 ? "hugged" : "admired", "VERB", "VBD", 0, "root"},
             {"herself", "PRON", "PRP", 2, "obj"},
             {".", "PUNCT", ".", 2, "punct"}},
            3,
            "himself"};
  }
  if (uid == "determiner_noun_agreement_1") {
    return {{{pick(names, rng), "PROPN", "NNP", 2, "nsubj"},
             {pick(past, rng), "VERB", "VBD", 0, "root"},
             {"this", "DET", "DT", 4, "det"},
             {pick(singular, rng), "NOUN", "NN", 2, "obj"},
             {".", "PUNCT", ".", 2, "punct"}},
            3,
            "these"};
  }
  throw ValidationError("no fixture template for paradigm " + uid);
}

const std::vector<std::string>& fixture_paradigms() {
  static const std::vector<std::string> uids = {
      "distractor_agreement_relational_noun", "distractor_agreement_relative_clause",
      "wh_vs_that_with_gap",                  "wh_vs_that_with_gap_long_distance",
      "anaphor_gender_agreement",             "determiner_noun_agreement_1"};
  return uids;
}

Eigen::VectorXd labelled_gaussian(const std::string& label, Eigen::Index n) {
  std::mt19937_64 rng(seed_from_label(label));
  return gaussian(n, 1, rng).col(0);
}

// Generative model of one toy transformer: layer 0 is a per-word embedding;
// deeper layers add planted tree geometry, a GloVe-aligned lexical component
// and noise, with strengths that vary by model and layer.
struct ToyModel {
  std::string id;
  double quality = 0;
  int best_layer = 1;
  int dim = 0;
  Eigen::Index latent = 0;
  std::vector<Eigen::MatrixXd> tree_maps;  // per layer, dim x latent
  Eigen::MatrixXd lexical_map;             // dim x glove_dim

  double tree_strength(int layer) const { return layer == best_layer ? quality : 0.4 * quality; }
  double noise_scale() const { return 0.6 * (1.0 - quality) + 0.05; }

  StateMatrix states(const SentenceParse& parse, int layer, const std::string& split, int glove_dim) const {
    const auto n = static_cast<Eigen::Index>(parse.size());
    Eigen::MatrixXd h(n, dim);
    for (Eigen::Index i = 0; i < n; ++i) {
      h.row(i) = labelled_gaussian(id + "|emb|" + to_lower_ascii(parse.token(int(i) + 1).form), dim).transpose();
    }
    if (layer > 0) {
      const Eigen::MatrixXd z = mds_embedding(tree_distance_matrix(parse), latent);
      h += tree_strength(layer) * z * tree_maps[std::size_t(layer)].transpose();
      std::mt19937_64 rng(seed_from_label(id + "|noise|" + split + "|" + parse.id() + "|" + std::to_string(layer)));
      std::normal_distribution<double> noise(0.0, 1.0);
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd v =
            labelled_gaussian("glove|" + to_lower_ascii(parse.token(int(i) + 1).form), glove_dim);
        h.row(i) += 0.5 * (lexical_map * v).transpose();
        for (Eigen::Index c = 0; c < dim; ++c) h(i, c) += noise_scale() * noise(rng);
      }
    }
    return h.cast<float>();
  }
};

std::string format_float(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string write_smoke_fixture(const std::string& dir_str, const SmokeOptions& o) {
  if (o.models < 2 || o.layers < 1) throw ValidationError("smoke fixture needs >= 2 models and >= 1 layer");
  const fs::path dir(dir_str);
  fs::create_directories(dir);
  std::mt19937_64 rng(o.seed);

  // Treebank splits.
  std::map<std::string, std::vector<SentenceParse>> splits;
  std::uniform_int_distribution<int> len(3, 9);
  std::bernoulli_distribution coin(0.6);
  for (const auto& [name, count] : std::vector<std::pair<std::string, int>>{
           {"train", o.train}, {"dev", o.dev}, {"test", o.test}}) {
    for (int i = 0; i < count; ++i) {
      const int n = len(rng);
      splits[name].push_back(random_sentence(name + "-" + std::to_string(i), n, coin(rng), rng));
    }
    write_text(dir / "treebank" / (name + ".conllu"), write_conllu(splits[name]));
  }

  // BLiMP pairs and the parses of their acceptable sentences.
  std::vector<MinimalPair> pairs;
  std::vector<SentenceParse> blimp_parses;
  for (const auto& uid : fixture_paradigms()) {
    std::string jsonl;
    for (int k = 0; k < o.pairs_per_paradigm; ++k) {
      const auto tp = make_template(uid, k, rng);
      MinimalPair p;
      p.uid = uid;
      p.pair_index = k;
      p.phenomenon = std::string(*phenomenon_of(uid));
      p.sentence_good = sentence_with(tp.good, 0, "");
      p.sentence_bad = sentence_with(tp.good, tp.bad_position, tp.bad_form);
      nlohmann::ordered_json j;
      j["sentence_good"] = p.sentence_good;
      j["sentence_bad"] = p.sentence_bad;
      j["UID"] = uid;
      j["pairID"] = std::to_string(k);
      jsonl += j.dump() + "\n";
      blimp_parses.push_back(to_parse(uid + ":" + std::to_string(k), tp.good));
      pairs.push_back(std::move(p));
    }
    write_text(dir / "blimp" / (uid + ".jsonl"), jsonl);
  }
  write_text(dir / "blimp" / "acceptable.conllu", write_conllu(blimp_parses));
  splits["blimp"] = blimp_parses;

  // Control-variance contexts: each target noun placed into several random
  // sentences.
  std::vector<SentenceParse> contexts;
  const auto& nouns = word_classes()[1].words;
  std::uniform_int_distribution<int> ctx_len(4, 8);
  for (int w = 0; w < o.context_words && w < int(nouns.size()); ++w) {
    for (int k = 0; k < o.contexts_per_word; ++k) {
      auto base = random_sentence("tmp", ctx_len(rng), true, rng);
      auto tokens = base.tokens();
      std::uniform_int_distribution<int> pos(0, int(tokens.size()) - 2);
      auto& t = tokens[std::size_t(pos(rng))];
      t.form = nouns[std::size_t(w)];
      t.xpos = "NN";
      t.upos = "NOUN";
      std::string text = join_forms(tokens);
      SentenceParse p("ctx-" + nouns[std::size_t(w)] + "-" + std::to_string(k), std::move(text), std::move(tokens));
      p.set_metadata({{"target_word", nouns[std::size_t(w)]}});
      contexts.push_back(std::move(p));
    }
  }
  write_text(dir / "contexts" / "contexts.conllu", write_conllu(contexts));
  splits["contexts"] = contexts;

  // GloVe vectors for the whole vocabulary.
  {
    std::set<std::string> lower;
    for (const auto& w : vocabulary()) lower.insert(to_lower_ascii(w));
    std::string glove;
    for (const auto& w : lower) {
      const auto v = labelled_gaussian("glove|" + w, o.glove_dim);
      glove += w;
      for (Eigen::Index c = 0; c < v.size(); ++c) glove += " " + format_float(v(c));
      glove += "\n";
    }
    write_text(dir / "glove" / "glove.txt", glove);
  }

  const std::map<std::string, std::string> parse_paths = {{"train", "treebank/train.conllu"},
                                                          {"dev", "treebank/dev.conllu"},
                                                          {"test", "treebank/test.conllu"},
                                                          {"blimp", "blimp/acceptable.conllu"},
                                                          {"contexts", "contexts/contexts.conllu"}};
  nlohmann::ordered_json model_list = nlohmann::ordered_json::array();
  for (int m = 0; m < o.models; ++m) {
    ToyModel model;
    model.id = "toy-" + std::to_string(m);
    model.quality = 0.25 + 0.75 * double(m) / double(o.models - 1);
    model.best_layer = 1 + (m % o.layers);
    model.dim = o.dim;
    model.latent = std::min<Eigen::Index>(o.dim, 12);
    std::mt19937_64 mrng(seed_from_label(model.id + "|maps"));
    model.tree_maps.resize(std::size_t(o.layers) + 1);
    for (int l = 1; l <= o.layers; ++l) model.tree_maps[std::size_t(l)] = orthonormal_columns(o.dim, model.latent, mrng);
    model.lexical_map = gaussian(o.dim, o.glove_dim, mrng) / std::sqrt(double(o.glove_dim));

    const fs::path mdir = dir / "models" / model.id;
    fs::create_directories(mdir);
    nlohmann::ordered_json manifest;
    manifest["model_id"] = model.id;
    manifest["architecture"] = m % 2 ? "encoder" : "decoder";
    manifest["stack"] = m % 2 ? "encoder" : "decoder";
    manifest["scoring"] = m % 2 ? "pll" : "causal";
    manifest["pooling"] = "mean";
    manifest["num_layers"] = o.layers;
    manifest["dim"] = o.dim;
    manifest["exports"] = nlohmann::ordered_json::array();
    nlohmann::ordered_json checksums = nlohmann::ordered_json::object();
    for (const auto& [split, rel] : parse_paths) {
      nlohmann::ordered_json e;
      e["split"] = split;
      e["parse_file"] = "../../" + rel;
      nlohmann::ordered_json layers = nlohmann::ordered_json::object();
      for (int l = 0; l <= o.layers; ++l) {
        HiddenStateSet set;
        set.model_id = model.id;
        set.parse_file = fs::path(rel).filename().string();
        set.layer = std::uint32_t(l);
        set.dim = std::uint32_t(o.dim);
        for (const auto& p : splits.at(split)) set.sentences.push_back(model.states(p, l, split, o.glove_dim));
        const std::string file = split + ".L" + std::to_string(l) + ".hsb";
        write_hidden_states((mdir / file).string(), set);
        layers[std::to_string(l)] = file;
        checksums[file] = sha256_file((mdir / file).string());
      }
      e["layers"] = layers;
      manifest["exports"].push_back(e);
    }

    std::string scores = "uid,pair_index,logp_acc,logp_unacc\n";
    for (const auto& p : pairs) {
      std::mt19937_64 srng(seed_from_label(model.id + "|score|" + p.uid + "|" + std::to_string(p.pair_index)));
      std::normal_distribution<double> n(0.0, 1.0);
      const double words = double(std::count(p.sentence_good.begin(), p.sentence_good.end(), ' ') + 1);
      const double acc = -(3.0 + 1.5 * words) + 0.5 * n(srng);
      const double margin = -0.3 + 1.6 * model.quality + n(srng);
      scores += p.uid + "," + std::to_string(p.pair_index) + "," + format_float(acc) + "," +
                format_float(acc - margin) + "\n";
    }
    write_text(mdir / "scores.csv", scores);
    checksums["scores.csv"] = sha256_file((mdir / "scores.csv").string());
    manifest["scores_file"] = "scores.csv";
    manifest["checksums"] = checksums;
    write_text(mdir / "manifest.json", manifest.dump(2) + "\n");
    model_list.push_back("models/" + model.id + "/manifest.json");
  }

  nlohmann::ordered_json cfg;
  cfg["output_dir"] = "out";
  cfg["seed"] = 0;
  cfg["treebank"] = {{"train", "treebank/train.conllu"}, {"dev", "treebank/dev.conllu"}, {"test", "treebank/test.conllu"}};
  cfg["models"] = model_list;
  cfg["glove"] = "glove/glove.txt";
  nlohmann::ordered_json blimp_files = nlohmann::ordered_json::array();
  for (const auto& uid : fixture_paradigms()) blimp_files.push_back("blimp/" + uid + ".jsonl");
  cfg["blimp"] = {{"pairs", blimp_files}, {"parses", "blimp/acceptable.conllu"}};
  cfg["contexts"] = "contexts/contexts.conllu";
  cfg["probes"] = {"structural", "headword", "orthogonal", "control"};
  cfg["granularities"] = {"full", "phenomenon", "paradigm"};
  cfg["aggregation"] = "paradigm_mean";
  cfg["training"] = {{"max_epochs", o.max_epochs}, {"patience", 10}, {"lr", 0.005}, {"rank", o.dim}};
  cfg["training_per_family"] = {{"orthogonal", {{"max_epochs", std::max(1, o.max_epochs / 4)}, {"patience", 5}}}};
  const auto cfg_path = dir / "config.json";
  write_text(cfg_path, cfg.dump(2) + "\n");
  return cfg_path.string();
}

}  // namespace synprobe::synthetic
