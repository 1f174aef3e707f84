#pragma once

// Fixtures and independent oracles shared by the unit tests and the
// acceptance binary. Nothing here calls into the code it is used to check.

#include <Eigen/Core>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "synprobe/outcomes.hpp"
#include "synprobe/probes.hpp"
#include "synprobe/treebank.hpp"

namespace synprobe::testing {

struct Row {
  std::string form;
  std::string xpos;
  int head;
  std::string deprel;
  std::string upos = "X";
};

SentenceParse make_parse(const std::string& id, const std::vector<Row>& rows);

// Hand-built parse trees for the acceptable sentences.
SentenceParse relational_noun_parse();  // The prints of every vase aggravate Nina .
SentenceParse wh_gap_parse();           // Marcus had remembered who some lady disliked .
SentenceParse auxiliary_parse();        // The plays about art have alarmed Mitchell .
MinimalPair relational_noun_pair();
MinimalPair wh_gap_pair();
MinimalPair auxiliary_pair();

// 7-word toy sentence with 6 gold edges and a predicted tree sharing 4.
SentenceParse toy_parse();
std::vector<UndirectedEdge> toy_predicted_tree();

// Uniform random labelled tree on n nodes via a random Prüfer sequence,
// returned as a parse rooted at a random token.
SentenceParse random_tree(const std::string& id, int n, std::mt19937_64& rng);

// All-pairs shortest paths over the undirected gold tree, by relaxation.
Eigen::MatrixXi floyd_warshall(const SentenceParse& parse);

// Minimum total weight over every labelled spanning tree of the complete
// graph on the given vertices (Prüfer enumeration, n^(n-2) trees).
double brute_force_mst_weight(const Eigen::MatrixXd& w, const std::vector<int>& vertices);

double tree_weight(const Eigen::MatrixXd& w, const std::vector<UndirectedEdge>& edges);

// Step-down Holm by its definition: p_(i) * (m - i + 1), running max, cap 1.
std::vector<double> holm_reference(const std::vector<double>& p);

// Central finite-difference check of every parameter entry. Returns the
// worst relative error max|a - n| / max(1, |a|, |n|) over all entries.
double max_gradient_error(ProbeParams params, const std::function<LossGrad(const ProbeParams&)>& f,
                          double step = 1e-6);

// Random example with tree targets, heads and control pairs.
ProbeExample random_example(int n, int d, std::mt19937_64& rng);
ProbeParams random_params(ProbeFamily family, int d, int k, std::mt19937_64& rng);

class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

void write_text(const std::string& path, const std::string& content);

// Byte-level comparison of two directory trees; returns the first
// difference found, or an empty string.
std::string diff_trees(const std::filesystem::path& a, const std::filesystem::path& b);

}  // namespace synprobe::testing
