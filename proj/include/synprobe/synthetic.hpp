#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "synprobe/tensors.hpp"
#include "synprobe/treebank.hpp"

namespace synprobe::synthetic {

// Gold tree distances as a dense N x N double matrix.
Eigen::MatrixXd tree_distance_matrix(const SentenceParse& parse);

// Classical MDS that reads `sq_dist` as squared Euclidean distances.
// Returns N x max_dim coordinates, unused columns zero. Throws NumericError
// if the points do not reproduce sq_dist within `tol` or need more than
// max_dim dimensions.
Eigen::MatrixXd mds_embedding(const Eigen::MatrixXd& sq_dist, Eigen::Index max_dim, double tol = 1e-8);

// Random dependency tree over `length` tokens (a trailing "." when
// with_punct), drawn from a small English-like vocabulary.
SentenceParse random_sentence(const std::string& id, int length, bool with_punct, std::mt19937_64& rng);

// Every word the random and template generators can emit.
std::vector<std::string> vocabulary();

struct PlantedOptions {
  int train = 500;
  int dev = 100;
  int test = 100;
  int min_length = 2;
  int max_length = 10;
  int dim = 32;
  int latent = 16;
  double noise = 0.01;
  double scale_lo = 0.2;
  double scale_hi = 5.0;
  std::uint64_t seed = 0;
};

struct PlantedSplit {
  std::vector<SentenceParse> parses;
  HiddenStateSet states;
};

// h_i = W z_i + noise * eps with z the MDS embedding of the gold tree metric
// and W = Q diag(s) mixing it into `dim` coordinates.
struct PlantedCorpus {
  PlantedSplit train, dev, test;
  Eigen::MatrixXd mixing;  // dim x latent
};

PlantedCorpus build_planted_corpus(const PlantedOptions& options);

struct SmokeOptions {
  int models = 4;
  int layers = 2;
  int dim = 16;
  int glove_dim = 8;
  int train = 60;
  int dev = 20;
  int test = 20;
  int pairs_per_paradigm = 8;
  int context_words = 4;
  int contexts_per_word = 4;
  int max_epochs = 40;
  std::uint64_t seed = 7;
};

// Writes a self-contained fixture (treebank splits, per-model manifests and
// HSB1 layers, GloVe, BLiMP pairs and parses, score files, control-variance
// contexts) under `dir` and returns the path of its pipeline config.
std::string write_smoke_fixture(const std::string& dir, const SmokeOptions& options);

}  // namespace synprobe::synthetic
