/*
 * Copyright 2026 The Steward Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "steward/common.hpp"

namespace steward {

// ---------------------------------------------------------------------------
// Dense per-note matrices and their on-disk form.

struct EmbeddingMatrix {
  std::string backend_id;
  Eigen::MatrixXf values;            // one row per note, in note order
  std::vector<std::string> stay_ids; // row labels
  std::vector<bool> truncated;       // per-row flags reported by the backend; may be empty

  Eigen::Index dimension() const { return values.cols(); }
  Eigen::Index count() const { return values.rows(); }
};

// Writes <stem>.bin (little-endian float32, row-major) and <stem>.json
// ({backend_id, dimension, count, stay_ids, ...extra}). `extra` keys are
// merged into the header.
void save_matrix(const EmbeddingMatrix& m, const std::string& stem,
                 const nlohmann::ordered_json& extra = nlohmann::ordered_json::object());
EmbeddingMatrix load_matrix(const std::string& stem);
nlohmann::json load_matrix_header(const std::string& stem);

// ---------------------------------------------------------------------------
// Similarity.

struct Cosine {
  double value = 0.0;
  bool degenerate = false;  // an input had zero norm; value is then 0
};

template <typename DerivedA, typename DerivedB>
Cosine cosine(const Eigen::MatrixBase<DerivedA>& u, const Eigen::MatrixBase<DerivedB>& v) {
  const double nu = u.template cast<double>().norm();
  const double nv = v.template cast<double>().norm();
  if (nu == 0.0 || nv == 0.0) return {0.0, true};
  const double c = u.template cast<double>().dot(v.template cast<double>()) / (nu * nv);
  return {std::clamp(c, -1.0, 1.0), false};
}

// ---------------------------------------------------------------------------
// Skip-gram with negative sampling.

struct SgnsConfig {
  int dim = 100;
  int window = 5;
  int negatives = 5;
  int min_count = 2;
  double subsample = 1e-3;
  int epochs = 5;
  double learning_rate = 0.025;  // decays linearly to 1e-4 of itself
  std::uint64_t seed = 1;
  // 1 = strict deterministic. >1 = lock-free parallel updates across corpus
  // shards, fast but not reproducible bit-for-bit.
  unsigned threads = 1;
};

using Corpus = std::vector<std::vector<std::string>>;

class Vocabulary {
 public:
  // Tokens with frequency >= min_count, indexed by descending frequency and
  // then lexicographically.
  static Vocabulary build(const Corpus& corpus, int min_count);
  // Keeps the given order; used when reloading saved vectors.
  static Vocabulary from_counts(std::vector<std::pair<std::string, std::uint64_t>> entries);

  std::optional<int> find(const std::string& token) const;
  const std::string& word(int index) const { return words_[static_cast<std::size_t>(index)]; }
  std::uint64_t frequency(int index) const { return counts_[static_cast<std::size_t>(index)]; }
  int size() const { return static_cast<int>(words_.size()); }
  std::uint64_t total_tokens() const { return total_; }  // in-vocabulary tokens

 private:
  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, int> index_;
  std::uint64_t total_ = 0;
};

using RowMatrixXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct WordVectors {
  Vocabulary vocab;
  RowMatrixXf input;   // V x dim; these are the word embeddings
  RowMatrixXf output;  // V x dim; negative-sampling output weights

  std::optional<Eigen::VectorXf> lookup(const std::string& token) const;
  int dim() const { return static_cast<int>(input.cols()); }
};

// A (context, center) training pair with its fixed negative samples, for
// evaluating the objective on a frozen batch.
struct SgnsExample {
  int context = 0;
  int center = 0;
  std::vector<int> negatives;
};

// Epoch-at-a-time trainer so callers can inspect the objective between
// epochs. The learning-rate schedule spans config.epochs.
class SgnsTrainer {
 public:
  // Throws ConfigError if dim < 2 or the corpus is empty, and Error if no
  // token survives min_count.
  SgnsTrainer(const Corpus& corpus, SgnsConfig config);

  void run_epoch();
  int epochs_done() const { return epochs_done_; }
  // Mean per-pair negative log-likelihood accumulated during the last epoch.
  double last_epoch_loss() const { return last_loss_; }

  // -[log s(u_center . v_context) + sum_n log s(-u_n . v_context)] averaged
  // over the batch.
  double batch_loss(std::span<const SgnsExample> batch) const;
  // Draws `n` pairs with negatives from the corpus; deterministic per seed.
  std::vector<SgnsExample> sample_batch(std::size_t n, std::uint64_t seed) const;

  const WordVectors& vectors() const { return vectors_; }

 private:
  void train_shard(std::size_t begin, std::size_t end, std::uint64_t seed, double& loss,
                   std::uint64_t& pairs);
  int draw_negative(double u) const;

  SgnsConfig config_;
  WordVectors vectors_;
  std::vector<std::vector<int>> sentences_;
  std::vector<double> keep_prob_;
  std::vector<double> negative_cdf_;
  std::uint64_t words_per_epoch_ = 0;
  std::atomic<std::uint64_t> words_seen_{0};
  int epochs_done_ = 0;
  double last_loss_ = 0.0;
};

WordVectors train_sgns(const Corpus& corpus, const SgnsConfig& config = {});

// Unweighted mean of in-vocabulary token vectors; zero vector when no token
// is in the vocabulary.
Eigen::VectorXf embed_note_mean(std::span<const std::string> tokens, const WordVectors& vectors);
Eigen::VectorXf embed_note_mean(std::string_view text, const WordVectors& vectors);

// Signed feature hashing of token counts into `buckets` dimensions, then L2
// normalisation (zero vector for token-free text).
Eigen::VectorXf embed_hashed_bow(std::string_view text, std::size_t buckets = 1u << 18);

void save_word_vectors(const WordVectors& v, const std::string& path);
WordVectors load_word_vectors(const std::string& path);

}  // namespace steward
