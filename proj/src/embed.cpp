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

#include "steward/embed.hpp"

#include <algorithm>
#include <bit>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "steward/parallel.hpp"
#include "steward/tokenize.hpp"

namespace steward {

namespace {

float sigmoid(float x) {
  if (x > 20.f) return 1.f;
  if (x < -20.f) return 0.f;
  return 1.f / (1.f + std::exp(-x));
}

// -log(sigmoid(x)) without overflow.
double neg_log_sigmoid(double x) {
  return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

double unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

// ---------------------------------------------------------------------------
// Matrix files

void save_matrix(const EmbeddingMatrix& m, const std::string& stem,
                 const nlohmann::ordered_json& extra) {
  if (static_cast<std::size_t>(m.values.rows()) != m.stay_ids.size()) {
    throw Error("save_matrix: row count does not match stay_ids");
  }
  const auto parent = std::filesystem::path(stem).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);

  std::ofstream bin(stem + ".bin", std::ios::binary);
  if (!bin) throw IoError("cannot write " + stem + ".bin");
  static_assert(std::endian::native == std::endian::little, "float32 files are little-endian");
  const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = m.values;
  bin.write(reinterpret_cast<const char*>(rows.data()),
            static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(rows.size())));
  if (!bin) throw IoError("write failed for " + stem + ".bin");

  nlohmann::ordered_json header;
  header["backend_id"] = m.backend_id;
  header["dimension"] = m.values.cols();
  header["count"] = m.values.rows();
  header["stay_ids"] = m.stay_ids;
  if (!m.truncated.empty()) header["truncated"] = m.truncated;
  for (const auto& [k, v] : extra.items()) header[k] = v;
  std::ofstream js(stem + ".json");
  if (!js) throw IoError("cannot write " + stem + ".json");
  js << header.dump(2) << '\n';
}

nlohmann::json load_matrix_header(const std::string& stem) {
  std::ifstream js(stem + ".json");
  if (!js) throw IoError("cannot open " + stem + ".json");
  return nlohmann::json::parse(js);
}

EmbeddingMatrix load_matrix(const std::string& stem) {
  const auto header = load_matrix_header(stem);
  EmbeddingMatrix m;
  m.backend_id = header.at("backend_id").get<std::string>();
  const auto dim = header.at("dimension").get<Eigen::Index>();
  const auto count = header.at("count").get<Eigen::Index>();
  m.stay_ids = header.at("stay_ids").get<std::vector<std::string>>();
  if (header.contains("truncated")) m.truncated = header.at("truncated").get<std::vector<bool>>();
  if (static_cast<Eigen::Index>(m.stay_ids.size()) != count) {
    throw IoError(stem + ".json: stay_ids length disagrees with count");
  }
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(count, dim);
  std::ifstream bin(stem + ".bin", std::ios::binary);
  if (!bin) throw IoError("cannot open " + stem + ".bin");
  bin.read(reinterpret_cast<char*>(rows.data()),
           static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(rows.size())));
  if (bin.gcount() != static_cast<std::streamsize>(sizeof(float) * rows.size()) ||
      bin.peek() != std::char_traits<char>::eof()) {
    throw IoError(stem + ".bin: size does not match header");
  }
  m.values = rows;
  return m;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary Vocabulary::build(const Corpus& corpus, int min_count) {
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& sentence : corpus) {
    for (const auto& t : sentence) ++counts[t];
  }
  std::vector<std::pair<std::string, std::uint64_t>> entries;
  for (auto& [w, c] : counts) {
    if (c >= static_cast<std::uint64_t>(std::max(min_count, 1))) entries.emplace_back(w, c);
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return from_counts(std::move(entries));
}

Vocabulary Vocabulary::from_counts(std::vector<std::pair<std::string, std::uint64_t>> entries) {
  Vocabulary v;
  for (auto& [w, c] : entries) {
    v.index_.emplace(w, static_cast<int>(v.words_.size()));
    v.words_.push_back(std::move(w));
    v.counts_.push_back(c);
    v.total_ += c;
  }
  return v;
}

std::optional<int> Vocabulary::find(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<Eigen::VectorXf> WordVectors::lookup(const std::string& token) const {
  auto idx = vocab.find(token);
  if (!idx) return std::nullopt;
  return Eigen::VectorXf(input.row(*idx).transpose());
}

// ---------------------------------------------------------------------------
// SGNS

SgnsTrainer::SgnsTrainer(const Corpus& corpus, SgnsConfig config) : config_(config) {
  if (config_.dim < 2) throw ConfigError("embedding dimension must be >= 2");
  if (config_.window < 1 || config_.negatives < 0 || config_.epochs < 1) {
    throw ConfigError("window >= 1, negatives >= 0 and epochs >= 1 are required");
  }
  if (corpus.empty()) throw ConfigError("cannot train on an empty corpus");
  vectors_.vocab = Vocabulary::build(corpus, config_.min_count);
  const int V = vectors_.vocab.size();
  if (V == 0) throw Error("vocabulary is empty after min_count filtering");

  std::mt19937_64 init(mix_seed(config_.seed, 0));
  vectors_.input.resize(V, config_.dim);
  for (Eigen::Index r = 0; r < vectors_.input.rows(); ++r) {
    for (Eigen::Index c = 0; c < vectors_.input.cols(); ++c) {
      vectors_.input(r, c) = static_cast<float>((unit(init) - 0.5) / config_.dim);
    }
  }
  vectors_.output = RowMatrixXf::Zero(V, config_.dim);

  for (const auto& sentence : corpus) {
    std::vector<int> ids;
    ids.reserve(sentence.size());
    for (const auto& t : sentence) {
      if (auto id = vectors_.vocab.find(t)) ids.push_back(*id);
    }
    words_per_epoch_ += ids.size();
    sentences_.push_back(std::move(ids));
  }

  // Frequent-word subsampling as in the reference word2vec implementation.
  const double total = static_cast<double>(vectors_.vocab.total_tokens());
  keep_prob_.resize(static_cast<std::size_t>(V), 1.0);
  if (config_.subsample > 0) {
    const double t = config_.subsample * total;
    for (int w = 0; w < V; ++w) {
      const double f = static_cast<double>(vectors_.vocab.frequency(w));
      keep_prob_[static_cast<std::size_t>(w)] = std::min(1.0, (std::sqrt(f / t) + 1.0) * t / f);
    }
  }

  // Unigram^0.75 noise distribution.
  negative_cdf_.resize(static_cast<std::size_t>(V));
  double acc = 0.0;
  for (int w = 0; w < V; ++w) {
    acc += std::pow(static_cast<double>(vectors_.vocab.frequency(w)), 0.75);
    negative_cdf_[static_cast<std::size_t>(w)] = acc;
  }
  for (auto& c : negative_cdf_) c /= acc;
}

int SgnsTrainer::draw_negative(double u) const {
  const auto it = std::upper_bound(negative_cdf_.begin(), negative_cdf_.end(), u);
  return static_cast<int>(std::min<std::ptrdiff_t>(it - negative_cdf_.begin(),
                                                   static_cast<std::ptrdiff_t>(negative_cdf_.size()) - 1));
}

void SgnsTrainer::train_shard(std::size_t begin, std::size_t end, std::uint64_t seed,
                              double& loss, std::uint64_t& pairs) {
  std::mt19937_64 rng(seed);
  const int dim = config_.dim;
  const double total_words =
      static_cast<double>(words_per_epoch_) * static_cast<double>(config_.epochs) + 1.0;
  Eigen::VectorXf grad(dim);
  std::vector<int> kept;
  float* in = vectors_.input.data();
  float* out = vectors_.output.data();
  auto in_at = [&](int w, int d) -> float& { return in[w * dim + d]; };
  auto out_at = [&](int w, int d) -> float& { return out[w * dim + d]; };

  for (std::size_t s = begin; s < end; ++s) {
    const auto& sentence = sentences_[s];
    const double progress =
        static_cast<double>(words_seen_.fetch_add(sentence.size(), std::memory_order_relaxed)) /
        total_words;
    const float lr = static_cast<float>(config_.learning_rate * std::max(1e-4, 1.0 - progress));

    kept.clear();
    for (int w : sentence) {
      if (unit(rng) < keep_prob_[static_cast<std::size_t>(w)]) kept.push_back(w);
    }
    const int n = static_cast<int>(kept.size());
    for (int pos = 0; pos < n; ++pos) {
      const int center = kept[static_cast<std::size_t>(pos)];
      const int reduce = static_cast<int>(rng() % static_cast<std::uint64_t>(config_.window));
      const int span = config_.window - reduce;
      for (int off = -span; off <= span; ++off) {
        const int cpos = pos + off;
        if (off == 0 || cpos < 0 || cpos >= n) continue;
        const int context = kept[static_cast<std::size_t>(cpos)];
        grad.setZero();
        for (int k = 0; k <= config_.negatives; ++k) {
          int target = center;
          float label = 1.f;
          if (k > 0) {
            target = draw_negative(unit(rng));
            if (target == center) continue;
            label = 0.f;
          }
          float dot = 0.f;
          for (int d = 0; d < dim; ++d) dot += in_at(context, d) * out_at(target, d);
          loss += label > 0 ? neg_log_sigmoid(dot) : neg_log_sigmoid(-dot);
          const float g = (label - sigmoid(dot)) * lr;
          for (int d = 0; d < dim; ++d) {
            grad[d] += g * out_at(target, d);
            out_at(target, d) += g * in_at(context, d);
          }
        }
        for (int d = 0; d < dim; ++d) in_at(context, d) += grad[d];
        ++pairs;
      }
    }
  }
}

void SgnsTrainer::run_epoch() {
  if (epochs_done_ >= config_.epochs) throw Error("all configured epochs already ran");
  const std::uint64_t epoch_seed = mix_seed(config_.seed, 1000 + static_cast<std::uint64_t>(epochs_done_));
  double loss = 0.0;
  std::uint64_t pairs = 0;
  const unsigned threads = std::max(1u, config_.threads);
  if (threads == 1) {
    train_shard(0, sentences_.size(), epoch_seed, loss, pairs);
  } else {
    // Hogwild: shards update the shared matrices without locking.
    std::vector<double> shard_loss(threads, 0.0);
    std::vector<std::uint64_t> shard_pairs(threads, 0);
    const std::size_t per = (sentences_.size() + threads - 1) / threads;
    parallel_for(threads, threads, [&](std::size_t t) {
      const std::size_t b = std::min(sentences_.size(), t * per);
      const std::size_t e = std::min(sentences_.size(), b + per);
      train_shard(b, e, mix_seed(epoch_seed, t), shard_loss[t], shard_pairs[t]);
    });
    for (unsigned t = 0; t < threads; ++t) {
      loss += shard_loss[t];
      pairs += shard_pairs[t];
    }
  }
  last_loss_ = pairs ? loss / static_cast<double>(pairs) : 0.0;
  ++epochs_done_;
}

double SgnsTrainer::batch_loss(std::span<const SgnsExample> batch) const {
  if (batch.empty()) return 0.0;
  double loss = 0.0;
  for (const auto& ex : batch) {
    const auto v = vectors_.input.row(ex.context).cast<double>();
    loss += neg_log_sigmoid(v.dot(vectors_.output.row(ex.center).cast<double>()));
    for (int n : ex.negatives) {
      loss += neg_log_sigmoid(-v.dot(vectors_.output.row(n).cast<double>()));
    }
  }
  return loss / static_cast<double>(batch.size());
}

std::vector<SgnsExample> SgnsTrainer::sample_batch(std::size_t n, std::uint64_t seed) const {
  std::vector<std::pair<int, int>> all;
  for (const auto& s : sentences_) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (int off = 1; off <= config_.window && i + static_cast<std::size_t>(off) < s.size(); ++off) {
        all.emplace_back(s[i + static_cast<std::size_t>(off)], s[i]);
      }
    }
  }
  std::vector<SgnsExample> batch;
  if (all.empty()) return batch;
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& [ctx, center] = all[rng() % all.size()];
    SgnsExample ex{ctx, center, {}};
    for (int j = 0; j < config_.negatives; ++j) ex.negatives.push_back(draw_negative(unit(rng)));
    batch.push_back(std::move(ex));
  }
  return batch;
}

WordVectors train_sgns(const Corpus& corpus, const SgnsConfig& config) {
  SgnsTrainer trainer(corpus, config);
  while (trainer.epochs_done() < config.epochs) trainer.run_epoch();
  return trainer.vectors();
}

// ---------------------------------------------------------------------------
// Document vectors

Eigen::VectorXf embed_note_mean(std::span<const std::string> tokens, const WordVectors& vectors) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(vectors.dim());
  std::size_t hits = 0;
  for (const auto& t : tokens) {
    if (auto idx = vectors.vocab.find(t)) {
      sum += vectors.input.row(*idx).transpose().cast<double>();
      ++hits;
    }
  }
  if (hits == 0) return Eigen::VectorXf::Zero(vectors.dim());
  return (sum / static_cast<double>(hits)).cast<float>();
}

Eigen::VectorXf embed_note_mean(std::string_view text, const WordVectors& vectors) {
  const auto tokens = tokenize(text);
  return embed_note_mean(std::span<const std::string>(tokens), vectors);
}

Eigen::VectorXf embed_hashed_bow(std::string_view text, std::size_t buckets) {
  if (buckets == 0) throw ConfigError("bag-of-words needs at least one bucket");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(buckets));
  for (const auto& t : tokenize(text)) {
    const std::uint64_t h = fnv1a64(t);
    const double sign = (h >> 63) ? -1.0 : 1.0;
    v[static_cast<Eigen::Index>(h % buckets)] += sign;
  }
  const double norm = v.norm();
  if (norm > 0) v /= norm;
  return v.cast<float>();
}

void save_word_vectors(const WordVectors& v, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << v.vocab.size() << ' ' << v.dim() << '\n';
  for (int w = 0; w < v.vocab.size(); ++w) {
    out << v.vocab.word(w) << ' ' << v.vocab.frequency(w);
    for (int d = 0; d < v.dim(); ++d) out << ' ' << format_number(v.input(w, d));
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

WordVectors load_word_vectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  int V = 0, dim = 0;
  in >> V >> dim;
  if (!in || V < 0 || dim < 1) throw IoError(path + ": bad header");
  std::vector<std::pair<std::string, std::uint64_t>> entries;
  RowMatrixXf input(V, dim);
  for (int w = 0; w < V; ++w) {
    std::string word;
    std::uint64_t count = 0;
    in >> word >> count;
    for (int d = 0; d < dim; ++d) in >> input(w, d);
    if (!in) throw IoError(path + ": truncated at word " + std::to_string(w));
    entries.emplace_back(std::move(word), count);
  }
  WordVectors v;
  v.vocab = Vocabulary::from_counts(std::move(entries));
  v.input = std::move(input);
  v.output = RowMatrixXf::Zero(V, dim);
  return v;
}

}  // namespace steward
