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

// Skip-gram training, pooling, hashed bag-of-words, cosine and the
// on-disk matrix format.

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "steward/embed.hpp"
#include "steward/tokenize.hpp"
#include "support.hpp"

using namespace steward;

namespace {

SgnsConfig small_config(int dim = 16) {
  SgnsConfig c;
  c.dim = dim;
  c.window = 3;
  c.min_count = 1;
  c.epochs = 5;
  c.seed = 4;
  c.threads = 1;
  return c;
}

// Sentences drawn from two vocabularies that never co-occur.
Corpus two_topics(int sentences, std::uint64_t seed) {
  const std::vector<std::string> cardiac = {"cardiac", "heart", "chest", "troponin", "ecg", "angina"};
  const std::vector<std::string> renal = {"renal", "kidney", "creatinine", "dialysis", "urine", "nephro"};
  std::mt19937_64 rng(seed);
  Corpus out;
  for (int s = 0; s < sentences; ++s) {
    const auto& words = (s % 2 == 0) ? cardiac : renal;
    std::vector<std::string> sentence;
    for (int i = 0; i < 12; ++i) sentence.push_back(words[rng() % words.size()]);
    out.push_back(sentence);
  }
  return out;
}

double naive_cosine(const std::vector<double>& u, const std::vector<double>& v) {
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

}  // namespace

TEST_CASE("a corpus of one repeated token trains to a finite vector") {
  const Corpus corpus(20, std::vector<std::string>(10, "fever"));
  const auto wv = train_sgns(corpus, small_config());
  REQUIRE(wv.vocab.size() == 1);
  const auto v = wv.lookup("fever");
  REQUIRE(v.has_value());
  CHECK(v->allFinite());
  CHECK(v->size() == 16);
}

TEST_CASE("trainer preconditions") {
  CHECK_THROWS_AS(SgnsTrainer(Corpus{}, small_config()), ConfigError);
  CHECK_THROWS_AS(SgnsTrainer(Corpus{{"a"}}, small_config(1)), ConfigError);
  SgnsConfig strict = small_config();
  strict.min_count = 5;
  CHECK_THROWS_AS(SgnsTrainer(Corpus{{"a", "b"}}, strict), Error);
}

TEST_CASE("disjoint topics embed closer within than across") {
  SgnsConfig c = small_config(32);
  c.epochs = 10;
  c.subsample = 0.0;
  const auto wv = train_sgns(two_topics(400, 1), c);
  const std::vector<std::string> a = {"cardiac", "heart", "chest", "troponin", "ecg", "angina"};
  const std::vector<std::string> b = {"renal", "kidney", "creatinine", "dialysis", "urine", "nephro"};
  auto mean_cos = [&](const auto& x, const auto& y, bool same) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (std::size_t j = same ? i + 1 : 0; j < y.size(); ++j) {
        sum += cosine(*wv.lookup(x[i]), *wv.lookup(y[j])).value;
        ++n;
      }
    }
    return sum / n;
  };
  const double intra = 0.5 * (mean_cos(a, a, true) + mean_cos(b, b, true));
  const double inter = mean_cos(a, b, false);
  INFO("intra " << intra << " inter " << inter);
  CHECK(intra > inter);
}

TEST_CASE("loss on a fixed batch decreases over five epochs") {
  SgnsTrainer trainer(two_topics(200, 2), small_config(32));
  const auto batch = trainer.sample_batch(50, 99);
  REQUIRE(batch.size() == 50);
  std::vector<double> loss = {trainer.batch_loss(batch)};
  for (int e = 0; e < 5; ++e) {
    trainer.run_epoch();
    loss.push_back(trainer.batch_loss(batch));
    CHECK(std::isfinite(trainer.last_epoch_loss()));
  }
  CHECK(trainer.epochs_done() == 5);
  for (std::size_t i = 1; i < loss.size(); ++i) {
    INFO("epoch " << i << ": " << loss[i - 1] << " -> " << loss[i]);
    CHECK(loss[i] < loss[i - 1]);
  }
}

TEST_CASE("single-threaded training is bitwise deterministic") {
  const auto corpus = two_topics(100, 3);
  const auto a = train_sgns(corpus, small_config());
  const auto b = train_sgns(corpus, small_config());
  CHECK(a.input == b.input);
  CHECK(a.output == b.output);
  SgnsConfig other = small_config();
  other.seed = 5;
  CHECK(train_sgns(corpus, other).input != a.input);
}

TEST_CASE("vocabulary orders by frequency then lexicographically") {
  const auto v = Vocabulary::build({{"b", "a", "c", "a"}, {"c", "b", "d"}}, 2);
  REQUIRE(v.size() == 3);
  CHECK(v.word(0) == "a");
  CHECK(v.word(1) == "b");
  CHECK(v.word(2) == "c");
  CHECK_FALSE(v.find("d").has_value());
  CHECK(v.total_tokens() == 6);
}

TEST_CASE("mean pooling") {
  const auto wv = train_sgns(two_topics(50, 4), small_config());
  const auto heart = *wv.lookup("heart");
  const auto kidney = *wv.lookup("kidney");

  CHECK(embed_note_mean("heart", wv) == heart);
  CHECK(embed_note_mean("zzz qqq", wv) == Eigen::VectorXf::Zero(wv.dim()));
  CHECK(embed_note_mean("", wv) == Eigen::VectorXf::Zero(wv.dim()));

  const Eigen::VectorXf mid = embed_note_mean("heart kidney", wv);
  for (Eigen::Index i = 0; i < mid.size(); ++i) {
    CHECK(mid[i] == doctest::Approx(0.5 * (heart[i] + kidney[i])).epsilon(1e-6));
  }
  // Out-of-vocabulary tokens do not dilute the mean.
  CHECK((embed_note_mean("heart unknownword", wv) - heart).norm() < 1e-6f);

  // Linearity over an arbitrary token list, multiplicity counted.
  const std::vector<std::string> toks = {"heart", "heart", "renal", "ecg"};
  Eigen::VectorXf want = Eigen::VectorXf::Zero(wv.dim());
  for (const auto& t : toks) want += *wv.lookup(t);
  want /= 4.0f;
  CHECK((embed_note_mean(std::span<const std::string>(toks), wv) - want).norm() < 1e-6f);
}

TEST_CASE("cosine edge values and agreement with a naive loop") {
  Eigen::VectorXd x(3);
  x << 1.0, 2.0, -3.0;
  CHECK(cosine(x, x).value == doctest::Approx(1.0).epsilon(1e-15));
  Eigen::Vector2d e1(1.0, 0.0), e2(0.0, 1.0);
  CHECK(cosine(e1, e2).value == 0.0);
  const auto zero = cosine(Eigen::Vector2d::Zero(), e1);
  CHECK(zero.degenerate);
  CHECK(zero.value == 0.0);

  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  for (int t = 0; t < 500; ++t) {
    const int n = 1 + static_cast<int>(rng() % 64);
    std::vector<double> u(n), v(n);
    Eigen::VectorXd eu(n), ev(n);
    for (int i = 0; i < n; ++i) eu[i] = u[i] = g(rng), ev[i] = v[i] = g(rng);
    const double got = cosine(eu, ev).value;
    CHECK(std::abs(got - naive_cosine(u, v)) <= 1e-12);
    CHECK(got >= -1.0);
    CHECK(got <= 1.0);
  }
}

TEST_CASE("hashed bag-of-words is unit length and order-insensitive") {
  const auto a = embed_hashed_bow("fever cough fever chills", 256);
  CHECK(a.size() == 256);
  CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(embed_hashed_bow("chills fever, cough FEVER", 256) == a);
  CHECK(embed_hashed_bow("", 256) == Eigen::VectorXf::Zero(256));
  CHECK(embed_hashed_bow("...", 256).norm() == 0.0f);
  CHECK(embed_hashed_bow("fever", 256) != embed_hashed_bow("cough", 256));
}

TEST_CASE("embedding matrices round-trip through the binary format") {
  steward::testing::TempDir dir;
  EmbeddingMatrix m;
  m.backend_id = "unit";
  m.values.resize(3, 4);
  m.values << 1, 2, 3, 4, -0.5f, 0, 1e-7f, 3.25f, 9, 8, 7, 6;
  m.stay_ids = {"a", "b", "c"};
  m.truncated = {false, true, false};
  save_matrix(m, dir / "emb", {{"note", "hello"}});
  const auto back = load_matrix(dir / "emb");
  CHECK(back.values == m.values);
  CHECK(back.stay_ids == m.stay_ids);
  CHECK(back.backend_id == "unit");
  const auto header = load_matrix_header(dir / "emb");
  CHECK(header.at("dimension") == 4);
  CHECK(header.at("count") == 3);
  CHECK(header.at("note") == "hello");
  // 12 float32 values, little-endian, row-major.
  const auto raw = steward::testing::slurp(dir.path() / "emb.bin");
  REQUIRE(raw.size() == 48);
  float second = 0.0f;
  std::memcpy(&second, raw.data() + 4, 4);
  CHECK(second == 2.0f);

  steward::testing::spit(dir.path() / "emb.bin", raw.substr(0, 20));
  CHECK_THROWS_AS(load_matrix(dir / "emb"), IoError);
  CHECK_THROWS_AS(load_matrix(dir / "missing"), IoError);
}

TEST_CASE("word vectors round-trip through the text format") {
  steward::testing::TempDir dir;
  const auto wv = train_sgns(two_topics(40, 8), small_config(8));
  save_word_vectors(wv, dir / "vectors.txt");
  const auto back = load_word_vectors(dir / "vectors.txt");
  REQUIRE(back.vocab.size() == wv.vocab.size());
  for (int i = 0; i < wv.vocab.size(); ++i) {
    CHECK(back.vocab.word(i) == wv.vocab.word(i));
    CHECK(back.input.row(i) == wv.input.row(i));
  }
}
