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

#include "steward/remote.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <thread>

#include <httplib.h>

#include "steward/parallel.hpp"

namespace steward {

nlohmann::json to_json(const EmbedRequest& r) {
  return nlohmann::json{{"model_id", r.model_id}, {"texts", r.texts}};
}

EmbedResponse parse_embed_response(const nlohmann::json& j, std::size_t expected_count) {
  auto need = [&](const char* key) -> const nlohmann::json& {
    if (!j.is_object() || !j.contains(key)) {
      throw ProtocolError(std::string("embed response lacks '") + key + "'");
    }
    return j.at(key);
  };
  EmbedResponse r;
  try {
    r.model_id = need("model_id").get<std::string>();
    r.dimension = need("dimension").get<std::size_t>();
    const auto& vectors = need("vectors");
    const auto& truncated = need("truncated");
    if (!vectors.is_array() || !truncated.is_array()) {
      throw ProtocolError("embed response vectors/truncated must be arrays");
    }
    if (vectors.size() != expected_count || truncated.size() != expected_count) {
      throw ProtocolError("embed response has " + std::to_string(vectors.size()) + " vectors and " +
                          std::to_string(truncated.size()) + " flags for " +
                          std::to_string(expected_count) + " texts");
    }
    if (r.dimension == 0) throw ProtocolError("embed response dimension must be positive");
    for (const auto& v : vectors) {
      auto row = v.get<std::vector<float>>();
      if (row.size() != r.dimension) {
        throw ProtocolError("embed response vector of length " + std::to_string(row.size()) +
                            ", dimension is " + std::to_string(r.dimension));
      }
      if (!std::all_of(row.begin(), row.end(), [](float x) { return std::isfinite(x); })) {
        throw ProtocolError("embed response vector has non-finite values");
      }
      r.vectors.push_back(std::move(row));
    }
    r.truncated = truncated.get<std::vector<bool>>();
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed embed response: ") + e.what());
  }
  return r;
}

namespace {

EmbedResponse post_batch(const RemoteOptions& options, const EmbedRequest& request) {
  httplib::Client client(options.endpoint);
  client.set_connection_timeout(options.timeout);
  client.set_read_timeout(options.timeout);
  client.set_write_timeout(options.timeout);
  const std::string body = to_json(request).dump();

  auto backoff = options.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= std::max(1, options.max_attempts); ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(backoff);
      backoff = std::min(options.max_backoff,
                         std::chrono::milliseconds(static_cast<long long>(
                             static_cast<double>(backoff.count()) * options.backoff_multiplier)));
    }
    auto res = client.Post("/v1/embed", body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "server error " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      std::string detail = res->body;
      try {
        detail = nlohmann::json::parse(res->body).value("error", res->body);
      } catch (const nlohmann::json::exception&) {
      }
      throw ProtocolError("embed request rejected with HTTP " + std::to_string(res->status) +
                          ": " + detail);
    }
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError(std::string("embed response is not JSON: ") + e.what());
    }
    return parse_embed_response(parsed, request.texts.size());
  }
  throw IoError("embed request to " + options.endpoint + " failed after " +
                std::to_string(options.max_attempts) + " attempts (" + last_error + ")");
}

}  // namespace

EmbeddingMatrix embed_remote(std::span<const PseudoNote> notes, const RemoteOptions& options) {
  if (options.batch_size == 0) throw ConfigError("batch_size must be positive");
  EmbeddingMatrix m;
  m.backend_id = "remote:" + options.model_id;
  for (const auto& n : notes) m.stay_ids.push_back(n.stay_id);
  if (notes.empty()) return m;

  const std::size_t n_batches = (notes.size() + options.batch_size - 1) / options.batch_size;
  std::vector<std::optional<EmbedResponse>> responses(n_batches);
  const unsigned workers = std::min(std::max(1u, options.max_concurrency), thread_cap());
  parallel_for(n_batches, workers, [&](std::size_t b) {
    EmbedRequest req{options.model_id, {}};
    const std::size_t begin = b * options.batch_size;
    const std::size_t end = std::min(notes.size(), begin + options.batch_size);
    for (std::size_t i = begin; i < end; ++i) req.texts.push_back(notes[i].text);
    responses[b] = post_batch(options, req);
  });

  const std::size_t dim = responses.front()->dimension;
  m.values.resize(static_cast<Eigen::Index>(notes.size()), static_cast<Eigen::Index>(dim));
  std::size_t row = 0;
  for (const auto& r : responses) {
    if (r->dimension != dim) {
      throw ProtocolError("embedding dimension changed across batches (" + std::to_string(dim) +
                          " vs " + std::to_string(r->dimension) + ")");
    }
    for (std::size_t i = 0; i < r->vectors.size(); ++i, ++row) {
      for (std::size_t d = 0; d < dim; ++d) {
        m.values(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(d)) = r->vectors[i][d];
      }
      m.truncated.push_back(r->truncated[i]);
    }
  }
  return m;
}

}  // namespace steward
