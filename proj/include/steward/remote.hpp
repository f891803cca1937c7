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

#include <chrono>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "steward/embed.hpp"
#include "steward/notes.hpp"

namespace steward {

// Wire messages of the embedding service (POST /v1/embed).
struct EmbedRequest {
  std::string model_id;
  std::vector<std::string> texts;
};

struct EmbedResponse {
  std::string model_id;
  std::size_t dimension = 0;
  std::vector<std::vector<float>> vectors;
  std::vector<bool> truncated;
};

nlohmann::json to_json(const EmbedRequest& r);
// Throws ProtocolError when a field is missing or mistyped, vectors or
// truncated flags do not match `expected_count`, a vector has the wrong
// length, or a value is not finite.
EmbedResponse parse_embed_response(const nlohmann::json& j, std::size_t expected_count);

struct RemoteOptions {
  std::string endpoint = "http://127.0.0.1:8080";  // scheme://host:port
  std::string model_id;
  std::size_t batch_size = 128;
  unsigned max_concurrency = 2;  // further capped by STEWARD_THREADS
  int max_attempts = 5;          // per batch, including the first
  std::chrono::milliseconds initial_backoff{100};
  double backoff_multiplier = 2.0;
  std::chrono::milliseconds max_backoff{5000};
  std::chrono::seconds timeout{120};
};

// Embeds notes in batches, reassembling rows by input position. Transport
// failures and 5xx responses are retried with exponential backoff; after
// max_attempts an IoError is raised. 4xx responses and malformed or
// dimension-inconsistent replies raise ProtocolError immediately.
EmbeddingMatrix embed_remote(std::span<const PseudoNote> notes, const RemoteOptions& options);

}  // namespace steward
