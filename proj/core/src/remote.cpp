#include "persona/gateway.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <semaphore>
#include <thread>

// httplib pulls in system headers whose macros collide with Eigen internals;
// it must come after anything that includes Eigen.
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "persona/errors.hpp"
#include "persona/tokenize.hpp"

namespace persona {

namespace {

// Bounded in-flight requests across all handles sharing this process.
std::counting_semaphore<256>& inflight_gate(int limit) {
  static std::counting_semaphore<256> gate(limit > 0 && limit <= 256 ? limit : 8);
  return gate;
}

struct ParsedEndpoint {
  std::string host_port;  // scheme://host:port
  std::string base_path;  // leading path, no trailing slash
};

ParsedEndpoint split_endpoint(const std::string& endpoint) {
  ParsedEndpoint out;
  auto scheme_end = endpoint.find("://");
  size_t path_start = endpoint.find('/', scheme_end == std::string::npos
                                             ? 0
                                             : scheme_end + 3);
  if (path_start == std::string::npos) {
    out.host_port = endpoint;
  } else {
    out.host_port = endpoint.substr(0, path_start);
    out.base_path = endpoint.substr(path_start);
    while (!out.base_path.empty() && out.base_path.back() == '/') {
      out.base_path.pop_back();
    }
  }
  return out;
}

std::string resolve_endpoint(const RemoteConfig& cfg) {
  if (!cfg.endpoint.empty()) return cfg.endpoint;
  const char* env = std::getenv(kEndpointEnvVar);
  if (env && *env) return env;
  throw ConfigError(std::string("no remote endpoint configured; set ") +
                    kEndpointEnvVar + " or pass --endpoint");
}

nlohmann::json post_with_retries(const RemoteConfig& cfg, const std::string& route,
                                 const nlohmann::json& body) {
  ParsedEndpoint endpoint = split_endpoint(resolve_endpoint(cfg));
  std::string path = endpoint.base_path + route;

  auto& gate = inflight_gate(cfg.max_inflight);
  gate.acquire();
  struct Release {
    std::counting_semaphore<256>& g;
    ~Release() { g.release(); }
  } release{gate};

  std::string last_error;
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    if (attempt > 0) {
      double delay = cfg.backoff_base_seconds * std::pow(2.0, attempt - 1);
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    httplib::Client client(endpoint.host_port);
    client.set_connection_timeout(std::chrono::duration<double>(cfg.timeout_seconds));
    client.set_read_timeout(std::chrono::duration<double>(cfg.timeout_seconds));

    auto response = client.Post(path, body.dump(), "application/json");
    if (!response) {
      last_error = "transport error: " + httplib::to_string(response.error());
      continue;
    }
    if (response->status >= 500) {
      last_error = "server returned " + std::to_string(response->status);
      continue;
    }
    if (response->status != 200) {
      throw BackendError("remote endpoint rejected request with status " +
                         std::to_string(response->status));
    }
    try {
      return nlohmann::json::parse(response->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw BackendError(std::string("remote endpoint returned invalid JSON: ") +
                         e.what());
    }
  }
  throw BackendError("remote endpoint unavailable after " +
                     std::to_string(cfg.max_attempts) + " attempts (" +
                     last_error + ")");
}

}  // namespace

GenerationResult remote_generate(const RemoteConfig& cfg, std::string_view prompt,
                                 const DecodeConfig& decode) {
  nlohmann::json body = {
      {"model", cfg.model_name},
      {"prompt", std::string(prompt)},
      {"max_tokens", decode.max_output_tokens},
      {"beam", decode.beam_width},
  };
  nlohmann::json reply = post_with_retries(cfg, "/generate", body);
  if (!reply.contains("text") || !reply["text"].is_string()) {
    throw BackendError("remote reply is missing the \"text\" field");
  }
  GenerationResult result;
  result.text = reply["text"].get<std::string>();
  result.token_count = static_cast<int>(count_whitespace_tokens(result.text));
  result.backend = "remote";
  return result;
}

std::vector<double> remote_embed(const RemoteConfig& cfg, std::string_view text) {
  nlohmann::json body = {
      {"model", cfg.model_name},
      {"text", std::string(text)},
  };
  nlohmann::json reply = post_with_retries(cfg, "/embed", body);
  if (!reply.contains("embedding") || !reply["embedding"].is_array()) {
    throw BackendError("remote reply is missing the \"embedding\" array");
  }
  return reply["embedding"].get<std::vector<double>>();
}

}  // namespace persona
