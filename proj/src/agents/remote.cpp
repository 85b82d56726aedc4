#include <cmath>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "twinloop/agents.hpp"
#include "twinloop/error.hpp"

namespace twinloop {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // path prefix without trailing slash
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw BackendError(BackendErrorKind::Protocol, fmt::format("base URL '{}' lacks a scheme", url));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = url.substr(0, path_start);
  e.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!e.path.empty() && e.path.back() == '/') e.path.pop_back();
  return e;
}

}  // namespace

RemoteBackend::RemoteBackend(RemoteBackendConfig config, const PlantTopology& topology)
    : config_(std::move(config)), topology_(topology) {}

std::string RemoteBackend::request_body(const PromptBundle& prompt, bool refinement) const {
  nlohmann::json body;
  body["model"] = refinement ? config_.strategy_model : config_.model;
  body["messages"] = nlohmann::json::array({
      {{"role", "system"}, {"content", prompt.agent.role + "\n" + prompt.agent.goal}},
      {{"role", "user"}, {"content", prompt.rendered_text}},
  });
  body["temperature"] = 0;
  return body.dump();
}

ActionProposal RemoteBackend::respond(const PromptBundle& prompt, const DecisionInput& /*input*/,
                                      bool refinement) {
  const Endpoint endpoint = split_url(config_.base_url);
  httplib::Client client(endpoint.origin);
  const double whole = std::floor(config_.timeout_s);
  const auto secs = static_cast<time_t>(whole);
  const auto usecs = static_cast<time_t>((config_.timeout_s - whole) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (!config_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  }
  auto res = client.Post(endpoint.path + "/chat/completions", headers,
                         request_body(prompt, refinement), "application/json");
  if (!res) {
    const auto err = res.error();
    const auto kind = (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
                          ? BackendErrorKind::Timeout
                          : BackendErrorKind::Protocol;
    throw BackendError(kind, fmt::format("request failed: {}", httplib::to_string(err)));
  }
  if (res->status != 200) {
    throw BackendError(BackendErrorKind::Protocol, fmt::format("HTTP status {}", res->status));
  }

  std::string content;
  ActionProposal p;
  try {
    const auto json = nlohmann::json::parse(res->body);
    content = json.at("choices").at(0).at("message").at("content").get<std::string>();
    p.prompt_tokens = prompt.token_estimate;
    p.completion_tokens = estimate_tokens(content);
    if (auto usage = json.find("usage"); usage != json.end() && usage->is_object()) {
      if (usage->contains("prompt_tokens")) p.prompt_tokens = usage->at("prompt_tokens").get<std::size_t>();
      if (usage->contains("completion_tokens")) {
        p.completion_tokens = usage->at("completion_tokens").get<std::size_t>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(BackendErrorKind::Protocol, fmt::format("bad response body: {}", e.what()));
  }
  p.actions = canonicalize(parse_actions(content, &p.rationale), topology_);
  p.backend_id = id();
  return p;
}

}  // namespace twinloop
