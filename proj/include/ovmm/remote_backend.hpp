#pragma once

#include <cstdlib>
#include <mutex>
#include <type_traits>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <httplib.h>

#include "ovmm/backend.hpp"
#include "ovmm/errors.hpp"

namespace ovmm {

// Chat-completion prompts for each capability. The parse / propose /
// prioritize prompts are normative; the approver prompt is best-effort.
namespace prompts {

inline constexpr const char* kProposeSystem =
    "The user will give you a list of objects inside a region and a list of region candidates in "
    "JSON format {\"objects\": [object_1, object_2, ...], \"region_candidates\": "
    "[region_candidate_1, region_candidate_2, ...]}, please order these regions in decreasing "
    "order of likelihood and return just in JSON format {\"region_proposals\": [region_1, "
    "region_2, ...]}, do not reply markdown format.";

inline constexpr const char* kParseSystem =
    "The user will give you an instruction in natural language about something (\"target "
    "object\") he/she wants to find, and the user may or may not give further guess about what "
    "region the target object may be located. Please turn the instruction into JSON format "
    "{\"target_object\": target_object, \"region\": region}, where region shall be set as null "
    "if the user does not give further guess about region, do not reply markdown format.";

inline constexpr const char* kPrioritizeSystem =
    "The user will give you a list of region names in JSON format {\"regions\": [region_1, "
    "region_2, ...], \"target_object\": object_name}, and the name of a target object he/she "
    "wants to find, please proposal a list containing the names of these regions in descending "
    "order of priority to search, and return in JSON format {\"ordered_regions\": "
    "[ordered_region_1, ordered_region_2, ...]}, do not reply markdown format.";

inline constexpr const char* kApproveSystem =
    "The user will describe a detection proposal. Reply just in JSON format {\"accepted\": "
    "true|false, \"confidence\": number} stating whether the claimed label matches the "
    "evidence, do not reply markdown format.";

}  // namespace prompts

struct RemoteBackendConfig {
  std::string base_url = "http://127.0.0.1:8080";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-4o";
  std::string api_key_env = "OVMM_API_KEY";
  int timeout_seconds = 30;
  int retries = 1;               // extra attempts after the first failure
  int max_in_flight = 4;
  double temperature = 0.0;
};

// OpenAI-style chat-completions client implementing every backend
// capability. All failures surface as BackendError after the configured
// retries; approval failures degrade to a reject instead.
class RemoteBackend : public InstructionParser, public RegionProposer, public RegionPrioritizer,
                      public DetectionApprover {
public:
  explicit RemoteBackend(RemoteBackendConfig config)
      : config_(std::move(config)),
        gate_(std::max(1, config_.max_in_flight)) {
    if (config_.base_url.empty()) throw InputError("remote backend: empty base URL");
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
  }

  ParsedInstruction parse_instruction(const std::string& text) override {
    if (text.empty()) throw InputError("parse_instruction: empty instruction");
    return retried([&] {
      return decode_parse_response(parse_backend_json(complete_once(prompts::kParseSystem, text)));
    });
  }

  std::vector<std::string> propose_regions(const std::vector<std::string>& objects,
                                           const std::vector<std::string>& candidates) override {
    if (objects.empty() || candidates.empty()) {
      throw InputError("propose_regions: empty objects or candidates");
    }
    const std::string user = encode_propose_request(objects, candidates);
    return retried([&] {
      const json body = parse_backend_json(complete_once(prompts::kProposeSystem, user));
      return decode_region_list(body, "region_proposals", candidates);
    });
  }

  std::vector<std::string> prioritize_regions(const std::vector<std::string>& regions,
                                              const std::string& target) override {
    if (regions.empty()) throw InputError("prioritize_regions: empty region list");
    const std::string user = encode_prioritize_request(regions, target);
    return retried([&] {
      const json body = parse_backend_json(complete_once(prompts::kPrioritizeSystem, user));
      return decode_region_list(body, "ordered_regions", regions);
    });
  }

  ApprovalVerdict approve_detection(const std::string& evidence,
                                    const std::string& claimed_label) override {
    ApprovalVerdict verdict;  // remote failure -> conservative reject
    try {
      json user;
      user["evidence"] = evidence;
      user["claimed_label"] = claimed_label;
      const json body = retried(
          [&] { return parse_backend_json(complete_once(prompts::kApproveSystem, user.dump())); });
      if (body.contains("accepted") && body["accepted"].is_boolean()) {
        verdict.accepted = body["accepted"].get<bool>();
      }
      if (body.contains("confidence") && body["confidence"].is_number()) {
        verdict.confidence = body["confidence"].get<double>();
      }
    } catch (const BackendError&) {
      verdict = {};
    }
    return verdict;
  }

  const RemoteBackendConfig& config() const { return config_; }

private:
  // Runs one full request-decode round trip, retrying transport and
  // schema-level failures alike before giving up.
  template <typename Fn>
  std::invoke_result_t<Fn> retried(Fn&& fn) {
    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
      try {
        return fn();
      } catch (const BackendError& e) {
        last_error = e.what();
      }
    }
    throw BackendError("remote backend failed after retries: " + last_error);
  }

  std::string complete_once(const std::string& system_prompt, const std::string& user_message) {
    json request;
    request["model"] = config_.model;
    request["temperature"] = config_.temperature;
    request["messages"] = json::array();
    request["messages"].push_back({{"role", "system"}, {"content", system_prompt}});
    request["messages"].push_back({{"role", "user"}, {"content", user_message}});

    gate_.acquire();
    httplib::Result result = [&] {
      struct Release {
        std::counting_semaphore<>& gate;
        ~Release() { gate.release(); }
      } release{gate_};
      httplib::Client client(config_.base_url);
      client.set_connection_timeout(config_.timeout_seconds, 0);
      client.set_read_timeout(config_.timeout_seconds, 0);
      httplib::Headers headers;
      if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
      return client.Post(config_.path, headers, request.dump(), "application/json");
    }();

    if (!result) throw BackendError("remote backend: transport error");
    if (result->status != 200) {
      throw BackendError("remote backend: HTTP " + std::to_string(result->status));
    }
    json reply = json::parse(result->body, nullptr, false);
    if (reply.is_discarded()) throw BackendError("remote backend: invalid response JSON");
    try {
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      throw BackendError("remote backend: response missing choices[0].message.content");
    }
  }

  RemoteBackendConfig config_;
  std::string api_key_;
  std::counting_semaphore<> gate_;
};

}  // namespace ovmm
