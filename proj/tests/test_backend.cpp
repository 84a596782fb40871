#include <catch_amalgamated.hpp>

#include <atomic>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "ovmm/backend.hpp"
#include "ovmm/remote_backend.hpp"
#include "ovmm/scene.hpp"

using namespace ovmm;

TEST_CASE("wire encodings match the documented shapes byte for byte") {
  CHECK(encode_propose_request({"cup", "pen"}, {"kitchen", "office"}) ==
        R"({"objects":["cup","pen"],"region_candidates":["kitchen","office"]})");
  CHECK(encode_propose_response({"kitchen", "office"}) ==
        R"({"region_proposals":["kitchen","office"]})");
  CHECK(encode_prioritize_request({"kitchen", "office"}, "cup") ==
        R"({"regions":["kitchen","office"],"target_object":"cup"})");
  CHECK(encode_prioritize_response({"office", "kitchen"}) ==
        R"({"ordered_regions":["office","kitchen"]})");
  CHECK(encode_parse_response({"spray cleaner", "entertainment area"}) ==
        R"({"target_object":"spray cleaner","region":"entertainment area"})");
  CHECK(encode_parse_response({"milk powder", std::nullopt}) ==
        R"({"target_object":"milk powder","region":null})");
}

TEST_CASE("markdown fence stripping") {
  CHECK(strip_markdown_fences("{\"a\":1}") == "{\"a\":1}");
  CHECK(strip_markdown_fences("```json\n{\"a\":1}\n```") == "{\"a\":1}");
  CHECK(strip_markdown_fences("```\n{\"a\":1}\n```") == "{\"a\":1}");
  CHECK(strip_markdown_fences("  \n```json\n{\"a\":1}\n```  \n") == "{\"a\":1}");
  CHECK(strip_markdown_fences("   ") == "");
}

TEST_CASE("region list decoding validates the permutation") {
  const std::vector<std::string> expected = {"a", "b", "c"};
  CHECK(decode_region_list(json::parse(R"({"x":["c","a","b"]})"), "x", expected) ==
        std::vector<std::string>{"c", "a", "b"});
  CHECK_THROWS_AS(decode_region_list(json::parse(R"({"x":["c","a"]})"), "x", expected),
                  BackendError);
  CHECK_THROWS_AS(decode_region_list(json::parse(R"({"x":["c","a","a"]})"), "x", expected),
                  BackendError);
  CHECK_THROWS_AS(decode_region_list(json::parse(R"({"y":[]})"), "x", expected), BackendError);
  CHECK_THROWS_AS(decode_region_list(json::parse(R"({"x":[1,2,3]})"), "x", expected),
                  BackendError);
}

TEST_CASE("parse response decoding") {
  auto parsed = decode_parse_response(json::parse(R"({"target_object":"cup","region":null})"));
  CHECK(parsed.target_object == "cup");
  CHECK_FALSE(parsed.region_hint.has_value());
  parsed = decode_parse_response(json::parse(R"({"target_object":"cup","region":"bar"})"));
  CHECK(parsed.region_hint == "bar");
  CHECK_THROWS_AS(decode_parse_response(json::parse(R"({"region":"bar"})")), BackendError);
  CHECK_THROWS_AS(decode_parse_response(json::parse(R"({"target_object":""})")), BackendError);
}

TEST_CASE("hint reprioritization") {
  std::string warning;
  CHECK(reprioritize({"a", "b", "c"}, "b") == std::vector<std::string>{"b", "a", "c"});
  CHECK(reprioritize({"a", "b", "c"}, "a") == std::vector<std::string>{"a", "b", "c"});
  CHECK(reprioritize({"Washing Area", "bar"}, "washing area") ==
        std::vector<std::string>{"Washing Area", "bar"});
  CHECK(reprioritize({"a", "b"}, "zzz", &warning) == std::vector<std::string>{"a", "b"});
  CHECK_FALSE(warning.empty());
}

TEST_CASE("mock backend reproduces the golden transcripts") {
  MockBackend mock = make_mock_backend(default_scene());

  SECTION("region abstraction proposal") {
    const std::string request =
        R"({"objects":["beverage","bottle","can","soda","table","juice","mustard","ketchup"],)"
        R"("region_candidates":["living room","classroom","coffee shop","kitchen","hallway"]})";
    CHECK(mock.handle_propose_request(request) ==
          R"({"region_proposals":["kitchen","coffee shop","living room","classroom","hallway"]})");
  }

  SECTION("instruction parsing") {
    CHECK(mock.handle_parse_request("Fetch the spray cleaner from the entertainment area.") ==
          R"({"target_object":"spray cleaner","region":"entertainment area"})");
    CHECK(mock.handle_parse_request("Fetch the milk powder.") ==
          R"({"target_object":"milk powder","region":null})");
  }

  SECTION("region prioritization") {
    const std::string request =
        R"({"regions":["entertainment area","washing area","kitchen","bar","office table"],)"
        R"("target_object":"controller"})";
    CHECK(mock.handle_prioritize_request(request) ==
          R"({"ordered_regions":["entertainment area","bar","office table","kitchen","washing area"]})");
  }
}

TEST_CASE("mock backend is a pure function of its inputs") {
  MockBackend mock = make_mock_backend(default_scene());
  const std::vector<std::string> regions = {"bar", "washing area", "office table"};
  const auto first = mock.prioritize_regions(regions, "cup");
  for (int i = 0; i < 5; ++i) CHECK(mock.prioritize_regions(regions, "cup") == first);
  // Ties (affinity 0 for both unknown regions) keep input order.
  const auto tied = mock.prioritize_regions({"moon base", "sewer"}, "cup");
  CHECK(tied == std::vector<std::string>{"moon base", "sewer"});
}

TEST_CASE("mock parser extracts the longest lexicon match") {
  MockBackend mock({}, {"cup", "milk", "milk powder"}, {"bar", "washing area"});
  auto parsed = mock.parse_instruction("bring me the milk powder please");
  CHECK(parsed.target_object == "milk powder");
  parsed = mock.parse_instruction("Take the cup to the washing area!");
  CHECK(parsed.target_object == "cup");
  CHECK(parsed.region_hint == "washing area");
  // Unknown object: falls back to the words after the article.
  parsed = mock.parse_instruction("fetch the golden idol.");
  CHECK(parsed.target_object == "golden idol");
  CHECK_THROWS_AS(mock.parse_instruction(""), InputError);
}

// ---- Remote backend against an in-process HTTP server ---------------------

namespace {

class ScriptedServer {
public:
  explicit ScriptedServer(std::vector<std::pair<int, std::string>> script)
      : script_(std::move(script)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                httplib::Response& res) {
      const std::size_t i = call_count_.fetch_add(1);
      requests_.push_back(req.body);
      const auto& [status, content] = script_[std::min(i, script_.size() - 1)];
      if (status != 200) {
        res.status = status;
        return;
      }
      json message;
      message["role"] = "assistant";
      message["content"] = content;
      json choice;
      choice["message"] = message;
      json reply;
      reply["choices"] = json::array({choice});
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~ScriptedServer() {
    server_.stop();
    thread_.join();
  }

  RemoteBackendConfig config() const {
    RemoteBackendConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port_);
    c.timeout_seconds = 5;
    return c;
  }

  int calls() const { return static_cast<int>(call_count_.load()); }
  const std::vector<std::string>& requests() const { return requests_; }

private:
  std::vector<std::pair<int, std::string>> script_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<std::size_t> call_count_{0};
  std::vector<std::string> requests_;
};

}  // namespace

TEST_CASE("remote backend round trip") {
  ScriptedServer server({{200, R"({"ordered_regions":["bar","kitchen"]})"}});
  RemoteBackend backend(server.config());
  CHECK(backend.prioritize_regions({"kitchen", "bar"}, "cup") ==
        std::vector<std::string>{"bar", "kitchen"});
  REQUIRE(server.calls() == 1);

  // The request is a chat completion whose user message is the documented
  // request body and whose system prompt matches the prioritization prompt.
  const json request = json::parse(server.requests()[0]);
  CHECK(request.at("messages")[0].at("content").get<std::string>() ==
        prompts::kPrioritizeSystem);
  CHECK(request.at("messages")[1].at("content").get<std::string>() ==
        R"({"regions":["kitchen","bar"],"target_object":"cup"})");
}

TEST_CASE("remote backend strips markdown fences") {
  ScriptedServer server({{200, "```json\n{\"target_object\":\"cup\",\"region\":null}\n```"}});
  RemoteBackend backend(server.config());
  const auto parsed = backend.parse_instruction("fetch the cup.");
  CHECK(parsed.target_object == "cup");
  CHECK_FALSE(parsed.region_hint.has_value());
}

TEST_CASE("remote backend retries once then succeeds") {
  ScriptedServer server({{500, ""}, {200, R"({"region_proposals":["b","a"]})"}});
  RemoteBackend backend(server.config());
  CHECK(backend.propose_regions({"cup"}, {"a", "b"}) == std::vector<std::string>{"b", "a"});
  CHECK(server.calls() == 2);
}

TEST_CASE("remote backend fails after exhausting retries") {
  ScriptedServer server({{200, R"({"region_proposals":["a","a"]})"}});  // never a permutation
  RemoteBackend backend(server.config());
  CHECK_THROWS_AS(backend.propose_regions({"cup"}, {"a", "b"}), BackendError);
  CHECK(server.calls() == 2);  // initial + one retry
}

TEST_CASE("remote approver degrades to reject on failure") {
  ScriptedServer server({{500, ""}});
  RemoteBackend backend(server.config());
  const ApprovalVerdict verdict = backend.approve_detection("blurry blob", "cup");
  CHECK_FALSE(verdict.accepted);

  ScriptedServer ok({{200, R"({"accepted":true,"confidence":0.8})"}});
  RemoteBackend backend2(ok.config());
  const ApprovalVerdict yes = backend2.approve_detection("a cup on a table", "cup");
  CHECK(yes.accepted);
  CHECK(yes.confidence == Catch::Approx(0.8));
}
