#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "navqa/error.hpp"
#include "navqa/gateway.hpp"
#include "navqa/narrative_memory.hpp"
#include "navqa/prompts.hpp"

using namespace navqa;
using nlohmann::json;

namespace {

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected navqa::Error");
  return ErrorCode::IoError;
}

HttpOptions fast_options(double timeout_s = 2.0) {
  HttpOptions options;
  options.timeout = std::chrono::duration<double>(timeout_s);
  options.backoff.base = std::chrono::duration<double>(0.01);
  return options;
}

// Local HTTP server on an ephemeral port, stopped on destruction.
class LocalServer {
 public:
  explicit LocalServer(httplib::Server::Handler handler) {
    server_.Post("/v1/chat", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

GatewayRequest slot_request(std::string prompt = "assign this clip", int retries = 3) {
  GatewayRequest r;
  r.task = GatewayTask::SlotAssign;
  r.prompt = std::move(prompt);
  r.max_retries = retries;
  return r;
}

}  // namespace

TEST_CASE("task names") {
  for (auto t : {GatewayTask::SlotAssign, GatewayTask::Validate, GatewayTask::Refine, GatewayTask::Judge}) {
    CHECK(parse_gateway_task(to_string(t)) == t);
  }
  CHECK(code_of([] { parse_gateway_task("summarize"); }) == ErrorCode::InvalidRequest);
}

TEST_CASE("strict slot parsing") {
  CHECK(parse_slot_response(R"({"slot": 0, "reason": "Same woman and dog continue walking together"})").slot == 0);
  CHECK(parse_slot_response("  \n{\"slot\": 3, \"reason\": \"New character and setting, different tone\"}\n").slot == 3);
  CHECK(code_of([] { parse_slot_response("```json {\"slot\":1,\"reason\":\"x\"}```"); }) == ErrorCode::MalformedResponse);
  CHECK(code_of([] { parse_slot_response(R"({"slot":"one"})"); }) == ErrorCode::MalformedResponse);
  CHECK(code_of([] { parse_slot_response(R"({"slot":1})"); }) == ErrorCode::MalformedResponse);
  CHECK(code_of([] { parse_slot_response(R"({"slot":1.5,"reason":"x"})"); }) == ErrorCode::MalformedResponse);
  CHECK(code_of([] { parse_slot_response(R"(Sure! {"slot":1,"reason":"x"})"); }) == ErrorCode::MalformedResponse);
  CHECK(code_of([] { parse_slot_response(R"({"slot":99999999999,"reason":"x"})"); }) == ErrorCode::MalformedResponse);
  CHECK(code_of([] { parse_slot_response(""); }) == ErrorCode::MalformedResponse);
}

TEST_CASE("parse_for_task never throws") {
  const char* junk[] = {"", "{", "[]", "null", "{\"slot\": []}", "```", "\xff\xfe"};
  for (auto t : {GatewayTask::SlotAssign, GatewayTask::Validate, GatewayTask::Refine, GatewayTask::Judge}) {
    for (const char* text : junk) CHECK_FALSE(parse_for_task(t, text).has_value());
  }
  CHECK(parse_for_task(GatewayTask::SlotAssign, R"({"slot": 2, "reason": "r"})").has_value());
}

TEST_CASE("request body") {
  auto r = slot_request("p");
  CHECK(request_body(r) == json{{"task", "slot_assign"}, {"prompt", "p"}});
  r.attachments = {"clip_0003.mp4"};
  CHECK(request_body(r)["attachments"] == json::array({"clip_0003.mp4"}));
}

TEST_CASE("send validates the request") {
  MockGateway mock(1);
  CHECK(code_of([&] { mock.send(slot_request("")); }) == ErrorCode::InvalidRequest);
  CHECK(code_of([&] { mock.send(slot_request("p", -1)); }) == ErrorCode::InvalidRequest);
}

TEST_CASE("mock determinism") {
  const auto prompt = slot_assignment_prompt(16, {{0, 2, {"a woman walks a dog"}}, {1, 0, {}}},
                                             {7, 70.0, 80.0, "the dog barks"});
  auto a = make_gateway("mock:42");
  auto b = make_gateway("mock:42");
  const auto first = a->send(slot_request(prompt));
  REQUIRE(first.parsed.has_value());
  const auto decision = parse_slot_response(first.raw_text);
  CHECK((decision.slot == 0 || decision.slot == 1));
  for (int i = 0; i < 100; ++i) CHECK(b->send(slot_request(prompt)).raw_text == first.raw_text);

  // Different seeds or prompts are allowed to differ, but must stay valid.
  for (int seed = 0; seed < 20; ++seed) {
    MockGateway m(seed);
    CHECK(m.send(slot_request(prompt)).parsed.has_value());
  }
  CHECK(code_of([] { make_gateway("mock:x"); }) == ErrorCode::InvalidRequest);
  CHECK(code_of([] { make_gateway("ftp://host"); }) == ErrorCode::InvalidRequest);
}

TEST_CASE("backoff schedule") {
  BackoffPolicy policy;
  std::uint64_t state = 1;
  for (int retry = 0; retry < 4; ++retry) {
    const double nominal = 0.5 * (1 << retry);
    for (int i = 0; i < 50; ++i) {
      const double d = policy.delay(retry, state).count();
      CHECK(d >= nominal * 0.8 - 1e-12);
      CHECK(d <= nominal * 1.2 + 1e-12);
    }
  }
}

TEST_CASE("http gateway success") {
  LocalServer server([](const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body);
    CHECK(body["task"] == "slot_assign");
    res.set_content(json{{"text", R"({"slot": 1, "reason": "continues"})"}}.dump(), "application/json");
  });
  HttpGateway gateway(server.url(), fast_options());
  const auto reply = gateway.send(slot_request());
  REQUIRE(reply.parsed.has_value());
  CHECK(parse_slot_response(reply.raw_text) == SlotDecision{1, "continues"});
}

TEST_CASE("http gateway retries server errors") {
  std::atomic<int> hits{0};
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 503;
  });
  HttpGateway gateway(server.url(), fast_options());
  CHECK(code_of([&] { gateway.send(slot_request("p", 2)); }) == ErrorCode::GatewayError);
  CHECK(hits.load() == 3);
}

TEST_CASE("http gateway recovers after a transient error") {
  std::atomic<int> hits{0};
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    if (++hits == 1) {
      res.status = 429;
      return;
    }
    res.set_content(json{{"text", "{\"slot\": 0, \"reason\": \"r\"}"}}.dump(), "application/json");
  });
  HttpGateway gateway(server.url(), fast_options());
  CHECK(gateway.send(slot_request()).parsed.has_value());
  CHECK(hits.load() == 2);
}

TEST_CASE("http gateway reply shape and client errors") {
  std::atomic<int> hits{0};
  LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    if (json::parse(req.body)["prompt"] == "bad-request") {
      res.status = 400;
      return;
    }
    res.set_content(R"({"answer": "no text member"})", "application/json");
  });
  HttpGateway gateway(server.url(), fast_options());
  CHECK(code_of([&] { gateway.send(slot_request("p")); }) == ErrorCode::MalformedResponse);
  CHECK(code_of([&] { gateway.send(slot_request("bad-request")); }) == ErrorCode::GatewayError);
  CHECK(hits.load() == 2);
}

TEST_CASE("http gateway timeout") {
  LocalServer server([](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(600));
    res.set_content(R"({"text": "{}"})", "application/json");
  });
  HttpGateway gateway(server.url(), fast_options(0.1));
  CHECK(code_of([&] { gateway.send(slot_request("p", 0)); }) == ErrorCode::Timeout);
}

TEST_CASE("unreachable endpoint") {
  // Bind then release a port so nothing is listening on it.
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  HttpGateway gateway("http://127.0.0.1:" + std::to_string(port) + "/x", fast_options(0.5));
  const auto start = std::chrono::steady_clock::now();
  const auto code = code_of([&] { gateway.send(slot_request("p", 2)); });
  CHECK(is_gateway_failure(code));
  // Two back-off sleeps of ~10 ms and ~20 ms happen before giving up.
  CHECK(std::chrono::steady_clock::now() - start >= std::chrono::milliseconds(20));
}

TEST_CASE("gateway from environment") {
  ::unsetenv("NAVQA_LLM_ENDPOINT");
  CHECK(gateway_from_env() == nullptr);
  ::setenv("NAVQA_LLM_ENDPOINT", "mock:3", 1);
  auto g = gateway_from_env();
  REQUIRE(g != nullptr);
  CHECK(dynamic_cast<MockGateway*>(g.get())->seed() == 3);
  ::setenv("NAVQA_LLM_TIMEOUT_S", "abc", 1);
  CHECK(code_of([] { gateway_from_env(); }) == ErrorCode::InvalidRequest);
  ::unsetenv("NAVQA_LLM_TIMEOUT_S");
  ::unsetenv("NAVQA_LLM_ENDPOINT");
}
