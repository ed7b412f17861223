#include "navqa/gateway.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <limits>
#include <random>
#include <thread>

#include <httplib.h>

#include "navqa/error.hpp"
#include "navqa/eval.hpp"
#include "navqa/qa_dataset.hpp"
#include "strict_json.hpp"

namespace navqa {

std::string_view to_string(GatewayTask task) {
  switch (task) {
    case GatewayTask::SlotAssign: return "slot_assign";
    case GatewayTask::Validate: return "validate";
    case GatewayTask::Refine: return "refine";
    case GatewayTask::Judge: return "judge";
  }
  return "unknown";
}

GatewayTask parse_gateway_task(std::string_view name) {
  for (auto task : {GatewayTask::SlotAssign, GatewayTask::Validate, GatewayTask::Refine,
                    GatewayTask::Judge}) {
    if (to_string(task) == name) return task;
  }
  throw Error(ErrorCode::InvalidRequest, "unknown gateway task '" + std::string(name) + "'");
}

nlohmann::json request_body(const GatewayRequest& request) {
  nlohmann::json body;
  body["task"] = to_string(request.task);
  body["prompt"] = request.prompt;
  if (!request.attachments.empty()) body["attachments"] = request.attachments;
  return body;
}

std::optional<nlohmann::json> parse_for_task(GatewayTask task, std::string_view raw_text) {
  try {
    switch (task) {
      case GatewayTask::SlotAssign: {
        const auto d = parse_slot_response(raw_text);
        return nlohmann::json{{"slot", d.slot}, {"reason", d.reason}};
      }
      case GatewayTask::Validate:
        return nlohmann::json(to_json(parse_validator_response(raw_text)));
      case GatewayTask::Refine: {
        QAItem placeholder;
        return nlohmann::json(to_json(parse_refined_item(raw_text, placeholder)));
      }
      case GatewayTask::Judge:
        return nlohmann::json(to_json(parse_judge_response(raw_text)));
    }
  } catch (const Error&) {
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

GatewayResponse Gateway::send(const GatewayRequest& request) {
  if (request.prompt.empty()) throw Error(ErrorCode::InvalidRequest, "empty prompt");
  if (request.max_retries < 0) throw Error(ErrorCode::InvalidRequest, "negative max_retries");
  GatewayResponse response;
  response.raw_text = exchange(request);
  response.parsed = parse_for_task(request.task, response.raw_text);
  return response;
}

SlotDecision parse_slot_response(std::string_view raw_text) {
  const auto j = detail::parse_strict_object(raw_text);
  if (!j) throw Error(ErrorCode::MalformedResponse, "slot reply is not a bare JSON object");
  const auto slot = j->find("slot");
  const auto reason = j->find("reason");
  if (slot == j->end() || !slot->is_number_integer()) {
    throw Error(ErrorCode::MalformedResponse, "slot reply lacks an integer \"slot\"");
  }
  if (reason == j->end() || !reason->is_string()) {
    throw Error(ErrorCode::MalformedResponse, "slot reply lacks a string \"reason\"");
  }
  if (slot->is_number_unsigned()
          ? slot->get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<int>::max())
          : (slot->get<std::int64_t>() < std::numeric_limits<int>::min() ||
             slot->get<std::int64_t>() > std::numeric_limits<int>::max())) {
    throw Error(ErrorCode::MalformedResponse, "slot id does not fit an int");
  }
  const auto value = slot->get<std::int64_t>();
  return SlotDecision{static_cast<int>(value), reason->get<std::string>()};
}

std::chrono::duration<double> BackoffPolicy::delay(int retry, std::uint64_t& rng_state) const {
  double nominal = base.count();
  for (int i = 0; i < retry; ++i) nominal *= factor;
  const double u = static_cast<double>(detail::splitmix64(rng_state) >> 11) * 0x1.0p-53;
  return std::chrono::duration<double>(nominal * (1.0 + jitter * (2.0 * u - 1.0)));
}

HttpGateway::HttpGateway(std::string url, HttpOptions options)
    : url_(std::move(url)), options_(options) {
  constexpr std::string_view scheme = "http://";
  if (url_.rfind(scheme, 0) != 0) {
    throw Error(ErrorCode::InvalidRequest, "endpoint must start with http:// : " + url_);
  }
  const auto slash = url_.find('/', scheme.size());
  origin_ = url_.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : url_.substr(slash);
  if (origin_.size() == scheme.size()) {
    throw Error(ErrorCode::InvalidRequest, "endpoint has no host: " + url_);
  }
}

std::string HttpGateway::exchange(const GatewayRequest& request) {
  httplib::Client client(origin_);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  const std::string body = request_body(request).dump();
  std::uint64_t rng_state = std::random_device{}();
  const int attempts = request.max_retries + 1;
  ErrorCode last_code = ErrorCode::GatewayError;
  std::string last_detail;

  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(options_.backoff.delay(attempt - 1, rng_state));

    auto result = client.Post(path_, body, "application/json");
    if (!result) {
      const auto err = result.error();
      last_code = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                      ? ErrorCode::Timeout
                      : ErrorCode::GatewayError;
      last_detail = httplib::to_string(err);
      continue;
    }
    const int status = result->status;
    if (status == 429 || status >= 500) {
      last_code = ErrorCode::GatewayError;
      last_detail = "HTTP " + std::to_string(status);
      continue;
    }
    if (status < 200 || status >= 300) {
      throw Error(ErrorCode::GatewayError, url_ + " replied HTTP " + std::to_string(status));
    }
    const auto reply = nlohmann::json::parse(result->body, nullptr, false);
    if (!reply.is_object() || !reply.contains("text") || !reply["text"].is_string()) {
      throw Error(ErrorCode::MalformedResponse, url_ + " reply lacks a string \"text\" member");
    }
    return reply["text"].get<std::string>();
  }
  throw Error(last_code, url_ + " failed after " + std::to_string(attempts) +
                             " attempts (last: " + last_detail + ")");
}

std::unique_ptr<Gateway> make_gateway(std::string_view endpoint, HttpOptions options) {
  constexpr std::string_view mock_prefix = "mock:";
  if (endpoint.substr(0, mock_prefix.size()) == mock_prefix) {
    const auto digits = endpoint.substr(mock_prefix.size());
    std::uint64_t seed = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), seed);
    if (digits.empty() || ec != std::errc{} || ptr != digits.data() + digits.size()) {
      throw Error(ErrorCode::InvalidRequest, "bad mock seed in '" + std::string(endpoint) + "'");
    }
    return std::make_unique<MockGateway>(seed);
  }
  return std::make_unique<HttpGateway>(std::string(endpoint), options);
}

std::unique_ptr<Gateway> gateway_from_env() {
  const char* endpoint = std::getenv("NAVQA_LLM_ENDPOINT");
  if (endpoint == nullptr || *endpoint == '\0') return nullptr;
  HttpOptions options;
  if (const char* timeout = std::getenv("NAVQA_LLM_TIMEOUT_S"); timeout && *timeout) {
    char* end = nullptr;
    const double seconds = std::strtod(timeout, &end);
    if (end == timeout || *end != '\0' || !(seconds > 0.0)) {
      throw Error(ErrorCode::InvalidRequest,
                  std::string("NAVQA_LLM_TIMEOUT_S must be a positive number, got '") + timeout + "'");
    }
    options.timeout = std::chrono::duration<double>(seconds);
  }
  return make_gateway(endpoint, options);
}

}  // namespace navqa
