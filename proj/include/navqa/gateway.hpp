#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace navqa {

enum class GatewayTask { SlotAssign, Validate, Refine, Judge };

std::string_view to_string(GatewayTask task);
/// Throws InvalidRequest for unknown names.
GatewayTask parse_gateway_task(std::string_view name);

struct GatewayRequest {
  GatewayTask task = GatewayTask::SlotAssign;
  std::string prompt;
  // Opaque media references (paths or URLs) interpreted by the endpoint.
  std::vector<std::string> attachments;
  int max_retries = 3;
};

/// Wire body for HTTP endpoints: {"task":..., "prompt":...[, "attachments":[...]]}.
nlohmann::json request_body(const GatewayRequest& request);

struct GatewayResponse {
  std::string raw_text;
  // Present iff raw_text satisfied the task's response schema.
  std::optional<nlohmann::json> parsed;
};

/// Checks raw model output against the response schema of `task` and returns
/// the normalized structure, or nullopt. Never throws on arbitrary input.
std::optional<nlohmann::json> parse_for_task(GatewayTask task, std::string_view raw_text);

class Gateway {
 public:
  virtual ~Gateway() = default;

  /// Throws InvalidRequest (empty prompt), GatewayError, Timeout.
  GatewayResponse send(const GatewayRequest& request);

 protected:
  virtual std::string exchange(const GatewayRequest& request) = 0;
};

struct SlotDecision {
  int slot = 0;
  std::string reason;
  friend bool operator==(const SlotDecision&, const SlotDecision&) = default;
};

/// Strict parse of {"slot": int, "reason": string}. Surrounding whitespace is
/// tolerated; code fences or any other text are not. Throws MalformedResponse.
SlotDecision parse_slot_response(std::string_view raw_text);

struct BackoffPolicy {
  std::chrono::duration<double> base{0.5};
  double factor = 2.0;
  double jitter = 0.2;  // uniform in [-jitter, +jitter] of the nominal delay

  std::chrono::duration<double> delay(int retry, std::uint64_t& rng_state) const;
};

struct HttpOptions {
  std::chrono::duration<double> timeout{60.0};
  BackoffPolicy backoff;
};

/// JSON-over-HTTP POST client. The reply body must be a JSON object whose
/// "text" member carries the model output. Connection failures, timeouts, 429
/// and 5xx replies are retried up to request.max_retries times.
class HttpGateway : public Gateway {
 public:
  explicit HttpGateway(std::string url, HttpOptions options = {});

  const std::string& url() const noexcept { return url_; }

 protected:
  std::string exchange(const GatewayRequest& request) override;

 private:
  std::string url_;
  std::string origin_;
  std::string path_;
  HttpOptions options_;
};

/// Offline stand-in selected by "mock:<seed>". Responses depend only on the
/// seed and the request bytes.
///
///  - slot_assign: picks among the occupied slots and the lowest empty slot
///  - validate: eight criterion scores drawn from {0,1,2}
///  - refine: echoes the submitted QA item unchanged
///  - judge: all 5s when the predicted answer equals the gold answer, else
///    scores tracking token overlap with a seeded +-1 perturbation
class MockGateway : public Gateway {
 public:
  explicit MockGateway(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

 protected:
  std::string exchange(const GatewayRequest& request) override;

 private:
  std::uint64_t seed_;
};

/// Adapter for in-process handlers (tests, scripted fixtures).
class CallbackGateway : public Gateway {
 public:
  using Handler = std::function<std::string(const GatewayRequest&)>;
  explicit CallbackGateway(Handler handler) : handler_(std::move(handler)) {}

 protected:
  std::string exchange(const GatewayRequest& request) override { return handler_(request); }

 private:
  Handler handler_;
};

/// "mock:<seed>" or an http:// URL. Throws InvalidRequest for anything else.
std::unique_ptr<Gateway> make_gateway(std::string_view endpoint, HttpOptions options = {});

/// Reads NAVQA_LLM_ENDPOINT and NAVQA_LLM_TIMEOUT_S. Returns nullptr when the
/// endpoint variable is unset.
std::unique_ptr<Gateway> gateway_from_env();

}  // namespace navqa
