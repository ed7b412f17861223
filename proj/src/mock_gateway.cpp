#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <set>

#include "navqa/gateway.hpp"
#include "navqa/prompts.hpp"
#include "navqa/qa_dataset.hpp"
#include "strict_json.hpp"

namespace navqa {

namespace {

std::string slot_reply(const std::string& prompt, std::uint64_t& rng) {
  static const std::regex n_slots_re(R"re(into (\d+) fixed narrative slots)re");
  static const std::regex slot_re(R"re(<slot id="(\d+)" clips="(\d+)">)re");

  std::smatch m;
  long n_slots = 1;
  if (std::regex_search(prompt, m, n_slots_re)) n_slots = std::stol(m[1]);

  std::set<long> occupied;
  for (auto it = std::sregex_iterator(prompt.begin(), prompt.end(), slot_re);
       it != std::sregex_iterator(); ++it) {
    if (std::stol((*it)[2]) > 0) occupied.insert(std::stol((*it)[1]));
  }
  std::vector<long> candidates(occupied.begin(), occupied.end());
  long first_unused = -1;
  for (long id = 0; id < n_slots; ++id) {
    if (!occupied.contains(id)) {
      first_unused = id;
      break;
    }
  }
  if (first_unused >= 0) candidates.push_back(first_unused);
  if (candidates.empty()) candidates.push_back(0);

  const long slot = candidates[detail::splitmix64(rng) % candidates.size()];
  nlohmann::ordered_json reply;
  reply["slot"] = slot;
  reply["reason"] = slot == first_unused ? "New character and setting, different tone"
                                         : "Same characters continue the storyline of slot " +
                                               std::to_string(slot);
  return reply.dump();
}

std::string validate_reply(std::uint64_t& rng) {
  nlohmann::ordered_json reply;
  for (auto criterion : kValidatorCriteria) {
    const auto draw = detail::splitmix64(rng) % 10;
    const int score = draw < 6 ? 2 : (draw < 9 ? 1 : 0);
    reply[std::string(criterion)] = {
        {"score", score},
        {"explanation", score == 2 ? "criterion satisfied" : (score == 1 ? "partially satisfied"
                                                                         : "criterion violated")}};
  }
  return reply.dump();
}

std::vector<std::string> tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

double token_f1(std::string_view gold, std::string_view predicted) {
  auto g = tokens(gold);
  auto p = tokens(predicted);
  if (g.empty() || p.empty()) return 0.0;
  std::sort(g.begin(), g.end());
  std::sort(p.begin(), p.end());
  std::vector<std::string> common;
  std::set_intersection(g.begin(), g.end(), p.begin(), p.end(), std::back_inserter(common));
  if (common.empty()) return 0.0;
  const double precision = static_cast<double>(common.size()) / static_cast<double>(p.size());
  const double recall = static_cast<double>(common.size()) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

std::string judge_reply(const std::string& prompt, std::uint64_t& rng) {
  const auto gold = extract_tag(prompt, "gold_answer");
  const auto predicted = extract_tag(prompt, "predicted_answer");
  nlohmann::ordered_json reply;
  if (tokens(gold) == tokens(predicted) && !tokens(gold).empty()) {
    for (auto key : {"comprehensiveness", "depth", "evidence", "reasoning"}) reply[key] = 5;
    return reply.dump();
  }
  const int base = static_cast<int>(std::lround(5.0 * token_f1(gold, predicted)));
  for (auto key : {"comprehensiveness", "depth", "evidence", "reasoning"}) {
    const int jitter = static_cast<int>(detail::splitmix64(rng) % 3) - 1;
    reply[key] = std::clamp(base + jitter, 0, 5);
  }
  return reply.dump();
}

}  // namespace

std::string MockGateway::exchange(const GatewayRequest& request) {
  std::uint64_t rng = detail::fnv1a(std::to_string(seed_));
  rng = detail::fnv1a(to_string(request.task), rng);
  rng = detail::fnv1a(request.prompt, rng);
  for (const auto& a : request.attachments) rng = detail::fnv1a(a, rng);

  switch (request.task) {
    case GatewayTask::SlotAssign: return slot_reply(request.prompt, rng);
    case GatewayTask::Validate: return validate_reply(rng);
    case GatewayTask::Refine: {
      auto item = extract_tag(request.prompt, "qa_item");
      return item.empty() ? std::string("{}") : item;
    }
    case GatewayTask::Judge: return judge_reply(request.prompt, rng);
  }
  return "{}";
}

}  // namespace navqa
