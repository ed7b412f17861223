#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "navqa/embedding_store.hpp"

namespace navqa {

struct QAItem;
struct ValidatorReport;
struct SlotSummary;

// Prompt payloads sent through the gateway. Inputs are wrapped in XML-style
// tags so that endpoints (and the offline mock) can locate them.

std::string slot_assignment_prompt(std::size_t n_slots, const std::vector<SlotSummary>& summaries,
                                   const ClipRecord& new_clip);

std::string validator_prompt(const QAItem& item, const std::vector<std::string>& events);

std::string refiner_prompt(const QAItem& item, const ValidatorReport& report,
                           const std::vector<std::string>& events);

std::string judge_prompt(std::string_view question, std::string_view gold_answer,
                         std::string_view predicted_answer);

/// Contents of the first <tag ...>...</tag> element, or empty.
std::string extract_tag(std::string_view text, std::string_view tag);

}  // namespace navqa
