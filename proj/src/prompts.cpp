#include "navqa/prompts.hpp"

#include <sstream>

#include "navqa/narrative_memory.hpp"
#include "navqa/qa_dataset.hpp"

namespace navqa {

namespace {

void append_events(std::ostringstream& os, const std::vector<std::string>& events) {
  os << "<events>\n";
  for (std::size_t i = 0; i < events.size(); ++i) os << "[" << i << "] " << events[i] << "\n";
  os << "</events>\n";
}

}  // namespace

std::string slot_assignment_prompt(std::size_t n_slots, const std::vector<SlotSummary>& summaries,
                                   const ClipRecord& new_clip) {
  std::ostringstream os;
  os << "You are an expert visual reasoning model organizing a movie into " << n_slots
     << " fixed narrative slots.\n"
     << "Each slot represents one coherent storyline that unfolds across multiple clips.\n\n"
     << "A narrative slot is defined by:\n"
     << "Character Continuity -- the same people, animals, or key objects reappear visually.\n"
     << "Goal or Action Continuity -- the ongoing intention or action sequence remains "
        "consistent.\n"
     << "Plot/Sequence of Events -- the logical cause and effect.\n\n"
     << "You are shown representative descriptions from each existing slot, followed by the new "
        "clip. Decide which slot the new clip most likely continues.\n\n"
     << "Follow this reasoning process:\n"
     << "- Compare the new clip's content to each slot's members.\n"
     << "- Look for shared characters, repeated actions, and similar emotional tone.\n"
     << "- Choose the slot that represents a continuation of the same story or situation.\n"
     << "- If no slot clearly matches (new characters, new goal, different emotion), assign it "
        "to the first unused slot (lowest ID without clips).\n"
     << "- Always output only one slot ID.\n\n"
     << "Return your decision strictly in JSON format, with no code fences, no extra text:\n"
     << "{ \"slot\": <int>, \"reason\": \"<brief explanation of your reasoning>\" }\n\n";
  os << "<slots>\n";
  for (const auto& summary : summaries) {
    os << "<slot id=\"" << summary.slot_id << "\" clips=\"" << summary.clip_count << "\">\n";
    for (const auto& d : summary.descriptions) os << "- " << d << "\n";
    os << "</slot>\n";
  }
  os << "</slots>\n";
  os << "<new_clip index=\"" << new_clip.clip_index << "\" start_s=\"" << new_clip.start_s
     << "\" end_s=\"" << new_clip.end_s << "\">\n"
     << new_clip.description << "\n</new_clip>\n";
  return os.str();
}

std::string validator_prompt(const QAItem& item, const std::vector<std::string>& events) {
  std::ostringstream os;
  os << "You are an expert video QA validation assistant. Critically evaluate the given "
        "Question, Answer, Evidence triplet against the listed movie events.\n\n"
     << "Score each criterion with 0, 1 or 2 and give a short, relevant explanation:\n"
     << "- video_grounded_framing: can the question be answered by watching the video, without "
        "external knowledge?\n"
     << "- answer_faithfulness: is the answer correct based only on the provided events?\n"
     << "- events_completeness: are all events needed to answer the question present?\n"
     << "- minimal_events: is the evidence free of events that add nothing to the answer?\n"
     << "- clarity_challenge: is the question unambiguous and non-trivial?\n"
     << "- reasoning_required: does the question require reasoning rather than recall?\n"
     << "- character_agnostic: do question, answer and evidence avoid character names and "
        "describe observable content instead?\n"
     << "- content_identifiability: can question and answer be understood from visual content "
        "alone, without dialogue?\n\n"
     << "Reply with a single JSON object and nothing else, one key per criterion:\n"
     << "{\"video_grounded_framing\": {\"score\": 0|1|2, \"explanation\": \"...\"}, ...}\n\n";
  append_events(os, events);
  os << "<qa_item>\n" << to_json(item).dump() << "\n</qa_item>\n";
  return os.str();
}

std::string refiner_prompt(const QAItem& item, const ValidatorReport& report,
                           const std::vector<std::string>& events) {
  std::ostringstream os;
  os << "You are an expert Video QA Question-Answer-Evidence refiner. You receive movie event "
        "descriptions, an original Question-Answer-Evidence triplet, and validator feedback "
        "with per-criterion scores and explanations.\n\n"
     << "Refine the question, answer and evidence so they satisfy every criterion while using "
        "only what the events show. Do not add events, motivations or facts that are not "
        "present. Do not use character names; describe people visually (for example \"the "
        "older man\"). Keep 2 to 20 evidence indices that directly support the answer.\n\n";
  const auto zeros = report.zero_criteria();
  if (!zeros.empty()) {
    os << "Criteria scored 0 that must be fixed:";
    for (auto c : zeros) os << " " << c;
    os << "\n\n";
  }
  os << "Reply with a single JSON object with keys question, answer, evidence_events, "
        "reasoning_type, scene_distance and nothing else.\n\n";
  append_events(os, events);
  os << "<qa_item>\n" << to_json(item).dump() << "\n</qa_item>\n";
  os << "<feedback>\n" << to_json(report).dump() << "\n</feedback>\n";
  return os.str();
}

std::string judge_prompt(std::string_view question, std::string_view gold_answer,
                         std::string_view predicted_answer) {
  std::ostringstream os;
  os << "You are an evaluator of answers to questions about a long video. Compare the predicted "
        "answer with the ground-truth answer and score it from 0 to 5 on each dimension:\n"
     << "- comprehensiveness: does it capture the main ideas and relevant context?\n"
     << "- depth: does it connect events and show understanding of the underlying narrative?\n"
     << "- evidence: does it cite the events that support the ground truth?\n"
     << "- reasoning: does it follow the reasoning type the question requires, logically and "
        "without hallucination? (0 = completely misaligned, 5 = perfect alignment)\n\n"
     << "Reply with a single JSON object and nothing else:\n"
     << "{\"comprehensiveness\": int, \"depth\": int, \"evidence\": int, \"reasoning\": int}\n\n"
     << "<question>\n" << question << "\n</question>\n"
     << "<gold_answer>\n" << gold_answer << "\n</gold_answer>\n"
     << "<predicted_answer>\n" << predicted_answer << "\n</predicted_answer>\n";
  return os.str();
}

std::string extract_tag(std::string_view text, std::string_view tag) {
  const std::string open = "<" + std::string(tag);
  const std::string close = "</" + std::string(tag) + ">";
  std::size_t pos = 0;
  while ((pos = text.find(open, pos)) != std::string_view::npos) {
    const std::size_t after = pos + open.size();
    if (after < text.size() && (text[after] == '>' || text[after] == ' ')) break;
    pos = after;
  }
  if (pos == std::string_view::npos) return {};
  const std::size_t body = text.find('>', pos);
  if (body == std::string_view::npos) return {};
  const std::size_t end = text.find(close, body + 1);
  if (end == std::string_view::npos) return {};
  std::string_view inner = text.substr(body + 1, end - body - 1);
  if (!inner.empty() && inner.front() == '\n') inner.remove_prefix(1);
  if (!inner.empty() && inner.back() == '\n') inner.remove_suffix(1);
  return std::string(inner);
}

}  // namespace navqa
