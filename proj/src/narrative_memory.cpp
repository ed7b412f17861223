#include "navqa/narrative_memory.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "navqa/error.hpp"
#include "navqa/prompts.hpp"

namespace navqa {

std::string_view to_string(AssignerKind kind) {
  return kind == AssignerKind::Heuristic ? "heuristic" : "external";
}

MemoryBank::MemoryBank(std::size_t n_slots, AssignerKind kind) : kind_(kind) {
  if (n_slots == 0) throw Error(ErrorCode::InvalidN, "a memory bank needs at least one slot");
  slots_.resize(n_slots);
  for (std::size_t i = 0; i < n_slots; ++i) slots_[i].slot_id = static_cast<int>(i);
}

int MemoryBank::slot_of(ClipIndex clip) const {
  const auto it = slot_of_.find(clip);
  if (it == slot_of_.end()) {
    throw Error(ErrorCode::UnknownClip, "clip " + std::to_string(clip) + " is not in the bank");
  }
  return it->second;
}

std::vector<ClipIndex> MemoryBank::clips() const {
  std::vector<ClipIndex> out;
  out.reserve(slot_of_.size());
  for (const auto& [clip, slot] : slot_of_) out.push_back(clip);
  return out;
}

int MemoryBank::first_empty_slot() const {
  for (const auto& slot : slots_) {
    if (slot.empty()) return slot.slot_id;
  }
  return -1;
}

void MemoryBank::append(int slot_id, ClipIndex clip, std::string reason,
                        std::span<const double> clip_mean) {
  if (slot_id < 0 || static_cast<std::size_t>(slot_id) >= slots_.size()) {
    throw Error(ErrorCode::SlotOutOfRange, "slot " + std::to_string(slot_id) + " not in [0, " +
                                               std::to_string(slots_.size()) + ")");
  }
  if (slot_of_.contains(clip)) {
    throw Error(ErrorCode::AlreadyAssigned, "clip " + std::to_string(clip) + " is already in slot " +
                                                std::to_string(slot_of_.at(clip)));
  }
  auto& slot = slots_[static_cast<std::size_t>(slot_id)];
  if (!slot.clip_indices.empty() && slot.clip_indices.back() >= clip) {
    throw Error(ErrorCode::OutOfOrderClip, "clip " + std::to_string(clip) + " arrives after clip " +
                                               std::to_string(slot.clip_indices.back()) +
                                               " in slot " + std::to_string(slot_id));
  }

  if (!clip_mean.empty()) {
    if (slot.centroid_sum_.empty()) slot.centroid_sum_.assign(clip_mean.size(), 0.0);
    if (slot.centroid_sum_.size() != clip_mean.size()) {
      throw Error(ErrorCode::DimMismatch, "clip mean vector does not match slot centroid dim");
    }
    for (std::size_t i = 0; i < clip_mean.size(); ++i) slot.centroid_sum_[i] += clip_mean[i];
    // Antipodal members can cancel; the previous centroid then stays in place.
    try {
      slot.centroid_ = l2_normalize(slot.centroid_sum_);
    } catch (const Error&) {
    }
  }
  slot.clip_indices.push_back(clip);
  slot.reasons.push_back(std::move(reason));
  slot_of_.emplace(clip, slot_id);
}

bool operator==(const MemoryBank& a, const MemoryBank& b) {
  if (a.kind_ != b.kind_ || a.slots_.size() != b.slots_.size()) return false;
  for (std::size_t i = 0; i < a.slots_.size(); ++i) {
    if (a.slots_[i].clip_indices != b.slots_[i].clip_indices ||
        a.slots_[i].reasons != b.slots_[i].reasons) {
      return false;
    }
  }
  return true;
}

int heuristic_assign(const MemoryBank& bank, std::span<const double> clip_mean, double tau) {
  int best = -1;
  double best_sim = -2.0;
  for (const auto& slot : bank.slots()) {
    if (slot.empty() || slot.centroid().empty()) continue;
    const double sim = cosine(clip_mean, std::span<const double>(slot.centroid()));
    if (sim > best_sim) {
      best_sim = sim;
      best = slot.slot_id;
    }
  }
  if (best >= 0 && best_sim >= tau) return best;
  const int empty = bank.first_empty_slot();
  if (empty >= 0) return empty;
  return best >= 0 ? best : 0;
}

HeuristicAssigner::HeuristicAssigner(double tau) : tau_(tau) {
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw Error(ErrorCode::InvalidRequest, "tau must lie in (0, 1]");
  }
}

SlotDecision HeuristicAssigner::assign(const MemoryBank& bank, const ClipRecord&,
                                       std::span<const double> clip_mean) {
  const int slot = heuristic_assign(bank, clip_mean, tau_);
  const auto& target = bank.slot(static_cast<std::size_t>(slot));
  if (target.empty()) return {slot, "new storyline"};

  const double sim = cosine(clip_mean, std::span<const double>(target.centroid()));
  std::ostringstream reason;
  reason.precision(3);
  reason << std::fixed;
  if (sim >= tau_) {
    reason << "continues slot " << slot << " (cos " << sim << ")";
  } else {
    reason << "no slot reaches tau; closest is slot " << slot << " (cos " << sim << ")";
  }
  return {slot, reason.str()};
}

SlotDecision external_assign(Gateway& gateway, const std::vector<SlotSummary>& summaries,
                             const ClipRecord& new_clip,
                             const std::vector<std::string>& attachments) {
  GatewayRequest request;
  request.task = GatewayTask::SlotAssign;
  request.prompt = slot_assignment_prompt(summaries.size(), summaries, new_clip);
  request.attachments = attachments;
  const auto response = gateway.send(request);
  auto decision = parse_slot_response(response.raw_text);
  if (decision.slot < 0 || static_cast<std::size_t>(decision.slot) >= summaries.size()) {
    throw Error(ErrorCode::SlotOutOfRange, "assigner chose slot " + std::to_string(decision.slot) +
                                               " of " + std::to_string(summaries.size()));
  }
  return decision;
}

SlotDecision ExternalAssigner::assign(const MemoryBank& bank, const ClipRecord& clip,
                                      std::span<const double>) {
  std::vector<SlotSummary> summaries;
  summaries.reserve(bank.n_slots());
  for (const auto& slot : bank.slots()) {
    SlotSummary summary{slot.slot_id, slot.clip_indices.size(), {}};
    const auto& members = slot.clip_indices;
    if (!members.empty()) {
      std::vector<std::size_t> picks{0, members.size() / 2, members.size() - 1};
      picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
      for (auto p : picks) {
        const auto it = descriptions_.find(members[p]);
        summary.descriptions.push_back(it == descriptions_.end() ? std::string() : it->second);
      }
    }
    summaries.push_back(std::move(summary));
  }
  auto decision = external_assign(gateway_, summaries, clip);
  descriptions_[clip.clip_index] = clip.description;
  return decision;
}

SlotDecision assign_clip(MemoryBank& bank, const ClipRecord& clip, const FrameSet& frames,
                         SlotAssigner& assigner) {
  if (bank.contains(clip.clip_index)) {
    throw Error(ErrorCode::AlreadyAssigned,
                "clip " + std::to_string(clip.clip_index) + " is already assigned");
  }
  const auto mean = mean_frame_vector(frames);
  auto decision = assigner.assign(bank, clip, mean);
  bank.append(decision.slot, clip.clip_index, decision.reason, mean);
  return decision;
}

MemoryBank build_memory(const std::vector<ClipRecord>& clips, const EmbeddingStore& store,
                        SlotAssigner& assigner, std::size_t n_slots) {
  MemoryBank bank(n_slots, assigner.kind());
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const auto& clip = clips[i];
    try {
      if (i > 0 && clips[i - 1].clip_index >= clip.clip_index) {
        throw Error(ErrorCode::OutOfOrderClip, "clips must arrive in increasing index order");
      }
      if (!store.has_clip(clip.clip_index)) {
        throw Error(ErrorCode::BankStoreMismatch, "no frame embeddings");
      }
      assign_clip(bank, clip, store.clip_frame_set(clip.clip_index), assigner);
    } catch (const Error& e) {
      throw Error(e.code(), "build aborted at clip " + std::to_string(clip.clip_index) +
                                " (position " + std::to_string(i) + " of " +
                                std::to_string(clips.size()) + "): " + e.what());
    }
  }
  return bank;
}

nlohmann::ordered_json to_json(const MemoryBank& bank) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["n_slots"] = bank.n_slots();
  j["assigner"] = to_string(bank.assigner_kind());
  auto& slots = j["slots"] = nlohmann::ordered_json::array();
  for (const auto& slot : bank.slots()) {
    nlohmann::ordered_json s;
    s["slot_id"] = slot.slot_id;
    s["clips"] = slot.clip_indices;
    s["reasons"] = slot.reasons;
    slots.push_back(std::move(s));
  }
  return j;
}

MemoryBank bank_from_json(const nlohmann::json& j) {
  auto fail = [](const std::string& what) -> Error {
    return Error(ErrorCode::SchemaError, "bank file: " + what);
  };
  if (!j.is_object()) throw fail("top level is not an object");
  for (const char* key : {"version", "n_slots", "assigner", "slots"}) {
    if (!j.contains(key)) throw fail(std::string("missing \"") + key + "\"");
  }
  if (j["version"] != 1) throw fail("unsupported version " + j["version"].dump());
  if (!j["n_slots"].is_number_unsigned() || j["n_slots"].get<std::size_t>() == 0) {
    throw fail("\"n_slots\" must be a positive integer");
  }
  const auto& kind_name = j["assigner"];
  AssignerKind kind;
  if (kind_name == "heuristic") {
    kind = AssignerKind::Heuristic;
  } else if (kind_name == "external") {
    kind = AssignerKind::External;
  } else {
    throw fail("\"assigner\" must be \"heuristic\" or \"external\"");
  }
  const auto n_slots = j["n_slots"].get<std::size_t>();
  if (!j["slots"].is_array() || j["slots"].size() > n_slots) {
    throw fail("\"slots\" must be an array of at most n_slots entries");
  }

  MemoryBank bank(n_slots, kind);
  std::vector<std::pair<ClipIndex, std::pair<int, std::string>>> members;
  for (const auto& s : j["slots"]) {
    try {
      const int slot_id = s.at("slot_id").get<int>();
      const auto clips = s.at("clips").get<std::vector<ClipIndex>>();
      const auto reasons = s.at("reasons").get<std::vector<std::string>>();
      if (clips.size() != reasons.size()) throw fail("slot " + std::to_string(slot_id) +
                                                     " has mismatched clips and reasons");
      for (std::size_t i = 0; i < clips.size(); ++i) {
        members.push_back({clips[i], {slot_id, reasons[i]}});
      }
    } catch (const nlohmann::json::exception& e) {
      throw fail(e.what());
    }
  }
  // Replay in clip order so per-slot ordering checks see the original sequence.
  std::stable_sort(members.begin(), members.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  try {
    for (auto& [clip, slot] : members) bank.append(slot.first, clip, std::move(slot.second), {});
  } catch (const Error& e) {
    throw fail(e.what());
  }
  return bank;
}

void save_bank(const MemoryBank& bank, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << to_json(bank).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

MemoryBank load_bank(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::SchemaError, path.string() + " is not valid JSON");
  return bank_from_json(j);
}

}  // namespace navqa
