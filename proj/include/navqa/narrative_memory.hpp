#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "navqa/embedding_store.hpp"
#include "navqa/gateway.hpp"

namespace navqa {

inline constexpr std::size_t kDefaultSlotCount = 16;
inline constexpr double kDefaultTau = 0.55;

enum class AssignerKind { Heuristic, External };
std::string_view to_string(AssignerKind kind);

struct NarrativeSlot {
  int slot_id = 0;
  std::vector<ClipIndex> clip_indices;  // assignment order, strictly increasing
  std::vector<std::string> reasons;     // one per clip

  bool empty() const noexcept { return clip_indices.empty(); }
  /// Normalized running mean of the members' mean-frame vectors; empty when
  /// the slot is empty or the bank was loaded from disk.
  const std::vector<double>& centroid() const noexcept { return centroid_; }

 private:
  friend class MemoryBank;
  std::vector<double> centroid_sum_;
  std::vector<double> centroid_;
};

/// Partition of processed clips into N narrative slots.
class MemoryBank {
 public:
  /// Throws InvalidN when n_slots == 0.
  explicit MemoryBank(std::size_t n_slots, AssignerKind kind = AssignerKind::Heuristic);

  std::size_t n_slots() const noexcept { return slots_.size(); }
  AssignerKind assigner_kind() const noexcept { return kind_; }
  const std::vector<NarrativeSlot>& slots() const noexcept { return slots_; }
  const NarrativeSlot& slot(std::size_t id) const { return slots_.at(id); }

  std::size_t clip_count() const noexcept { return slot_of_.size(); }
  bool contains(ClipIndex clip) const { return slot_of_.contains(clip); }
  /// Throws UnknownClip.
  int slot_of(ClipIndex clip) const;
  /// All assigned clips in ascending order.
  std::vector<ClipIndex> clips() const;
  /// Lowest-id slot without clips, or -1.
  int first_empty_slot() const;

  /// Appends `clip` to `slot_id`. `clip_mean` (unit norm, may be empty for
  /// loaded banks) updates the slot centroid. Throws AlreadyAssigned,
  /// OutOfOrderClip, SlotOutOfRange.
  void append(int slot_id, ClipIndex clip, std::string reason, std::span<const double> clip_mean);

  /// Compares slot membership, reasons, N and assigner kind.
  friend bool operator==(const MemoryBank& a, const MemoryBank& b);

 private:
  AssignerKind kind_;
  std::vector<NarrativeSlot> slots_;
  std::map<ClipIndex, int> slot_of_;
};

/// Deterministic assignment rule over slot centroids:
///  1. best = argmax cosine(clip_mean, centroid) over non-empty slots (lowest id on ties)
///  2. best if its similarity >= tau
///  3. otherwise the lowest-id empty slot
///  4. otherwise best
int heuristic_assign(const MemoryBank& bank, std::span<const double> clip_mean, double tau);

struct SlotSummary {
  int slot_id = 0;
  std::size_t clip_count = 0;
  std::vector<std::string> descriptions;  // representative member descriptions
};

/// One slot-assignment exchange through the gateway. Throws MalformedResponse,
/// SlotOutOfRange, GatewayError, Timeout.
SlotDecision external_assign(Gateway& gateway, const std::vector<SlotSummary>& summaries,
                             const ClipRecord& new_clip,
                             const std::vector<std::string>& attachments = {});

class SlotAssigner {
 public:
  virtual ~SlotAssigner() = default;
  virtual AssignerKind kind() const = 0;
  virtual SlotDecision assign(const MemoryBank& bank, const ClipRecord& clip,
                              std::span<const double> clip_mean) = 0;
};

class HeuristicAssigner : public SlotAssigner {
 public:
  explicit HeuristicAssigner(double tau = kDefaultTau);

  AssignerKind kind() const override { return AssignerKind::Heuristic; }
  SlotDecision assign(const MemoryBank& bank, const ClipRecord& clip,
                      std::span<const double> clip_mean) override;

 private:
  double tau_;
};

/// Sends up to three representative descriptions (first, middle, last member)
/// per slot with the new clip's description.
class ExternalAssigner : public SlotAssigner {
 public:
  explicit ExternalAssigner(Gateway& gateway) : gateway_(gateway) {}

  AssignerKind kind() const override { return AssignerKind::External; }
  SlotDecision assign(const MemoryBank& bank, const ClipRecord& clip,
                      std::span<const double> clip_mean) override;

 private:
  Gateway& gateway_;
  std::map<ClipIndex, std::string> descriptions_;
};

/// Assigns one clip. Throws AlreadyAssigned, EmptyClip, SlotOutOfRange and
/// whatever the assigner raises.
SlotDecision assign_clip(MemoryBank& bank, const ClipRecord& clip, const FrameSet& frames,
                         SlotAssigner& assigner);

/// Sequential greedy pass over `clips` in the given order. The first failure
/// aborts the build; the rethrown Error keeps its code and names the clip.
MemoryBank build_memory(const std::vector<ClipRecord>& clips, const EmbeddingStore& store,
                        SlotAssigner& assigner, std::size_t n_slots = kDefaultSlotCount);

nlohmann::ordered_json to_json(const MemoryBank& bank);
/// Throws SchemaError.
MemoryBank bank_from_json(const nlohmann::json& j);
void save_bank(const MemoryBank& bank, const std::filesystem::path& path);
/// Throws IoError, SchemaError.
MemoryBank load_bank(const std::filesystem::path& path);

}  // namespace navqa
