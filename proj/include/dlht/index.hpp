#pragma once

/// One generation of the table: the bin array of primary buckets, the shared
/// arena of link buckets, and the bookkeeping a resize of this generation
/// needs. Buckets are exactly one cache line.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>

#include "dlht/hash.hpp"
#include "dlht/wordcodec.hpp"

namespace dlht {

/// Key word and value word; 16-byte aligned so the pair can be replaced by a
/// single double-width compare-and-swap.
struct alignas(16) Slot {
  std::uint64_t key;
  std::uint64_t value;
};

struct alignas(64) PrimaryBucket {
  std::uint64_t header;
  std::uint64_t link_meta;
  Slot slots[kPrimarySlots];
};

struct alignas(64) LinkBucket {
  Slot slots[kLinkSlots];
};

static_assert(sizeof(Slot) == 16 && alignof(Slot) == 16);
static_assert(sizeof(PrimaryBucket) == 64 && alignof(PrimaryBucket) == 64);
static_assert(sizeof(LinkBucket) == 64 && alignof(LinkBucket) == 64);

enum class LinkSide : std::uint8_t { A, BC };

/// Outcome of chaining: either our link index went in, or somebody else's
/// did first and `index` is theirs.
struct ChainResult {
  bool chained;
  std::uint32_t index;
};

inline constexpr std::size_t kChunkBins = 16384;

/// Which link side covers slot `s` (s >= kPrimarySlots).
[[nodiscard]] constexpr LinkSide side_of_slot(unsigned s) noexcept {
  return s < kPrimarySlots + kLinkSlots ? LinkSide::A : LinkSide::BC;
}

/// Raw anonymous mapping, optionally huge-page advised and NUMA interleaved.
class MappedRegion {
 public:
  MappedRegion() = default;
  MappedRegion(std::size_t bytes, bool interleave);
  ~MappedRegion();
  MappedRegion(MappedRegion&& other) noexcept;
  MappedRegion& operator=(MappedRegion&& other) noexcept;
  MappedRegion(const MappedRegion&) = delete;
  MappedRegion& operator=(const MappedRegion&) = delete;

  [[nodiscard]] void* data() const noexcept { return data_; }
  [[nodiscard]] std::size_t size() const noexcept { return size_; }

 private:
  void* data_ = nullptr;
  std::size_t size_ = 0;
};

struct IndexOptions {
  std::size_t nbins = 16384;
  unsigned link_ratio = 8;
  HashKind hash = HashKind::ModuloIdentity;
  bool zero_memory = false;
  bool interleave = false;
  std::uint64_t generation = 1;
  /// Link buckets beyond nlinks reachable only by resize transfers.
  std::size_t transfer_reserve = 0;
};

class Index {
 public:
  /// nbins must be a power of two >= 16. Throws std::invalid_argument
  /// otherwise and std::bad_alloc when the mapping fails.
  explicit Index(const IndexOptions& opts);

  Index(const Index&) = delete;
  Index& operator=(const Index&) = delete;

  [[nodiscard]] std::size_t nbins() const noexcept { return nbins_; }
  [[nodiscard]] std::size_t nlinks() const noexcept { return nlinks_; }
  [[nodiscard]] std::size_t link_capacity() const noexcept { return link_capacity_; }
  [[nodiscard]] std::uint64_t mask() const noexcept { return mask_; }
  [[nodiscard]] HashKind hash_kind() const noexcept { return hash_; }
  [[nodiscard]] std::uint64_t generation() const noexcept { return generation_; }
  [[nodiscard]] unsigned link_ratio() const noexcept { return link_ratio_; }
  [[nodiscard]] std::size_t total_slots() const noexcept {
    return nbins_ * kPrimarySlots + nlinks_ * kLinkSlots;
  }
  [[nodiscard]] std::size_t nchunks() const noexcept { return (nbins_ + kChunkBins - 1) / kChunkBins; }

  [[nodiscard]] PrimaryBucket& bin(std::size_t b) noexcept { return bins_[b]; }
  [[nodiscard]] const PrimaryBucket& bin(std::size_t b) const noexcept { return bins_[b]; }
  [[nodiscard]] LinkBucket& link(std::uint32_t i) noexcept { return links_[i]; }
  [[nodiscard]] PrimaryBucket* bins_data() noexcept { return bins_; }

  [[nodiscard]] std::size_t bin_for_hash(std::uint64_t h) const noexcept { return h & mask_; }

  /// Location of slot `s` of bin `b` under link metadata `lm`, or nullptr
  /// when the covering link bucket is not chained.
  [[nodiscard]] Slot* slot_at(std::size_t b, unsigned s, LinkMeta lm) noexcept {
    if (s < kPrimarySlots) return &bins_[b].slots[s];
    if (s < kPrimarySlots + kLinkSlots) {
      return lm.link_a == kUnlinked ? nullptr : &links_[lm.link_a].slots[s - kPrimarySlots];
    }
    if (lm.link_bc == kUnlinked) return nullptr;
    const unsigned off = s - kPrimarySlots - kLinkSlots;
    return &links_[lm.link_bc + off / kLinkSlots].slots[off % kLinkSlots];
  }

  /// Same as slot_at, reading the bin's current link metadata atomically.
  [[nodiscard]] Slot* slot_ref(std::size_t b, unsigned s) noexcept;

  [[nodiscard]] LinkMeta link_meta(std::size_t b) const noexcept;

  /// Fetch-and-add `count` (1 or 2) consecutive link buckets. nullopt when
  /// the arena is exhausted; the caller then triggers a resize.
  [[nodiscard]] std::optional<std::uint32_t> allocate_links(unsigned count) noexcept;

  /// Same cursor, but bounded by the transfer reserve instead of nlinks.
  [[nodiscard]] std::optional<std::uint32_t> allocate_transfer_links(unsigned count) noexcept;

  /// One CAS on the link-meta word installing `link_index` on `side`.
  ChainResult chain_links(std::size_t b, LinkSide side, std::uint32_t link_index) noexcept;

  [[nodiscard]] std::uint64_t& link_cursor_word() noexcept { return link_cursor_; }
  [[nodiscard]] std::uint64_t link_cursor() const noexcept;

  // Resize bookkeeping for the transfer out of this generation.
  enum class ResizePhase : int { Idle, Allocating, Transferring, Done, Failed };
  std::atomic<ResizePhase> resize_phase{ResizePhase::Idle};
  std::atomic<Index*> next{nullptr};
  std::atomic<std::size_t> chunk_cursor{0};
  std::atomic<std::size_t> chunks_done{0};
  std::atomic<std::uint64_t> transferred{0};
  std::atomic<unsigned> participants{0};
  std::atomic<unsigned> duplicate_transfers{0};
  std::atomic<std::uint64_t> resize_start_ns{0};
  std::atomic<int> resize_cause{0};

 private:
  std::size_t nbins_;
  std::size_t nlinks_;
  std::size_t link_capacity_;
  std::uint64_t mask_;
  unsigned link_ratio_;
  HashKind hash_;
  std::uint64_t generation_;
  MappedRegion bin_region_;
  MappedRegion link_region_;
  PrimaryBucket* bins_ = nullptr;
  LinkBucket* links_ = nullptr;
  alignas(64) std::uint64_t link_cursor_ = 0;
};

}  // namespace dlht
