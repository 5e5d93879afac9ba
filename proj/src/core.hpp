#pragma once

// Shared state of a Table and the templated operation engine. Engine<Sync>
// is instantiated once with atomic accesses and once with plain accesses for
// single-thread mode.

#include <atomic>
#include <bit>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "dlht/epoch.hpp"
#include "dlht/index.hpp"
#include "dlht/table.hpp"
#include "sync.hpp"

namespace dlht::detail {

/// A request key normalized for the engine.
struct Key {
  std::uint64_t word = 0;  // slot key word (packed key or signature)
  std::uint64_t hash = 0;
  std::span<const std::byte> bytes{};  // Allocator mode only
  std::uint16_t ns = 0;
  unsigned nibble = 0;  // Allocator mode: 1..8 inlined length, 0 = long key
};

struct TableCore {
  explicit TableCore(Config config);
  ~TableCore();

  Config cfg;
  Mode mode;
  HashKind hash;
  bool single;
  std::uint64_t uid;

  std::atomic<Index*> current{nullptr};
  std::atomic<std::uint64_t> current_gen{1};

  // Prefetch hints; may briefly lag the current index, which is harmless
  // for a non-faulting hint.
  std::atomic<PrimaryBucket*> hint_bins{nullptr};
  std::atomic<std::uint64_t> hint_mask{0};

  // Reserved keys: the one placed in even bins hashes to an odd bin and
  // vice versa, so neither can ever belong to the bin it is written into.
  std::uint64_t key_for_even_bins = 0;
  std::uint64_t key_for_odd_bins = 0;

  std::shared_ptr<ThreadRegistry> registry;
  ThreadCell* solo_cell = nullptr;
  std::shared_ptr<RecordAllocator> allocator;
  RecordLayout layout;

  std::mutex index_mutex;
  std::unique_ptr<Index> live_index;
  std::deque<std::unique_ptr<Index>> retired_indexes;
  std::atomic<std::size_t> retired_count{0};
  // Lets observers ask about resizes without touching an index they have
  // not announced.
  std::atomic<unsigned> resizes_in_flight{0};

  mutable std::mutex history_mutex;
  std::vector<ResizeRecord> history;

  [[nodiscard]] ThreadCell& cell() { return single ? *solo_cell : thread_cell(registry, uid); }

  void announce(ThreadCell& c) noexcept {
    for (;;) {
      const std::uint64_t g = current_gen.load(std::memory_order_seq_cst);
      c.announced.store(g, std::memory_order_seq_cst);
      if (current_gen.load(std::memory_order_seq_cst) == g) return;
    }
  }
  void enter(ThreadCell& c) noexcept {
    if (c.depth++ == 0) {
      // Only the owner writes the counter.
      c.enter_count.store(c.enter_count.load(std::memory_order_relaxed) + 1, std::memory_order_relaxed);
      if (!single) announce(c);
    }
  }
  void exit(ThreadCell& c) noexcept {
    if (--c.depth == 0) {
      if (!single) c.announced.store(0, std::memory_order_release);
      if (retired_count.load(std::memory_order_relaxed) != 0) try_reclaim();
    }
  }
  /// Moves an active announcement forward to the current generation. Only
  /// valid between operations of an outermost session, when the thread
  /// holds no index pointers; nested sessions (iteration, user scopes) keep
  /// their older announcement.
  void reannounce(ThreadCell& c) noexcept {
    if (!single && c.depth == 1) announce(c);
  }
  /// Releases retired generations no announcement can still reach.
  void try_reclaim();

  [[nodiscard]] Index* index() const noexcept { return current.load(std::memory_order_acquire); }

  [[nodiscard]] std::uint64_t transfer_key_for(std::size_t bin) const noexcept {
    return (bin & 1) ? key_for_odd_bins : key_for_even_bins;
  }
  [[nodiscard]] bool reserved(std::uint64_t key) const noexcept {
    return key == key_for_even_bins || key == key_for_odd_bins;
  }

  [[nodiscard]] Key make_key(std::uint64_t k) const noexcept { return Key{k, hash_word(k, hash)}; }
  [[nodiscard]] Key make_key(std::span<const std::byte> bytes, std::uint16_t ns) const noexcept {
    Key k;
    k.word = key_word_of(bytes);
    k.hash = hash_bytes(bytes, hash);
    k.bytes = bytes;
    k.ns = ns;
    k.nibble = bytes.size() <= 8 ? static_cast<unsigned>(bytes.size()) : 0u;
    return k;
  }

  /// Hash of the key held in a slot (resize and audit).
  [[nodiscard]] std::uint64_t slot_hash(std::uint64_t key_word, std::uint64_t value_word) const noexcept {
    if (mode == Mode::Allocator && untag_address(value_word).key_size == 0) {
      return hash_bytes(record_key(layout, value_word), hash);
    }
    return hash_word(key_word, hash);
  }

  /// Allocator-mode match beyond the key word: namespace, length and the
  /// full key for long keys.
  [[nodiscard]] bool record_matches(const Key& k, std::uint64_t tagged) const noexcept {
    const TaggedValue tv = untag_address(tagged);
    if (tv.ns != k.ns || tv.key_size != k.nibble) return false;
    return k.nibble != 0 || record_key_equals(layout, tagged, k.bytes);
  }

  void retire_record(ThreadCell& c, std::uint64_t tagged) {
    if (cfg.reclamation) registry->retire(c, tagged);
  }
  void free_unpublished(std::uint64_t tagged) noexcept { free_record(*allocator, layout, tagged); }

  void publish_index(Index* idx) noexcept {
    hint_bins.store(idx->bins_data(), std::memory_order_relaxed);
    hint_mask.store(idx->mask(), std::memory_order_relaxed);
    current.store(idx, std::memory_order_seq_cst);
    current_gen.store(idx->generation(), std::memory_order_seq_cst);
  }
};

/// Link buckets a new index keeps back for its incoming transfer: the
/// worst case is every old bin landing in one new bin needing three links.
[[nodiscard]] std::size_t transfer_reserve(std::size_t old_nbins, std::size_t max_threads) noexcept;

template <class Sync>
struct Engine {
  enum class Scan { Hit, Miss, Retry };
  struct Hit {
    unsigned slot = 0;
    Slot* where = nullptr;
    std::uint64_t key = 0;
    std::uint64_t value = 0;
  };

  static HeaderWord header(Index& idx, std::size_t b) noexcept {
    return HeaderWord{Sync::load_acquire(idx.bin(b).header)};
  }

  /// Header of bin b once it is not mid-transfer.
  static HeaderWord settled_header(Index& idx, std::size_t b) noexcept {
    HeaderWord h = header(idx, b);
    if (h.bin_state() != BinState::InTransfer) return h;
    Backoff backoff;
    do {
      backoff.pause();
      h = header(idx, b);
    } while (h.bin_state() == BinState::InTransfer);
    return h;
  }

  /// True if the bin left NoTransfer since the scan began; a miss then says
  /// nothing because the key may already live in the next index.
  static bool moved_since(Index& idx, std::size_t b) noexcept {
    Sync::read_fence();
    return HeaderWord{Sync::load_relaxed(idx.bin(b).header)}.bin_state() != BinState::NoTransfer;
  }

  /// Looks for `k` among the slots of `h` selected by `mask`. A hit is
  /// validated: the header must still equal `h` after the slot words were read.
  static Scan scan(const TableCore& c, Index& idx, std::size_t b, HeaderWord h, std::uint64_t mask, const Key& k,
                   Hit& out) noexcept {
    PrimaryBucket& bucket = idx.bin(b);
    LinkMeta lm{kUnlinked, kUnlinked};
    bool have_links = false;
    for (; mask != 0; mask &= mask - 1) {
      const auto s = static_cast<unsigned>(std::countr_zero(mask)) / 2;
      if (s >= kPrimarySlots && !have_links) {
        lm = unpack_link_meta(Sync::load_acquire(bucket.link_meta));
        have_links = true;
      }
      Slot* p = idx.slot_at(b, s, lm);
      if (p == nullptr) continue;
      const std::uint64_t kw = Sync::load_relaxed(p->key);
      if (kw != k.word) continue;
      const std::uint64_t v = Sync::load_relaxed(p->value);
      Sync::read_fence();
      if (Sync::load_relaxed(bucket.header) != h.bits()) return Scan::Retry;
      if (c.mode == Mode::Allocator && !c.record_matches(k, v)) continue;
      out = Hit{s, p, kw, v};
      return Scan::Hit;
    }
    return Scan::Miss;
  }

  static std::uint64_t live_mask(HeaderWord h) noexcept {
    return h.pair_mask(SlotState::Valid) | h.pair_mask(SlotState::Shadow);
  }

  /// Storage for slot s of bin b, chaining link buckets first if needed.
  /// nullptr when the arena is exhausted. Side A is always chained before
  /// side BC.
  static Slot* ensure_slot(Index& idx, std::size_t b, unsigned s, bool for_transfer) noexcept {
    if (s < kPrimarySlots) return &idx.bin(b).slots[s];
    LinkMeta lm = unpack_link_meta(Sync::load_acquire(idx.bin(b).link_meta));
    auto chain = [&](LinkSide side, unsigned count) -> bool {
      const auto first = for_transfer ? idx.allocate_transfer_links(count) : idx.allocate_links(count);
      if (!first) return false;
      const ChainResult r = idx.chain_links(b, side, *first);
      (side == LinkSide::A ? lm.link_a : lm.link_bc) = r.index;
      return true;
    };
    if (lm.link_a == kUnlinked && !chain(LinkSide::A, 1)) return nullptr;
    if (side_of_slot(s) == LinkSide::BC && lm.link_bc == kUnlinked && !chain(LinkSide::BC, 2)) return nullptr;
    return idx.slot_at(b, s, lm);
  }

  /// Gives a TryInsert slot back. Abandoned if the bin started a transfer;
  /// the transfer ignores TryInsert slots.
  static void release_slot(Index& idx, std::size_t b, unsigned s) noexcept {
    std::uint64_t cur = Sync::load_acquire(idx.bin(b).header);
    for (;;) {
      const HeaderWord h{cur};
      if (h.bin_state() != BinState::NoTransfer) return;
      if (Sync::cas(idx.bin(b).header, cur, h.with_slot(s, SlotState::Invalid).bits())) return;
    }
  }

  static OpResult get(TableCore& c, const Key& k) noexcept {
    Index* idx = c.index();
    for (;;) {
      const std::size_t b = idx->bin_for_hash(k.hash);
      const HeaderWord h = settled_header(*idx, b);
      if (h.bin_state() == BinState::DoneTransfer) {
        idx = idx->next.load(std::memory_order_acquire);
        continue;
      }
      Hit hit;
      const Scan r = scan(c, *idx, b, h, h.pair_mask(SlotState::Valid), k, hit);
      if (r == Scan::Retry) continue;
      if (r == Scan::Hit) return OpResult{Status::Found, hit.value, hit.key};
      if (moved_since(*idx, b)) continue;
      return OpResult{Status::NotFound};
    }
  }

  static OpResult insert(TableCore& c, ThreadCell& cell, const Key& k, std::uint64_t value,
                         std::span<const std::byte> value_bytes, bool shadow);
  static OpResult erase(TableCore& c, ThreadCell& cell, const Key& k);
  static OpResult put(TableCore& c, const Key& k, std::uint64_t value) noexcept;
  static OpResult finalize(TableCore& c, ThreadCell& cell, const Key& k, Decision d);

  // Resize.
  static Status trigger_resize(TableCore& c, ThreadCell& cell, Index* from, ResizeCause cause);
  static void help_transfer(TableCore& c, Index& from);
  static void transfer_chunk(TableCore& c, Index& from, Index& to, std::size_t chunk);
  static void transfer_bin(TableCore& c, Index& from, Index& to, std::size_t b);
  static void transfer_insert(Index& to, std::uint64_t hash, const Slot& pair, SlotState state);
  static void finish_resize(TableCore& c, Index& from);

  // Weak iteration.
  template <class Visit>
  static void visit_bin(Index& idx, std::size_t b, Visit&& visit);
};

}  // namespace dlht::detail
