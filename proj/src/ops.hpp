#pragma once

// Insert, delete, put and shadow finalization.

#include <stdexcept>

#include "core.hpp"

namespace dlht::detail {

template <class Sync>
OpResult Engine<Sync>::insert(TableCore& c, ThreadCell& cell, const Key& k, std::uint64_t value,
                              std::span<const std::byte> value_bytes, bool shadow) {
  const SlotState publish = shadow ? SlotState::Shadow : SlotState::Valid;
  Index* idx = c.index();
  for (;;) {
    const std::size_t b = idx->bin_for_hash(k.hash);
    PrimaryBucket& bucket = idx->bin(b);
    const HeaderWord h = settled_header(*idx, b);
    if (h.bin_state() == BinState::DoneTransfer) {
      idx = idx->next.load(std::memory_order_acquire);
      continue;
    }

    // Steps 1-2: an existing Valid or Shadow copy wins.
    Hit hit;
    const Scan r = scan(c, *idx, b, h, live_mask(h), k, hit);
    if (r == Scan::Retry) continue;
    if (r == Scan::Hit) return OpResult{Status::AlreadyPresent, hit.value, hit.key};

    // Step 3: first Invalid slot, or grow.
    const unsigned s = h.first(SlotState::Invalid);
    if (s == kSlotsPerBin) {
      if (trigger_resize(c, cell, idx, ResizeCause::BinFull) == Status::NoSpace) return OpResult{Status::NoSpace};
      idx = c.index();
      continue;
    }

    // Step 4: claim the slot, then fill it.
    std::uint64_t expected = h.bits();
    const HeaderWord claimed = h.with_slot(s, SlotState::TryInsert);
    if (!Sync::cas(bucket.header, expected, claimed.bits())) continue;

    Slot* slot = ensure_slot(*idx, b, s, false);
    if (slot == nullptr) {
      release_slot(*idx, b, s);
      if (trigger_resize(c, cell, idx, ResizeCause::LinksExhausted) == Status::NoSpace) {
        return OpResult{Status::NoSpace};
      }
      idx = c.index();
      continue;
    }
    std::uint64_t value_word = value;
    if (c.mode == Mode::Allocator) {
      try {
        value_word = store_record(*c.allocator, c.layout, k.bytes, value_bytes, k.ns);
      } catch (...) {
        release_slot(*idx, b, s);
        throw;
      }
    } else if (c.mode == Mode::HashSet) {
      value_word = 0;
    }
    Sync::store_relaxed(slot->key, k.word);
    Sync::store_relaxed(slot->value, value_word);

    // Step 5: publish. A failed CAS re-checks for a competing copy of the
    // key before trying again, so at most one copy ever becomes visible.
    std::uint64_t cur = claimed.bits();
    for (;;) {
      const HeaderWord now{cur};
      if (now.bin_state() != BinState::NoTransfer) {
        // The transfer skips TryInsert slots; retry against the next index.
        if (c.mode == Mode::Allocator) c.free_unpublished(value_word);
        break;
      }
      if (Sync::cas(bucket.header, cur, now.with_slot(s, publish).bits())) {
        return OpResult{Status::Inserted, value_word, k.word};
      }
      const HeaderWord seen{cur};
      if (seen.bin_state() != BinState::NoTransfer) continue;
      Hit other;
      const Scan again = scan(c, *idx, b, seen, live_mask(seen), k, other);
      if (again == Scan::Retry) {
        cur = Sync::load_acquire(bucket.header);
        continue;
      }
      if (again == Scan::Hit) {
        release_slot(*idx, b, s);
        if (c.mode == Mode::Allocator) c.free_unpublished(value_word);
        return OpResult{Status::AlreadyPresent, other.value, other.key};
      }
    }
  }
}

template <class Sync>
OpResult Engine<Sync>::erase(TableCore& c, ThreadCell& cell, const Key& k) {
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
    if (r == Scan::Miss) {
      if (moved_since(*idx, b)) continue;
      return OpResult{Status::NotFound};
    }
    std::uint64_t expected = h.bits();
    if (!Sync::cas(idx->bin(b).header, expected, h.with_slot(hit.slot, SlotState::Invalid).bits())) continue;
    if (c.mode == Mode::Allocator) c.retire_record(cell, hit.value);
    return OpResult{Status::Deleted, hit.value, hit.key};
  }
}

template <class Sync>
OpResult Engine<Sync>::put(TableCore& c, const Key& k, std::uint64_t value) noexcept {
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
    if (r == Scan::Miss) {
      if (moved_since(*idx, b)) continue;
      return OpResult{Status::NotFound};
    }
    // Fails if another put won or a transfer swapped in its reserved key.
    Slot expected{hit.key, hit.value};
    if (!Sync::dwcas(*hit.where, expected, Slot{hit.key, value})) continue;
    // A delete that slipped in between the scan and the swap wins; the
    // write then landed in a dead slot and the put starts over.
    if (header(*idx, b).slot(hit.slot) != SlotState::Valid) continue;
    return OpResult{Status::Updated, hit.value, hit.key};
  }
}

template <class Sync>
OpResult Engine<Sync>::finalize(TableCore& c, ThreadCell& cell, const Key& k, Decision d) {
  const SlotState target = d == Decision::Commit ? SlotState::Valid : SlotState::Invalid;
  Index* idx = c.index();
  for (;;) {
    const std::size_t b = idx->bin_for_hash(k.hash);
    const HeaderWord h = settled_header(*idx, b);
    if (h.bin_state() == BinState::DoneTransfer) {
      idx = idx->next.load(std::memory_order_acquire);
      continue;
    }
    Hit hit;
    const Scan r = scan(c, *idx, b, h, h.pair_mask(SlotState::Shadow), k, hit);
    if (r == Scan::Retry) continue;
    if (r == Scan::Miss) {
      if (moved_since(*idx, b)) continue;
      return OpResult{Status::NotFound};
    }
    std::uint64_t expected = h.bits();
    if (!Sync::cas(idx->bin(b).header, expected, h.with_slot(hit.slot, target).bits())) continue;
    if (d == Decision::Abort && c.mode == Mode::Allocator) c.retire_record(cell, hit.value);
    return OpResult{Status::Done, hit.value, hit.key};
  }
}

template <class Sync>
template <class Visit>
void Engine<Sync>::visit_bin(Index& idx, std::size_t b, Visit&& visit) {
  std::uint64_t keys[kSlotsPerBin];
  std::uint64_t values[kSlotsPerBin];
  for (;;) {
    const HeaderWord h = settled_header(idx, b);
    if (h.bin_state() == BinState::DoneTransfer) {
      Index& next = *idx.next.load(std::memory_order_acquire);
      for (std::size_t nb = b; nb < next.nbins(); nb += idx.nbins()) visit_bin(next, nb, visit);
      return;
    }
    std::uint64_t mask = h.pair_mask(SlotState::Valid);
    const LinkMeta lm =
        mask >> (2 * kPrimarySlots) ? idx.link_meta(b) : LinkMeta{kUnlinked, kUnlinked};
    unsigned n = 0;
    for (; mask != 0; mask &= mask - 1) {
      Slot* p = idx.slot_at(b, static_cast<unsigned>(std::countr_zero(mask)) / 2, lm);
      if (p == nullptr) continue;
      keys[n] = Sync::load_relaxed(p->key);
      values[n] = Sync::load_relaxed(p->value);
      ++n;
    }
    Sync::read_fence();
    if (Sync::load_relaxed(idx.bin(b).header) != h.bits()) continue;
    for (unsigned i = 0; i < n; ++i) visit(keys[i], values[i]);
    return;
  }
}

}  // namespace dlht::detail
