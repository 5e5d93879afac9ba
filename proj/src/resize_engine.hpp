#pragma once

// Cooperative resize: one thread allocates the next index, every thread
// that runs into the full index helps move 16K-bin chunks, and whoever
// finishes the last chunk publishes the new index.

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "core.hpp"

namespace dlht::detail {

inline std::uint64_t now_ns() noexcept {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
          .count());
}

template <class Sync>
Status Engine<Sync>::trigger_resize(TableCore& c, ThreadCell& cell, Index* from, ResizeCause cause) {
  using Phase = Index::ResizePhase;
  if (!c.cfg.resize) return Status::NoSpace;

  Index* cur = c.index();
  if (from->generation() < cur->generation()) {
    c.reannounce(cell);
    return Status::Done;
  }
  if (from != cur) {
    // `from` is the index being filled by an in-flight resize of `cur`.
    help_transfer(c, *cur);
    c.reannounce(cell);
    return Status::Done;
  }

  bool resizer = false;
  Phase phase = from->resize_phase.load(std::memory_order_acquire);
  if (phase == Phase::Idle) {
    const unsigned factor = growth_factor(from->nbins());
    if (from->nbins() * factor > c.cfg.max_bins) return Status::NoSpace;
    if (from->resize_phase.compare_exchange_strong(phase, Phase::Allocating, std::memory_order_acq_rel)) {
      resizer = true;
      c.resizes_in_flight.fetch_add(1, std::memory_order_acq_rel);
      from->resize_start_ns.store(now_ns(), std::memory_order_relaxed);
      from->resize_cause.store(static_cast<int>(cause), std::memory_order_relaxed);
      IndexOptions opts;
      opts.nbins = from->nbins() * factor;
      opts.link_ratio = from->link_ratio();
      opts.hash = from->hash_kind();
      opts.zero_memory = c.cfg.zero_memory;
      opts.interleave = c.cfg.interleave;
      opts.generation = from->generation() + 1;
      opts.transfer_reserve = transfer_reserve(from->nbins(), c.cfg.max_threads);
      try {
        from->next.store(new Index(opts), std::memory_order_release);
      } catch (const std::bad_alloc&) {
        from->resize_phase.store(Phase::Failed, std::memory_order_release);
        c.resizes_in_flight.fetch_sub(1, std::memory_order_acq_rel);
        return Status::NoSpace;
      }
      from->resize_phase.store(Phase::Transferring, std::memory_order_release);
    }
  }
  if (from->resize_phase.load(std::memory_order_acquire) == Phase::Failed) return Status::NoSpace;

  help_transfer(c, *from);
  c.reannounce(cell);
  if (resizer) {
    // Give lingering readers of the old generation a moment; whoever
    // leaves the table last releases it otherwise.
    Backoff backoff;
    for (int i = 0; i < 256 && c.retired_count.load(std::memory_order_acquire) != 0; ++i) {
      c.try_reclaim();
      backoff.pause();
    }
  }
  return Status::Done;
}

template <class Sync>
void Engine<Sync>::help_transfer(TableCore& c, Index& from) {
  using Phase = Index::ResizePhase;
  from.participants.fetch_add(1, std::memory_order_relaxed);
  Index* to = nullptr;
  Backoff wait_alloc;
  while ((to = from.next.load(std::memory_order_acquire)) == nullptr) {
    if (from.resize_phase.load(std::memory_order_acquire) == Phase::Failed) return;
    wait_alloc.pause();
  }
  const std::size_t nchunks = from.nchunks();
  for (;;) {
    const std::size_t chunk = from.chunk_cursor.fetch_add(1, std::memory_order_relaxed);
    if (chunk >= nchunks) break;
    transfer_chunk(c, from, *to, chunk);
    if (from.chunks_done.fetch_add(1, std::memory_order_acq_rel) + 1 == nchunks) finish_resize(c, from);
  }
  Backoff wait_done;
  while (from.resize_phase.load(std::memory_order_acquire) != Phase::Done) wait_done.pause();
}

template <class Sync>
void Engine<Sync>::transfer_chunk(TableCore& c, Index& from, Index& to, std::size_t chunk) {
  constexpr std::size_t kAhead = 4;
  const std::size_t lo = chunk * kChunkBins;
  const std::size_t hi = std::min(lo + kChunkBins, from.nbins());
  for (std::size_t b = lo; b < hi; ++b) {
    if (b + kAhead < hi) prefetch_write(&from.bin(b + kAhead));
    transfer_bin(c, from, to, b);
  }
}

template <class Sync>
void Engine<Sync>::transfer_bin(TableCore& c, Index& from, Index& to, std::size_t b) {
  PrimaryBucket& bucket = from.bin(b);
  std::uint64_t cur = Sync::load_acquire(bucket.header);
  for (;;) {
    const HeaderWord h{cur};
    if (h.bin_state() != BinState::NoTransfer) {
      from.duplicate_transfers.fetch_add(1, std::memory_order_relaxed);
      return;
    }
    if (Sync::cas(bucket.header, cur, h.with_bin(BinState::InTransfer).bits())) break;
  }
  // From here on no client CAS on this header can succeed.
  const HeaderWord h = HeaderWord{cur}.with_bin(BinState::InTransfer);
  std::uint64_t mask = live_mask(h);
  const LinkMeta lm = mask >> (2 * kPrimarySlots) ? from.link_meta(b) : LinkMeta{kUnlinked, kUnlinked};
  const bool replace = c.mode != Mode::Allocator;
  const std::uint64_t reserved = c.transfer_key_for(b);
  std::uint64_t moved = 0;
  for (; mask != 0; mask &= mask - 1) {
    const auto s = static_cast<unsigned>(std::countr_zero(mask)) / 2;
    Slot* p = from.slot_at(b, s, lm);
    if (p == nullptr) continue;
    Slot pair{Sync::load_relaxed(p->key), Sync::load_relaxed(p->value)};
    if (replace) {
      // A racing put either lands before the swap (and is carried over) or
      // fails against the reserved key and retries on the next index.
      while (!Sync::dwcas(*p, pair, Slot{reserved, pair.value})) {
      }
    }
    transfer_insert(to, c.slot_hash(pair.key, pair.value), pair, h.slot(s));
    ++moved;
  }
  Sync::store_release(bucket.header, h.with_bin(BinState::DoneTransfer).bits());
  from.transferred.fetch_add(moved, std::memory_order_relaxed);
}

template <class Sync>
void Engine<Sync>::transfer_insert(Index& to, std::uint64_t hash, const Slot& pair, SlotState state) {
  // Only the transferring thread writes this bin until the source bin is
  // DoneTransfer, so plain publication suffices.
  const std::size_t b = to.bin_for_hash(hash);
  PrimaryBucket& bucket = to.bin(b);
  const HeaderWord h{Sync::load_relaxed(bucket.header)};
  const unsigned s = h.first(SlotState::Invalid);
  Slot* p = s < kSlotsPerBin ? ensure_slot(to, b, s, true) : nullptr;
  if (p == nullptr) {
    std::fputs("dlht: transfer reserve exhausted\n", stderr);
    std::abort();
  }
  Sync::store_relaxed(p->key, pair.key);
  Sync::store_relaxed(p->value, pair.value);
  Sync::store_release(bucket.header, h.with_slot(s, state).bits());
}

template <class Sync>
void Engine<Sync>::finish_resize(TableCore& c, Index& from) {
  Index* to = from.next.load(std::memory_order_acquire);
  ResizeRecord rec;
  rec.from_bins = from.nbins();
  rec.to_bins = to->nbins();
  rec.factor = static_cast<unsigned>(to->nbins() / from.nbins());
  rec.cause = static_cast<ResizeCause>(from.resize_cause.load(std::memory_order_relaxed));
  rec.transferred = from.transferred.load(std::memory_order_relaxed);
  rec.occupancy = static_cast<double>(rec.transferred) / static_cast<double>(from.total_slots());
  rec.duration_ns = now_ns() - from.resize_start_ns.load(std::memory_order_relaxed);
  rec.participants = from.participants.load(std::memory_order_relaxed);
  rec.duplicate_transfers = from.duplicate_transfers.load(std::memory_order_relaxed);
  {
    std::lock_guard lock(c.history_mutex);
    c.history.push_back(rec);
  }
  {
    std::lock_guard lock(c.index_mutex);
    c.retired_indexes.push_back(std::move(c.live_index));
    c.live_index.reset(to);
    c.retired_count.fetch_add(1, std::memory_order_release);
  }
  c.publish_index(to);
  from.resize_phase.store(Index::ResizePhase::Done, std::memory_order_release);
  c.resizes_in_flight.fetch_sub(1, std::memory_order_acq_rel);
}

}  // namespace dlht::detail
