#include "core.hpp"

#include <bit>
#include <stdexcept>

namespace dlht::detail {
namespace {

std::atomic<std::uint64_t> next_table_uid{1};

std::size_t round_bins(std::size_t n) {
  if (n < 16) n = 16;
  return std::bit_ceil(n);
}

}  // namespace

std::size_t transfer_reserve(std::size_t old_nbins, std::size_t max_threads) noexcept {
  return 3 * old_nbins + 2 * max_threads + 64;
}

TableCore::TableCore(Config config)
    : cfg{std::move(config)},
      mode{cfg.mode},
      hash{cfg.hash},
      single{cfg.single_thread},
      uid{next_table_uid.fetch_add(1, std::memory_order_relaxed)} {
  if (cfg.link_ratio == 0) throw std::invalid_argument("link ratio must be positive");
  if (cfg.max_threads == 0) throw std::invalid_argument("max_threads must be positive");
  if (cfg.initial_bins > (std::size_t{1} << 40)) throw std::invalid_argument("initial bin count too large");
  cfg.initial_bins = round_bins(cfg.initial_bins);
  if (cfg.max_bins < cfg.initial_bins) cfg.max_bins = cfg.initial_bins;

  if (mode == Mode::Allocator) {
    if (!std::has_single_bit(cfg.layout.value_alignment)) {
      throw std::invalid_argument("value alignment must be a power of two");
    }
    allocator = cfg.allocator ? cfg.allocator : default_record_allocator();
  }
  layout = cfg.layout;

  // Walk down from the top of the key space until both hash parities are
  // covered. With the identity hash this stops at 2^64-1 and 2^64-2.
  bool have_odd = false;
  bool have_even = false;
  for (std::uint64_t k = ~std::uint64_t{0}; !(have_odd && have_even); --k) {
    if (hash_word(k, hash) & 1) {
      if (!have_odd) key_for_even_bins = k;
      have_odd = true;
    } else {
      if (!have_even) key_for_odd_bins = k;
      have_even = true;
    }
  }

  auto alloc = allocator;
  const RecordLayout lay = layout;
  registry = std::make_shared<ThreadRegistry>(single ? 1 : cfg.max_threads, [alloc, lay](std::uint64_t tagged) {
    if (alloc) free_record(*alloc, lay, tagged);
  });
  if (single) solo_cell = &registry->acquire();

  IndexOptions opts;
  opts.nbins = cfg.initial_bins;
  opts.link_ratio = cfg.link_ratio;
  opts.hash = hash;
  opts.zero_memory = cfg.zero_memory;
  opts.interleave = cfg.interleave;
  opts.generation = 1;
  live_index = std::make_unique<Index>(opts);
  publish_index(live_index.get());
}

TableCore::~TableCore() {
  if (mode == Mode::Allocator && live_index) {
    // The table owns the records still reachable from it.
    Index& idx = *live_index;
    for (std::size_t b = 0; b < idx.nbins(); ++b) {
      const HeaderWord h{idx.bin(b).header};
      std::uint64_t mask = h.pair_mask(SlotState::Valid) | h.pair_mask(SlotState::Shadow);
      const LinkMeta lm = idx.link_meta(b);
      for (; mask != 0; mask &= mask - 1) {
        const Slot* p = idx.slot_at(b, static_cast<unsigned>(std::countr_zero(mask)) / 2, lm);
        if (p != nullptr) free_record(*allocator, layout, p->value);
      }
    }
  }
  registry->release_all();
  if (solo_cell != nullptr) registry->release(*solo_cell);
}

void TableCore::try_reclaim() {
  if (retired_count.load(std::memory_order_acquire) == 0) return;
  std::unique_lock lock(index_mutex, std::try_to_lock);
  if (!lock.owns_lock()) return;
  // A cell announcing g protects every generation >= g.
  std::uint64_t oldest_in_use;
  if (single) {
    oldest_in_use = solo_cell->depth > 0 ? 1 : 0;
  } else {
    oldest_in_use = registry->min_announced();
  }
  while (!retired_indexes.empty()) {
    const std::uint64_t g = retired_indexes.front()->generation();
    if (oldest_in_use != 0 && oldest_in_use <= g) break;
    retired_indexes.pop_front();
    retired_count.fetch_sub(1, std::memory_order_release);
  }
}

}  // namespace dlht::detail
