#include "dlht/table.hpp"

#include <stdexcept>

#include "core.hpp"
#include "ops.hpp"
#include "resize_engine.hpp"

namespace dlht {

namespace detail {
template struct Engine<AtomicSync>;
template struct Engine<PlainSync>;
}  // namespace detail

using detail::AtomicSync;
using detail::Engine;
using detail::Key;
using detail::PlainSync;
using detail::TableCore;

namespace {

class Session {
 public:
  Session(TableCore& c, ThreadCell& cell) noexcept : c_{c}, cell_{cell} { c_.enter(cell_); }
  ~Session() { c_.exit(cell_); }
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

 private:
  TableCore& c_;
  ThreadCell& cell_;
};

/// Runs fn(engine, cell) with the engine matching the table's threading
/// mode. Single-thread tables skip the announcement.
template <class Fn>
OpResult run(TableCore& c, Fn&& fn) {
  if (c.single) return fn(Engine<PlainSync>{}, *c.solo_cell);
  ThreadCell& cell = c.cell();
  Session session(c, cell);
  return fn(Engine<AtomicSync>{}, cell);
}

void require_word_mode(const TableCore& c) {
  if (c.mode == Mode::Allocator) throw std::logic_error("64-bit key API is not available in Allocator mode");
}

void require_allocator_mode(const TableCore& c) {
  if (c.mode != Mode::Allocator) throw std::logic_error("byte-string key API requires Allocator mode");
}

void check_insert_key(const TableCore& c, std::uint64_t key) {
  if (c.reserved(key)) throw std::invalid_argument("key is reserved for resize transfers");
}

void check_bytes_key(std::span<const std::byte> key, std::uint16_t ns) {
  if (key.empty()) throw std::invalid_argument("empty key");
  if (ns > kMaxNamespace) throw std::invalid_argument("namespace out of range");
}

bool is_failure(Status s) noexcept {
  return s == Status::NotFound || s == Status::AlreadyPresent || s == Status::Invalid || s == Status::NoSpace;
}

}  // namespace

Table::Table(Config config) : core_{std::make_unique<TableCore>(std::move(config))} {}

Table::~Table() = default;

OpResult Table::get(std::uint64_t key) {
  TableCore& c = *core_;
  require_word_mode(c);
  const Key k = c.make_key(key);
  return run(c, [&](auto e, ThreadCell&) { return decltype(e)::get(c, k); });
}

OpResult Table::insert(std::uint64_t key, std::uint64_t value) {
  TableCore& c = *core_;
  require_word_mode(c);
  check_insert_key(c, key);
  const Key k = c.make_key(key);
  return run(c, [&](auto e, ThreadCell& cell) { return decltype(e)::insert(c, cell, k, value, {}, false); });
}

OpResult Table::shadow_insert(std::uint64_t key, std::uint64_t value) {
  TableCore& c = *core_;
  require_word_mode(c);
  check_insert_key(c, key);
  const Key k = c.make_key(key);
  return run(c, [&](auto e, ThreadCell& cell) { return decltype(e)::insert(c, cell, k, value, {}, true); });
}

OpResult Table::finalize_shadow(std::uint64_t key, Decision decision) {
  TableCore& c = *core_;
  require_word_mode(c);
  const Key k = c.make_key(key);
  return run(c, [&](auto e, ThreadCell& cell) { return decltype(e)::finalize(c, cell, k, decision); });
}

OpResult Table::erase(std::uint64_t key) {
  TableCore& c = *core_;
  require_word_mode(c);
  const Key k = c.make_key(key);
  return run(c, [&](auto e, ThreadCell& cell) { return decltype(e)::erase(c, cell, k); });
}

OpResult Table::put(std::uint64_t key, std::uint64_t value) {
  TableCore& c = *core_;
  if (c.mode != Mode::Inlined) throw std::logic_error("put is only available in Inlined mode");
  const Key k = c.make_key(key);
  return run(c, [&](auto e, ThreadCell&) { return decltype(e)::put(c, k, value); });
}

OpResult Table::get(std::span<const std::byte> key, std::uint16_t ns) {
  TableCore& c = *core_;
  require_allocator_mode(c);
  check_bytes_key(key, ns);
  const Key k = c.make_key(key, ns);
  return run(c, [&](auto e, ThreadCell&) { return decltype(e)::get(c, k); });
}

OpResult Table::insert(std::span<const std::byte> key, std::span<const std::byte> value, std::uint16_t ns) {
  TableCore& c = *core_;
  require_allocator_mode(c);
  check_bytes_key(key, ns);
  c.layout.validate(key.size(), value.size());
  const Key k = c.make_key(key, ns);
  return run(c, [&](auto e, ThreadCell& cell) { return decltype(e)::insert(c, cell, k, 0, value, false); });
}

OpResult Table::shadow_insert(std::span<const std::byte> key, std::span<const std::byte> value, std::uint16_t ns) {
  TableCore& c = *core_;
  require_allocator_mode(c);
  check_bytes_key(key, ns);
  c.layout.validate(key.size(), value.size());
  const Key k = c.make_key(key, ns);
  return run(c, [&](auto e, ThreadCell& cell) { return decltype(e)::insert(c, cell, k, 0, value, true); });
}

OpResult Table::finalize_shadow(std::span<const std::byte> key, Decision decision, std::uint16_t ns) {
  TableCore& c = *core_;
  require_allocator_mode(c);
  check_bytes_key(key, ns);
  const Key k = c.make_key(key, ns);
  return run(c, [&](auto e, ThreadCell& cell) { return decltype(e)::finalize(c, cell, k, decision); });
}

OpResult Table::erase(std::span<const std::byte> key, std::uint16_t ns) {
  TableCore& c = *core_;
  require_allocator_mode(c);
  check_bytes_key(key, ns);
  const Key k = c.make_key(key, ns);
  return run(c, [&](auto e, ThreadCell& cell) { return decltype(e)::erase(c, cell, k); });
}

RecordView Table::record(const OpResult& r) const noexcept {
  if (core_->mode != Mode::Allocator || r.status == Status::NotFound || r.status == Status::NotExecuted ||
      r.status == Status::Invalid || r.status == Status::NoSpace) {
    return {};
  }
  return read_record(core_->layout, r.value, r.key_word);
}

RecordView Table::record(std::uint64_t key_word, std::uint64_t value_word) const noexcept {
  if (core_->mode != Mode::Allocator) return {};
  return read_record(core_->layout, value_word, key_word);
}

void Table::release_record(const OpResult& r) {
  if (core_->mode != Mode::Allocator) throw std::logic_error("records exist only in Allocator mode");
  if (core_->cfg.reclamation) throw std::logic_error("reclamation is on; the table releases records itself");
  if (r.status != Status::Deleted && r.status != Status::Done) {
    throw std::invalid_argument("only records returned by erase or an aborted shadow insert can be released");
  }
  free_record(*core_->allocator, core_->layout, r.value);
}

// ---------------------------------------------------------------------------
// Batches

namespace {

struct Prepared {
  Key key;
  bool valid = true;
};

Prepared prepare(const TableCore& c, const BatchRequest& r) {
  Prepared p;
  if (c.mode == Mode::Allocator) {
    if (r.key_bytes.empty() || r.ns > kMaxNamespace || r.op == OpKind::Put) {
      p.valid = false;
      return p;
    }
    if (r.op == OpKind::Insert || r.op == OpKind::ShadowInsert) {
      try {
        c.layout.validate(r.key_bytes.size(), r.value_bytes.size());
      } catch (const std::invalid_argument&) {
        p.valid = false;
        return p;
      }
    }
    p.key = c.make_key(r.key_bytes, r.ns);
    return p;
  }
  if ((r.op == OpKind::Put && c.mode != Mode::Inlined) ||
      ((r.op == OpKind::Insert || r.op == OpKind::ShadowInsert) && c.reserved(r.key))) {
    p.valid = false;
    return p;
  }
  p.key = c.make_key(r.key);
  return p;
}

template <class Sync>
OpResult execute_one(TableCore& c, ThreadCell& cell, const BatchRequest& r, const Key& k) {
  using E = Engine<Sync>;
  switch (r.op) {
    case OpKind::Get:
      return E::get(c, k);
    case OpKind::Put:
      return E::put(c, k, r.value);
    case OpKind::Insert:
      return E::insert(c, cell, k, r.value, r.value_bytes, false);
    case OpKind::ShadowInsert:
      return E::insert(c, cell, k, r.value, r.value_bytes, true);
    case OpKind::Delete:
      return E::erase(c, cell, k);
    case OpKind::FinalizeShadow:
      return E::finalize(c, cell, k, r.decision);
  }
  return OpResult{Status::Invalid};
}

template <class Sync>
void run_batch(TableCore& c, ThreadCell& cell, std::span<const BatchRequest> requests, bool stop_on_failure,
               BatchOutcome& out) {
  thread_local std::vector<Prepared> prepared;
  prepared.resize(requests.size());

  // Phase 1: hash every request and pull its bin toward the core.
  const Index* idx = c.index();
  for (std::size_t i = 0; i < requests.size(); ++i) {
    prepared[i] = prepare(c, requests[i]);
    if (!prepared[i].valid) continue;
    const PrimaryBucket* bin = &const_cast<Index*>(idx)->bin(idx->bin_for_hash(prepared[i].key.hash));
    if (requests[i].op == OpKind::Get) {
      detail::prefetch_read(bin);
    } else {
      detail::prefetch_write(bin);
    }
  }

  // Phase 2: execute strictly in order.
  for (std::size_t i = 0; i < requests.size(); ++i) {
    if constexpr (Sync::kConcurrent) {
      if (cell.announced.load(std::memory_order_relaxed) != c.current_gen.load(std::memory_order_relaxed)) {
        c.reannounce(cell);
      }
    }
    OpResult r = prepared[i].valid ? execute_one<Sync>(c, cell, requests[i], prepared[i].key)
                                   : OpResult{Status::Invalid};
    out.results[i] = r;
    ++out.executed;
    if (is_failure(r.status)) {
      out.success = false;
      if (stop_on_failure) {
        for (std::size_t j = i + 1; j < requests.size(); ++j) out.results[j] = OpResult{Status::NotExecuted};
        return;
      }
    }
  }
}

}  // namespace

BatchOutcome Table::execute_batch(std::span<const BatchRequest> requests, bool stop_on_failure) {
  BatchOutcome out;
  execute_batch(requests, out, stop_on_failure);
  return out;
}

void Table::execute_batch(std::span<const BatchRequest> requests, BatchOutcome& out, bool stop_on_failure) {
  TableCore& c = *core_;
  out.results.resize(requests.size());
  out.executed = 0;
  out.success = true;
  if (requests.empty()) return;
  if (c.single) {
    run_batch<PlainSync>(c, *c.solo_cell, requests, stop_on_failure, out);
    return;
  }
  ThreadCell& cell = c.cell();
  Session session(c, cell);
  run_batch<AtomicSync>(c, cell, requests, stop_on_failure, out);
}

void Table::prefetch(std::uint64_t key) const noexcept {
  const TableCore& c = *core_;
  const auto bins = reinterpret_cast<std::uintptr_t>(c.hint_bins.load(std::memory_order_relaxed));
  const std::uint64_t mask = c.hint_mask.load(std::memory_order_relaxed);
  const std::uint64_t b = hash_word(key, c.hash) & mask;
  detail::prefetch_read(reinterpret_cast<const void*>(bins + b * sizeof(PrimaryBucket)));
}

void Table::prefetch(std::span<const std::byte> key) const noexcept {
  const TableCore& c = *core_;
  const auto bins = reinterpret_cast<std::uintptr_t>(c.hint_bins.load(std::memory_order_relaxed));
  const std::uint64_t mask = c.hint_mask.load(std::memory_order_relaxed);
  const std::uint64_t b = hash_bytes(key, c.hash) & mask;
  detail::prefetch_read(reinterpret_cast<const void*>(bins + b * sizeof(PrimaryBucket)));
}

// ---------------------------------------------------------------------------
// Iteration, growth, introspection

void Table::iterate_weak(const std::function<void(std::uint64_t key, std::uint64_t value)>& visit) {
  TableCore& c = *core_;
  ThreadCell& cell = c.cell();
  Session session(c, cell);
  Index* idx = c.index();
  for (std::size_t b = 0; b < idx->nbins(); ++b) {
    if (c.single) {
      Engine<PlainSync>::visit_bin(*idx, b, visit);
    } else {
      Engine<AtomicSync>::visit_bin(*idx, b, visit);
    }
  }
}

Status Table::grow() {
  TableCore& c = *core_;
  if (!c.cfg.resize) throw std::logic_error("resizing is disabled for this table");
  const OpResult r = run(c, [&](auto e, ThreadCell& cell) {
    return OpResult{decltype(e)::trigger_resize(c, cell, c.index(), ResizeCause::Manual)};
  });
  return r.status;
}

std::vector<ResizeRecord> Table::resize_history() const {
  std::lock_guard lock(core_->history_mutex);
  return core_->history;
}

bool Table::resizing() const noexcept {
  return core_->resizes_in_flight.load(std::memory_order_acquire) != 0;
}

TableStats Table::stats() const {
  TableCore& c = *core_;
  TableStats s;
  {
    // Indexes are freed only under this mutex and the live one never is.
    std::lock_guard lock(c.index_mutex);
    const Index* idx = c.live_index.get();
    s.nbins = idx->nbins();
    s.nlinks = idx->nlinks();
    s.links_used = std::min<std::uint64_t>(idx->link_cursor(), idx->link_capacity());
    s.generation = idx->generation();
  }
  {
    std::lock_guard lock(c.history_mutex);
    s.resizes = c.history.size();
  }
  s.pending_indexes = c.retired_count.load(std::memory_order_acquire);
  s.global_epoch = c.registry->global_epoch();
  s.records_released = c.registry->released_count();
  s.records_pending = c.registry->pending_count();
  return s;
}

AuditReport Table::audit() const {
  const TableCore& c = *core_;
  Index& idx = *c.index();
  AuditReport rep;
  rep.bins = idx.nbins();
  struct Entry {
    std::uint64_t key;
    std::uint64_t value;
  };
  Entry live[kSlotsPerBin];
  for (std::size_t b = 0; b < idx.nbins(); ++b) {
    const HeaderWord h{idx.bin(b).header};
    if (h.bin_state() != BinState::NoTransfer) ++rep.bins_not_idle;
    const LinkMeta lm = idx.link_meta(b);
    if (lm.link_bc != kUnlinked && lm.link_a == kUnlinked) ++rep.link_order_violations;
    unsigned n = 0;
    for (unsigned s = 0; s < kSlotsPerBin; ++s) {
      const SlotState st = h.slot(s);
      if (st == SlotState::Invalid) continue;
      const Slot* p = idx.slot_at(b, s, lm);
      if (p == nullptr) {
        ++rep.unreachable_slots;
        continue;
      }
      if (st == SlotState::TryInsert) {
        ++rep.try_insert;
        continue;
      }
      (st == SlotState::Valid ? rep.live : rep.shadow) += 1;
      if (idx.bin_for_hash(c.slot_hash(p->key, p->value)) != b) ++rep.misplaced_keys;
      live[n++] = Entry{p->key, p->value};
    }
    for (unsigned i = 0; i < n; ++i) {
      for (unsigned j = i + 1; j < n; ++j) {
        if (live[i].key != live[j].key) continue;
        bool same = true;
        if (c.mode == Mode::Allocator) {
          const TaggedValue a = untag_address(live[i].value);
          const TaggedValue d = untag_address(live[j].value);
          same = a.ns == d.ns && a.key_size == d.key_size &&
                 (a.key_size != 0 || record_key_equals(c.layout, live[j].value, record_key(c.layout, live[i].value)));
        }
        if (same) ++rep.duplicate_keys;
      }
    }
  }
  return rep;
}

std::size_t Table::size() const {
  std::size_t n = 0;
  const_cast<Table*>(this)->iterate_weak([&](std::uint64_t, std::uint64_t) { ++n; });
  return n;
}

void Table::advance_epoch() {
  TableCore& c = *core_;
  c.registry->advance(c.cell());
}

void Table::unregister_thread() {
  if (!core_->single) forget_thread_cell(core_->uid);
}

std::uint64_t Table::thread_enter_count() { return core_->cell().enter_count.load(std::memory_order_relaxed); }

Table::Scope::Scope(TableCore* core) : core_{core} { core_->enter(core_->cell()); }

Table::Scope::Scope(Scope&& other) noexcept : core_{other.core_} { other.core_ = nullptr; }

Table::Scope::~Scope() {
  if (core_ != nullptr) core_->exit(core_->cell());
}

Table::Scope Table::enter() { return Scope(core_.get()); }

Mode Table::mode() const noexcept { return core_->mode; }

bool Table::single_thread() const noexcept { return core_->single; }

std::pair<std::uint64_t, std::uint64_t> Table::reserved_keys() const noexcept {
  return {core_->key_for_even_bins, core_->key_for_odd_bins};
}

const char* to_string(Status s) noexcept {
  switch (s) {
    case Status::Found: return "Found";
    case Status::NotFound: return "NotFound";
    case Status::Inserted: return "Inserted";
    case Status::AlreadyPresent: return "AlreadyPresent";
    case Status::Deleted: return "Deleted";
    case Status::Updated: return "Updated";
    case Status::Done: return "Done";
    case Status::NotExecuted: return "NotExecuted";
    case Status::Invalid: return "Invalid";
    case Status::NoSpace: return "NoSpace";
  }
  return "?";
}

const char* to_string(ResizeCause c) noexcept {
  switch (c) {
    case ResizeCause::BinFull: return "bin-full";
    case ResizeCause::LinksExhausted: return "links-exhausted";
    case ResizeCause::Manual: return "manual";
  }
  return "?";
}

}  // namespace dlht
