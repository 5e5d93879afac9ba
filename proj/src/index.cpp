#include "dlht/index.hpp"

#include <sys/mman.h>
#include <sys/syscall.h>
#include <unistd.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <new>
#include <stdexcept>
#include <string>

namespace dlht {
namespace {

constexpr std::size_t kHugePage = std::size_t{2} << 20;
constexpr int kMpolInterleave = 3;

// Highest online NUMA node, parsed from "0" or "0-3" style lists.
int max_online_node() {
  std::ifstream in("/sys/devices/system/node/online");
  std::string line;
  if (!in || !std::getline(in, line) || line.empty()) return 0;
  const auto last = line.find_last_of("-,");
  return std::stoi(last == std::string::npos ? line : line.substr(last + 1));
}

void interleave_pages(void* p, std::size_t bytes) {
  const int top = max_online_node();
  if (top <= 0 || top >= 64) return;
  const unsigned long nodemask = (top == 63) ? ~0ul : ((1ul << (top + 1)) - 1);
  // Best effort: a refusal just leaves the default first-touch policy.
  (void)syscall(SYS_mbind, p, bytes, kMpolInterleave, &nodemask, static_cast<unsigned long>(top + 2), 0u);
}

}  // namespace

MappedRegion::MappedRegion(std::size_t bytes, bool interleave) {
  if (bytes == 0) return;
  void* p = ::mmap(nullptr, bytes, PROT_READ | PROT_WRITE, MAP_PRIVATE | MAP_ANONYMOUS | MAP_NORESERVE, -1, 0);
  if (p == MAP_FAILED) throw std::bad_alloc();
  if (bytes >= kHugePage) (void)::madvise(p, bytes, MADV_HUGEPAGE);
  if (interleave) interleave_pages(p, bytes);
  data_ = p;
  size_ = bytes;
}

MappedRegion::~MappedRegion() {
  if (data_ != nullptr) ::munmap(data_, size_);
}

MappedRegion::MappedRegion(MappedRegion&& other) noexcept : data_{other.data_}, size_{other.size_} {
  other.data_ = nullptr;
  other.size_ = 0;
}

MappedRegion& MappedRegion::operator=(MappedRegion&& other) noexcept {
  if (this != &other) {
    if (data_ != nullptr) ::munmap(data_, size_);
    data_ = other.data_;
    size_ = other.size_;
    other.data_ = nullptr;
    other.size_ = 0;
  }
  return *this;
}

Index::Index(const IndexOptions& opts)
    : nbins_{opts.nbins},
      nlinks_{0},
      link_capacity_{0},
      mask_{opts.nbins - 1},
      link_ratio_{opts.link_ratio},
      hash_{opts.hash},
      generation_{opts.generation} {
  if (nbins_ < 16 || !std::has_single_bit(nbins_)) {
    throw std::invalid_argument("bin count must be a power of two >= 16");
  }
  if (link_ratio_ == 0) throw std::invalid_argument("link ratio must be positive");
  nlinks_ = nbins_ / link_ratio_;
  if (nlinks_ == 0) nlinks_ = 1;
  link_capacity_ = nlinks_ + opts.transfer_reserve;
  if (link_capacity_ >= kUnlinked) throw std::invalid_argument("link arena too large for 32-bit link indexes");

  bin_region_ = MappedRegion(nbins_ * sizeof(PrimaryBucket), opts.interleave);
  link_region_ = MappedRegion(link_capacity_ * sizeof(LinkBucket), opts.interleave);
  bins_ = static_cast<PrimaryBucket*>(bin_region_.data());
  links_ = static_cast<LinkBucket*>(link_region_.data());

  if (opts.zero_memory) {
    std::memset(bins_, 0, bin_region_.size());
    std::memset(links_, 0, nlinks_ * sizeof(LinkBucket));
  }
  // Fresh anonymous pages are zero: header = empty bin at version 0.
  for (std::size_t b = 0; b < nbins_; ++b) bins_[b].link_meta = kEmptyLinkMeta;
}

LinkMeta Index::link_meta(std::size_t b) const noexcept {
  auto& w = const_cast<std::uint64_t&>(bins_[b].link_meta);
  return unpack_link_meta(std::atomic_ref<std::uint64_t>(w).load(std::memory_order_acquire));
}

Slot* Index::slot_ref(std::size_t b, unsigned s) noexcept {
  return slot_at(b, s, s < kPrimarySlots ? LinkMeta{} : link_meta(b));
}

std::uint64_t Index::link_cursor() const noexcept {
  auto& w = const_cast<std::uint64_t&>(link_cursor_);
  return std::atomic_ref<std::uint64_t>(w).load(std::memory_order_relaxed);
}

std::optional<std::uint32_t> Index::allocate_links(unsigned count) noexcept {
  // Checking first keeps failed attempts from walking the cursor into the
  // transfer reserve; racing allocators overshoot by at most one request each.
  if (link_cursor() + count > nlinks_) return std::nullopt;
  const std::uint64_t first = std::atomic_ref<std::uint64_t>(link_cursor_).fetch_add(count, std::memory_order_relaxed);
  if (first + count > nlinks_) return std::nullopt;
  return static_cast<std::uint32_t>(first);
}

std::optional<std::uint32_t> Index::allocate_transfer_links(unsigned count) noexcept {
  const std::uint64_t first = std::atomic_ref<std::uint64_t>(link_cursor_).fetch_add(count, std::memory_order_relaxed);
  if (first + count > link_capacity_) return std::nullopt;
  return static_cast<std::uint32_t>(first);
}

ChainResult Index::chain_links(std::size_t b, LinkSide side, std::uint32_t link_index) noexcept {
  std::atomic_ref<std::uint64_t> word(bins_[b].link_meta);
  std::uint64_t cur = word.load(std::memory_order_acquire);
  for (;;) {
    LinkMeta lm = unpack_link_meta(cur);
    std::uint32_t& field = side == LinkSide::A ? lm.link_a : lm.link_bc;
    if (field != kUnlinked) return ChainResult{false, field};
    field = link_index;
    if (word.compare_exchange_weak(cur, pack_link_meta(lm), std::memory_order_acq_rel, std::memory_order_acquire)) {
      return ChainResult{true, link_index};
    }
  }
}

}  // namespace dlht
