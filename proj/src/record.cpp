#include "dlht/record.hpp"

#include <cstring>
#include <new>
#include <stdexcept>

#include "dlht/wordcodec.hpp"

namespace dlht {
namespace {

std::size_t align_up(std::size_t n, std::size_t a) { return (n + a - 1) / a * a; }

struct SizeHeader {
  std::uint32_t key_len;
  std::uint32_t value_len;
};

std::byte* address_of(std::uint64_t tagged) noexcept {
  return reinterpret_cast<std::byte*>(static_cast<std::uintptr_t>(untag_address(tagged).address));
}

// Key and value lengths of the record behind `tagged`.
SizeHeader sizes_of(const RecordLayout& layout, std::uint64_t tagged) noexcept {
  const TaggedValue tv = untag_address(tagged);
  if (layout.variable_sizes) {
    SizeHeader h;
    std::memcpy(&h, address_of(tagged), sizeof h);
    return h;
  }
  const std::size_t key_len = tv.key_size != 0 ? tv.key_size : layout.key_size;
  return SizeHeader{static_cast<std::uint32_t>(key_len), static_cast<std::uint32_t>(layout.value_size)};
}

}  // namespace

void* HeapRecordAllocator::allocate(std::size_t size, std::size_t alignment) {
  return ::operator new(size, std::align_val_t{alignment});
}

void HeapRecordAllocator::release(void* p, std::size_t, std::size_t alignment) noexcept {
  ::operator delete(p, std::align_val_t{alignment});
}

std::shared_ptr<RecordAllocator> default_record_allocator() {
  static const std::shared_ptr<RecordAllocator> instance = std::make_shared<HeapRecordAllocator>();
  return instance;
}

std::size_t RecordLayout::value_offset(std::size_t key_len) const noexcept {
  return align_up(header_bytes() + stored_key_bytes(key_len), alignment());
}

std::size_t RecordLayout::total_size(std::size_t key_len, std::size_t value_len) const noexcept {
  const std::size_t n = value_offset(key_len) + value_len;
  return n == 0 ? alignment() : align_up(n, alignment());
}

void RecordLayout::validate(std::size_t key_len, std::size_t value_len) const {
  if (key_len == 0) throw std::invalid_argument("empty key");
  if (variable_sizes) {
    if (key_len > UINT32_MAX || value_len > UINT32_MAX) throw std::invalid_argument("key or value too large");
    return;
  }
  if (key_len != key_size) throw std::invalid_argument("key size differs from the configured fixed size");
  if (value_len != value_size) throw std::invalid_argument("value size differs from the configured fixed size");
}

RecordView::RecordView(std::byte* base, const RecordLayout& layout, std::uint64_t tagged,
                       std::uint64_t slot_key) noexcept
    : base_{base}, tagged_{tagged} {
  const TaggedValue tv = untag_address(tagged);
  const SizeHeader sz = sizes_of(layout, tagged);
  ns_ = tv.ns;
  key_len_ = sz.key_len;
  value_len_ = sz.value_len;
  value_ = base + layout.value_offset(key_len_);
  if (tv.key_size == 0) {
    stored_key_ = base + layout.header_bytes();
  } else {
    std::memcpy(inline_key_.data(), &slot_key, sizeof slot_key);
  }
}

std::span<const std::byte> RecordView::key() const noexcept {
  if (stored_key_ != nullptr) return {stored_key_, key_len_};
  return {inline_key_.data(), key_len_};
}

std::uint64_t store_record(RecordAllocator& alloc, const RecordLayout& layout, std::span<const std::byte> key,
                           std::span<const std::byte> value, std::uint16_t ns) {
  layout.validate(key.size(), value.size());
  const std::size_t bytes = layout.total_size(key.size(), value.size());
  auto* base = static_cast<std::byte*>(alloc.allocate(bytes, layout.alignment()));
  const auto addr = reinterpret_cast<std::uintptr_t>(base);
  if (addr > kAddressMask) {
    alloc.release(base, bytes, layout.alignment());
    throw std::invalid_argument("allocator returned an address above 48 bits");
  }
  if (layout.variable_sizes) {
    const SizeHeader h{static_cast<std::uint32_t>(key.size()), static_cast<std::uint32_t>(value.size())};
    std::memcpy(base, &h, sizeof h);
  }
  if (key.size() > 8) std::memcpy(base + layout.header_bytes(), key.data(), key.size());
  if (!value.empty()) std::memcpy(base + layout.value_offset(key.size()), value.data(), value.size());
  const unsigned nibble = key.size() > 8 ? 0u : static_cast<unsigned>(key.size());
  return tag_address(addr, nibble, ns);
}

RecordView read_record(const RecordLayout& layout, std::uint64_t tagged, std::uint64_t slot_key) noexcept {
  return RecordView(address_of(tagged), layout, tagged, slot_key);
}

std::span<const std::byte> record_key(const RecordLayout& layout, std::uint64_t tagged) noexcept {
  if (untag_address(tagged).key_size != 0) return {};
  const SizeHeader sz = sizes_of(layout, tagged);
  return {address_of(tagged) + layout.header_bytes(), sz.key_len};
}

bool record_key_equals(const RecordLayout& layout, std::uint64_t tagged, std::span<const std::byte> key) noexcept {
  const auto stored = record_key(layout, tagged);
  return stored.size() == key.size() && std::memcmp(stored.data(), key.data(), key.size()) == 0;
}

void free_record(RecordAllocator& alloc, const RecordLayout& layout, std::uint64_t tagged) noexcept {
  const SizeHeader sz = sizes_of(layout, tagged);
  alloc.release(address_of(tagged), layout.total_size(sz.key_len, sz.value_len), layout.alignment());
}

}  // namespace dlht
