#pragma once

/// Out-of-line records for Allocator mode.
///
/// Record layout:
///   [u32 key length | u32 value length]   only with variable sizes
///   [key bytes]                           only for keys longer than 8 bytes
///   [padding to the value alignment]
///   [value bytes]
///
/// The slot holding a record stores its address tagged with the key-size
/// nibble and the namespace (see wordcodec.hpp).

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>

namespace dlht {

/// Storage provider for records. Addresses it hands out must fit in 48 bits.
class RecordAllocator {
 public:
  virtual ~RecordAllocator() = default;
  virtual void* allocate(std::size_t size, std::size_t alignment) = 0;
  virtual void release(void* p, std::size_t size, std::size_t alignment) noexcept = 0;
};

/// Aligned operator new/delete.
class HeapRecordAllocator final : public RecordAllocator {
 public:
  void* allocate(std::size_t size, std::size_t alignment) override;
  void release(void* p, std::size_t size, std::size_t alignment) noexcept override;
};

[[nodiscard]] std::shared_ptr<RecordAllocator> default_record_allocator();

struct RecordLayout {
  bool variable_sizes = false;
  std::size_t key_size = 8;    // fixed-size mode only
  std::size_t value_size = 8;  // fixed-size mode only
  std::size_t value_alignment = 8;

  [[nodiscard]] std::size_t header_bytes() const noexcept { return variable_sizes ? 8 : 0; }
  [[nodiscard]] std::size_t alignment() const noexcept { return value_alignment < 8 ? 8 : value_alignment; }
  [[nodiscard]] std::size_t stored_key_bytes(std::size_t key_len) const noexcept { return key_len > 8 ? key_len : 0; }
  [[nodiscard]] std::size_t value_offset(std::size_t key_len) const noexcept;
  [[nodiscard]] std::size_t total_size(std::size_t key_len, std::size_t value_len) const noexcept;
  /// Throws std::invalid_argument when the sizes violate a fixed-size layout.
  void validate(std::size_t key_len, std::size_t value_len) const;
};

/// Borrowed view of a record (or of an inlined key plus its record).
/// key() may point into the view itself for inlined keys, so it is valid
/// only while the view is alive.
class RecordView {
 public:
  RecordView() = default;
  RecordView(std::byte* base, const RecordLayout& layout, std::uint64_t tagged, std::uint64_t slot_key) noexcept;

  [[nodiscard]] explicit operator bool() const noexcept { return base_ != nullptr; }
  [[nodiscard]] std::span<const std::byte> key() const noexcept;
  [[nodiscard]] std::span<std::byte> value() const noexcept { return {value_, value_len_}; }
  [[nodiscard]] std::size_t key_size() const noexcept { return key_len_; }
  [[nodiscard]] std::size_t value_size() const noexcept { return value_len_; }
  [[nodiscard]] std::uint16_t ns() const noexcept { return ns_; }
  [[nodiscard]] std::uint64_t tagged_word() const noexcept { return tagged_; }
  [[nodiscard]] std::byte* base() const noexcept { return base_; }

 private:
  std::byte* base_ = nullptr;
  std::byte* value_ = nullptr;
  const std::byte* stored_key_ = nullptr;
  std::size_t key_len_ = 0;
  std::size_t value_len_ = 0;
  std::uint64_t tagged_ = 0;
  std::uint16_t ns_ = 0;
  std::array<std::byte, 8> inline_key_{};
};

/// Allocates and fills a record; returns the tagged value word.
[[nodiscard]] std::uint64_t store_record(RecordAllocator& alloc, const RecordLayout& layout,
                                         std::span<const std::byte> key, std::span<const std::byte> value,
                                         std::uint16_t ns);

[[nodiscard]] RecordView read_record(const RecordLayout& layout, std::uint64_t tagged, std::uint64_t slot_key) noexcept;

/// Full-key equality against the key stored in an out-of-line record.
[[nodiscard]] bool record_key_equals(const RecordLayout& layout, std::uint64_t tagged,
                                     std::span<const std::byte> key) noexcept;

/// Key bytes held by a record (empty for inlined keys).
[[nodiscard]] std::span<const std::byte> record_key(const RecordLayout& layout, std::uint64_t tagged) noexcept;

void free_record(RecordAllocator& alloc, const RecordLayout& layout, std::uint64_t tagged) noexcept;

}  // namespace dlht
