#pragma once

#include <cstdint>

namespace dlht {

enum class Status : std::uint8_t {
  Found,
  NotFound,
  Inserted,
  AlreadyPresent,
  Deleted,
  Updated,
  Done,
  NotExecuted,  // skipped after an earlier batch failure
  Invalid,      // request malformed for the table's mode
  NoSpace,      // growth needed but disabled or past the configured maximum
};

enum class Decision : std::uint8_t { Commit, Abort };

/// Result of one operation. `value` is the inlined value in Inlined mode
/// and the tagged record word in Allocator mode (see Table::record).
struct OpResult {
  Status status = Status::NotFound;
  std::uint64_t value = 0;
  std::uint64_t key_word = 0;

  [[nodiscard]] bool ok() const noexcept {
    return status == Status::Found || status == Status::Inserted || status == Status::Deleted ||
           status == Status::Updated || status == Status::Done;
  }
};

[[nodiscard]] const char* to_string(Status s) noexcept;

}  // namespace dlht
