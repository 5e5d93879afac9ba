#pragma once

#include <cstddef>
#include <cstdint>

namespace dlht {

/// Growth multiplier for an index of `nbins` bins: small indexes grow
/// aggressively, large ones conservatively.
[[nodiscard]] constexpr unsigned growth_factor(std::size_t nbins) noexcept {
  if (nbins < 4096) return 8;
  if (nbins < (std::size_t{64} << 20)) return 4;
  return 2;
}

enum class ResizeCause : std::uint8_t { BinFull, LinksExhausted, Manual };

/// One completed resize, as recorded by the thread that finished it.
struct ResizeRecord {
  std::size_t from_bins = 0;
  std::size_t to_bins = 0;
  unsigned factor = 0;
  ResizeCause cause = ResizeCause::Manual;
  /// Live slots moved, divided by the old index's nominal slot capacity.
  double occupancy = 0.0;
  std::uint64_t transferred = 0;
  std::uint64_t duration_ns = 0;
  unsigned participants = 0;
  unsigned duplicate_transfers = 0;
};

[[nodiscard]] const char* to_string(ResizeCause c) noexcept;

}  // namespace dlht
