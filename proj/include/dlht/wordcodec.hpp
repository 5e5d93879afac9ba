#pragma once

/// \file
/// Bit-level encodings of the three 64-bit words the table synchronizes on:
/// the bin header, the link metadata word and the tagged value word used in
/// Allocator mode. Everything here is pure and constexpr.
///
/// Header layout (LSB first):
///   bits  0..31  version (incremented by every header transition)
///   bits 32..33  bin state
///   bits 34+2i   state of slot i, i in [0, 15)
///
/// An all-zeros header therefore decodes to an empty bin at version 0.

#include <array>
#include <bit>
#include <cassert>
#include <cstdint>
#include <stdexcept>

namespace dlht {

inline constexpr unsigned kSlotsPerBin = 15;
inline constexpr unsigned kPrimarySlots = 3;
inline constexpr unsigned kLinkSlots = 4;

enum class SlotState : std::uint8_t { Invalid = 0, TryInsert = 1, Valid = 2, Shadow = 3 };

enum class BinState : std::uint8_t { NoTransfer = 0, InTransfer = 1, DoneTransfer = 2, Reserved = 3 };

namespace codec {
inline constexpr unsigned kBinStateShift = 32;
inline constexpr unsigned kSlotShift = 34;
inline constexpr std::uint64_t kVersionMask = 0xFFFF'FFFFull;
inline constexpr std::uint64_t kTwoBits = 0b11;
// One bit per slot, at the low bit of each 2-bit state field (after >> kSlotShift).
inline constexpr std::uint64_t kPairLowBits = 0x1555'5555ull;
}  // namespace codec

/// Packed 64-bit bin header. Value type; atomics live in the bucket.
class HeaderWord {
 public:
  constexpr HeaderWord() noexcept = default;
  constexpr explicit HeaderWord(std::uint64_t bits) noexcept : bits_{bits} {}

  [[nodiscard]] constexpr std::uint64_t bits() const noexcept { return bits_; }
  [[nodiscard]] constexpr std::uint32_t version() const noexcept {
    return static_cast<std::uint32_t>(bits_ & codec::kVersionMask);
  }
  [[nodiscard]] constexpr BinState bin_state() const noexcept {
    return static_cast<BinState>((bits_ >> codec::kBinStateShift) & codec::kTwoBits);
  }
  [[nodiscard]] constexpr SlotState slot(unsigned i) const noexcept {
    assert(i < kSlotsPerBin);
    return static_cast<SlotState>((bits_ >> (codec::kSlotShift + 2 * i)) & codec::kTwoBits);
  }

  /// Slot `i` moved to `s`, version + 1.
  [[nodiscard]] constexpr HeaderWord with_slot(unsigned i, SlotState s) const noexcept {
    assert(i < kSlotsPerBin);
    const unsigned shift = codec::kSlotShift + 2 * i;
    std::uint64_t w = bits_ & ~(codec::kTwoBits << shift);
    w |= static_cast<std::uint64_t>(s) << shift;
    return HeaderWord{bump(w)};
  }

  /// Bin state moved to `s`, version + 1.
  [[nodiscard]] constexpr HeaderWord with_bin(BinState s) const noexcept {
    std::uint64_t w = bits_ & ~(codec::kTwoBits << codec::kBinStateShift);
    w |= static_cast<std::uint64_t>(s) << codec::kBinStateShift;
    return HeaderWord{bump(w)};
  }

  /// Bit set with one bit per slot in state `s`, at position 2*i.
  /// Iterate with std::countr_zero(m) / 2.
  [[nodiscard]] constexpr std::uint64_t pair_mask(SlotState s) const noexcept {
    const std::uint64_t states = bits_ >> codec::kSlotShift;
    const std::uint64_t lo = states & codec::kPairLowBits;
    const std::uint64_t hi = (states >> 1) & codec::kPairLowBits;
    const auto code = static_cast<unsigned>(s);
    const std::uint64_t want_lo = (code & 1u) ? lo : (~lo & codec::kPairLowBits);
    const std::uint64_t want_hi = (code & 2u) ? hi : (~hi & codec::kPairLowBits);
    return want_lo & want_hi;
  }

  [[nodiscard]] constexpr unsigned count(SlotState s) const noexcept {
    return static_cast<unsigned>(std::popcount(pair_mask(s)));
  }

  /// Lowest slot in state `s`, or kSlotsPerBin when there is none.
  [[nodiscard]] constexpr unsigned first(SlotState s) const noexcept {
    const std::uint64_t m = pair_mask(s);
    return m == 0 ? kSlotsPerBin : static_cast<unsigned>(std::countr_zero(m)) / 2;
  }

  friend constexpr bool operator==(HeaderWord, HeaderWord) noexcept = default;

 private:
  static constexpr std::uint64_t bump(std::uint64_t w) noexcept {
    const std::uint64_t v = (w + 1) & codec::kVersionMask;
    return (w & ~codec::kVersionMask) | v;
  }

  std::uint64_t bits_ = 0;
};

struct DecodedHeader {
  std::uint32_t version = 0;
  BinState bin_state = BinState::NoTransfer;
  std::array<SlotState, kSlotsPerBin> slots{};

  friend constexpr bool operator==(const DecodedHeader&, const DecodedHeader&) noexcept = default;
};

[[nodiscard]] constexpr HeaderWord pack_header(std::uint32_t version, BinState bin_state,
                                               const std::array<SlotState, kSlotsPerBin>& slots) noexcept {
  std::uint64_t w = version;
  w |= static_cast<std::uint64_t>(bin_state) << codec::kBinStateShift;
  for (unsigned i = 0; i < kSlotsPerBin; ++i) {
    w |= static_cast<std::uint64_t>(slots[i]) << (codec::kSlotShift + 2 * i);
  }
  return HeaderWord{w};
}

[[nodiscard]] constexpr DecodedHeader unpack_header(HeaderWord w) noexcept {
  DecodedHeader d;
  d.version = w.version();
  d.bin_state = w.bin_state();
  for (unsigned i = 0; i < kSlotsPerBin; ++i) d.slots[i] = w.slot(i);
  return d;
}

[[nodiscard]] constexpr HeaderWord with_slot_state(HeaderWord w, unsigned slot, SlotState s) noexcept {
  return w.with_slot(slot, s);
}

[[nodiscard]] constexpr HeaderWord with_bin_state(HeaderWord w, BinState s) noexcept {
  return w.with_bin(s);
}

// ---------------------------------------------------------------------------
// Link metadata: link_a in the low half, link_bc in the high half.

inline constexpr std::uint32_t kUnlinked = 0xFFFF'FFFFu;
inline constexpr std::uint64_t kEmptyLinkMeta = ~std::uint64_t{0};

struct LinkMeta {
  std::uint32_t link_a = kUnlinked;
  std::uint32_t link_bc = kUnlinked;

  friend constexpr bool operator==(LinkMeta, LinkMeta) noexcept = default;
};

[[nodiscard]] constexpr std::uint64_t pack_link_meta(LinkMeta m) noexcept {
  return (static_cast<std::uint64_t>(m.link_bc) << 32) | m.link_a;
}

[[nodiscard]] constexpr LinkMeta unpack_link_meta(std::uint64_t w) noexcept {
  return LinkMeta{static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(w >> 32)};
}

// ---------------------------------------------------------------------------
// Tagged value word: [63..60] key size nibble | [59..48] namespace | [47..0] address.
// Nibble 1..8 means the key is inlined in the slot and has that many bytes;
// nibble 0 means the key lives in the record together with its length.

inline constexpr std::uint64_t kAddressMask = (std::uint64_t{1} << 48) - 1;
inline constexpr unsigned kMaxNamespace = 4095;

struct TaggedValue {
  std::uint64_t address = 0;
  std::uint8_t key_size = 0;
  std::uint16_t ns = 0;

  friend constexpr bool operator==(TaggedValue, TaggedValue) noexcept = default;
};

[[nodiscard]] constexpr std::uint64_t tag_address(std::uint64_t address, unsigned key_size, unsigned ns) {
  if (address > kAddressMask) throw std::invalid_argument("record address does not fit in 48 bits");
  if (key_size > 15) throw std::invalid_argument("key size nibble out of range");
  if (ns > kMaxNamespace) throw std::invalid_argument("namespace id out of range");
  return (static_cast<std::uint64_t>(key_size) << 60) | (static_cast<std::uint64_t>(ns) << 48) | address;
}

[[nodiscard]] constexpr TaggedValue untag_address(std::uint64_t w) noexcept {
  return TaggedValue{w & kAddressMask, static_cast<std::uint8_t>(w >> 60),
                     static_cast<std::uint16_t>((w >> 48) & 0xFFF)};
}

}  // namespace dlht
