#include <doctest.h>

#include <random>

#include "dlht/wordcodec.hpp"
#include "golden.hpp"

using namespace dlht;

namespace {

std::array<SlotState, kSlotsPerBin> all(SlotState s) {
  std::array<SlotState, kSlotsPerBin> a;
  a.fill(s);
  return a;
}

}  // namespace

TEST_CASE("header golden values") {
  CHECK(pack_header(0, BinState::InTransfer, all(SlotState::Invalid)).bits() == golden::kHeaderInTransferOnly);

  auto slots = all(SlotState::Invalid);
  slots[14] = SlotState::Valid;
  const HeaderWord h = pack_header(0, BinState::NoTransfer, slots);
  CHECK(h.bits() == golden::kHeaderSlot14Valid);
  const DecodedHeader d = unpack_header(h);
  for (unsigned i = 0; i < kSlotsPerBin; ++i) CHECK(d.slots[i] == (i == 14 ? SlotState::Valid : SlotState::Invalid));

  std::array<SlotState, kSlotsPerBin> mixed;
  for (unsigned i = 0; i < kSlotsPerBin; ++i) mixed[i] = static_cast<SlotState>(i % 4);
  CHECK(pack_header(0xDEADBEEF, BinState::DoneTransfer, mixed).bits() == golden::kHeaderMixed);
}

TEST_CASE("header roundtrip over every slot and bin state") {
  std::mt19937_64 rng{7};
  for (int n = 0; n < 2000; ++n) {
    DecodedHeader d;
    d.version = static_cast<std::uint32_t>(rng());
    d.bin_state = static_cast<BinState>(rng() % 3);
    for (auto& s : d.slots) s = static_cast<SlotState>(rng() % 4);
    CHECK(unpack_header(pack_header(d.version, d.bin_state, d.slots)) == d);
  }
}

TEST_CASE("slot and bin changes bump the version and touch nothing else") {
  std::mt19937_64 rng{11};
  for (int n = 0; n < 2000; ++n) {
    const HeaderWord w{rng()};
    const unsigned slot = static_cast<unsigned>(rng() % kSlotsPerBin);
    const auto state = static_cast<SlotState>(rng() % 4);
    const HeaderWord s = w.with_slot(slot, state);
    CHECK(s.slot(slot) == state);
    CHECK(s.version() == static_cast<std::uint32_t>(w.version() + 1));
    CHECK(s.bin_state() == w.bin_state());
    for (unsigned i = 0; i < kSlotsPerBin; ++i)
      if (i != slot) CHECK(s.slot(i) == w.slot(i));

    const HeaderWord b = w.with_bin(BinState::DoneTransfer);
    CHECK(b.bin_state() == BinState::DoneTransfer);
    for (unsigned i = 0; i < kSlotsPerBin; ++i) CHECK(b.slot(i) == w.slot(i));
  }
}

TEST_CASE("version wraps without spilling into the bin state") {
  HeaderWord w = pack_header(0xFFFF'FFFF, BinState::NoTransfer, all(SlotState::Invalid));
  w = w.with_slot(0, SlotState::Valid);
  CHECK(w.version() == 0);
  CHECK(w.bin_state() == BinState::NoTransfer);
}

TEST_CASE("pair masks select slots by state") {
  auto slots = all(SlotState::Invalid);
  slots[0] = SlotState::Valid;
  slots[3] = SlotState::Shadow;
  slots[7] = SlotState::Valid;
  slots[14] = SlotState::TryInsert;
  const HeaderWord h = pack_header(5, BinState::NoTransfer, slots);
  CHECK(h.pair_mask(SlotState::Valid) == ((1ull << 0) | (1ull << 14)));
  CHECK(h.pair_mask(SlotState::Shadow) == (1ull << 6));
  CHECK(h.pair_mask(SlotState::TryInsert) == (1ull << 28));
  CHECK(h.count(SlotState::Invalid) == 11);
  CHECK(h.first(SlotState::Invalid) == 1);
  CHECK(pack_header(0, BinState::NoTransfer, all(SlotState::Valid)).first(SlotState::Invalid) == kSlotsPerBin);
}

TEST_CASE("link meta golden value and roundtrip") {
  CHECK(pack_link_meta({5, kUnlinked}) == golden::kLinkMeta5Unlinked);
  CHECK(unpack_link_meta(golden::kLinkMeta5Unlinked) == LinkMeta{5, kUnlinked});
  CHECK(unpack_link_meta(kEmptyLinkMeta) == LinkMeta{});
  std::mt19937_64 rng{3};
  for (int n = 0; n < 1000; ++n) {
    const std::uint64_t w = rng();
    CHECK(pack_link_meta(unpack_link_meta(w)) == w);
  }
}

TEST_CASE("tagged address golden values and bounds") {
  CHECK(tag_address(0x0000FFFFFFFFFFFFull, 8, 5) == golden::kTagMaxAddr8ns5);
  CHECK(tag_address(0x123456789ABCull, 0, 4095) == golden::kTag16ByteNs4095);
  CHECK(untag_address(golden::kTagMaxAddr8ns5) == TaggedValue{0x0000FFFFFFFFFFFFull, 8, 5});
  CHECK_THROWS_AS((void)tag_address(1ull << 48, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS((void)tag_address(0x1000, 0, 4096), std::invalid_argument);
  CHECK_THROWS_AS((void)tag_address(0x1000, 16, 0), std::invalid_argument);
}
