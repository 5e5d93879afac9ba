#include "dlht/hash.hpp"

#include <cstring>

namespace dlht {
namespace {

constexpr std::uint64_t kSecret0 = 0xa0761d6478bd642full;
constexpr std::uint64_t kSecret1 = 0xe7037ed1a0b428dbull;
constexpr std::uint64_t kSecret2 = 0x8ebc6af09c88c6e3ull;

inline std::uint64_t mum(std::uint64_t a, std::uint64_t b) noexcept {
  const unsigned __int128 r = static_cast<unsigned __int128>(a) * b;
  return static_cast<std::uint64_t>(r) ^ static_cast<std::uint64_t>(r >> 64);
}

inline std::uint64_t load_le(const std::byte* p, std::size_t n) noexcept {
  std::uint64_t w = 0;
  std::memcpy(&w, p, n);  // little-endian target
  return w;
}

}  // namespace

std::uint64_t hash_word(std::uint64_t key, HashKind kind) noexcept {
  if (kind == HashKind::ModuloIdentity) return key;
  return mum(mum(key ^ kSecret0, kSecret1) ^ kSecret2, kSecret1 ^ 8);
}

std::uint64_t key_word_of(std::span<const std::byte> key) noexcept {
  return load_le(key.data(), key.size() < 8 ? key.size() : 8);
}

std::uint64_t hash_bytes(std::span<const std::byte> key, HashKind kind) noexcept {
  if (key.size() <= 8) return hash_word(key_word_of(key), kind);

  if (kind == HashKind::ModuloIdentity) {
    // xor-fold of the 8-byte chunks, length mixed into the top byte
    std::uint64_t h = key.size() << 56;
    std::size_t i = 0;
    for (; i + 8 <= key.size(); i += 8) h ^= load_le(key.data() + i, 8);
    if (i < key.size()) h ^= load_le(key.data() + i, key.size() - i);
    return h;
  }

  std::uint64_t seed = kSecret0 ^ key.size();
  std::size_t i = 0;
  for (; i + 16 <= key.size(); i += 16) {
    seed = mum(load_le(key.data() + i, 8) ^ kSecret1, load_le(key.data() + i + 8, 8) ^ seed);
  }
  std::uint64_t a = 0;
  std::uint64_t b = 0;
  const std::size_t rest = key.size() - i;
  if (rest > 8) {
    a = load_le(key.data() + i, 8);
    b = load_le(key.data() + i + 8, rest - 8);
  } else if (rest > 0) {
    a = load_le(key.data() + i, rest);
  }
  return mum(mum(a ^ kSecret1, b ^ seed) ^ kSecret2, kSecret1 ^ key.size());
}

}  // namespace dlht
