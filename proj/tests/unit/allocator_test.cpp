#include <doctest.h>

#include <cstring>
#include <string>
#include <vector>

#include "dlht/table.hpp"
#include "dlht/wordcodec.hpp"

using namespace dlht;

namespace {

Config alloc_config(std::size_t key_size, std::size_t value_size) {
  Config c;
  c.mode = Mode::Allocator;
  c.hash = HashKind::StrongMixer;  // text keys share their low bytes
  c.initial_bins = 16;
  c.layout.key_size = key_size;
  c.layout.value_size = value_size;
  return c;
}

Config variable_config() {
  Config c;
  c.mode = Mode::Allocator;
  c.hash = HashKind::StrongMixer;
  c.initial_bins = 16;
  c.layout.variable_sizes = true;
  return c;
}

std::string value_text(const Table& t, const OpResult& r) {
  const RecordView v = t.record(r);
  return {reinterpret_cast<const char*>(v.value().data()), v.value_size()};
}

std::string key_text(const RecordView& v) {
  return {reinterpret_cast<const char*>(v.key().data()), v.key_size()};
}

}  // namespace

TEST_CASE("16-byte keys live in the record; the slot keeps the low 8 bytes") {
  Table t(alloc_config(16, 8));
  const std::string key = "0123456789abcdef", value = "VALUE_01";
  const OpResult ins = t.insert(key, value);
  REQUIRE(ins.status == Status::Inserted);
  const OpResult r = t.get(key);
  REQUIRE(r.status == Status::Found);
  const TaggedValue tv = untag_address(r.value);
  CHECK(tv.key_size == 0);
  CHECK(r.key_word == key_word_of(bytes_of(key.substr(0, 8))));
  const RecordView v = t.record(r);
  CHECK(key_text(v) == key);
  CHECK(value_text(t, r) == value);
}

TEST_CASE("short keys stay inlined with their length in the tag") {
  Table t(alloc_config(5, 8));
  t.insert(std::string_view("hello"), std::string_view("12345678"));
  const OpResult r = t.get(std::string_view("hello"));
  REQUIRE(r.status == Status::Found);
  CHECK(untag_address(r.value).key_size == 5);
  CHECK(key_text(t.record(r)) == "hello");
}

TEST_CASE("keys sharing their first 8 bytes are told apart") {
  Table t(alloc_config(16, 8));
  const std::string a = "SAMEPREFaaaaaaaa", b = "SAMEPREFbbbbbbbb";
  CHECK(t.insert(a, std::string_view("valueAAA")).status == Status::Inserted);
  CHECK(t.get(b).status == Status::NotFound);
  CHECK(t.insert(b, std::string_view("valueBBB")).status == Status::Inserted);
  CHECK(value_text(t, t.get(a)) == "valueAAA");
  CHECK(value_text(t, t.get(b)) == "valueBBB");
  CHECK(t.erase(a).status == Status::Deleted);
  CHECK(t.get(a).status == Status::NotFound);
  CHECK(value_text(t, t.get(b)) == "valueBBB");
}

TEST_CASE("namespaces separate identical keys") {
  Table t(alloc_config(8, 8));
  const std::string key = "key00001";
  CHECK(t.insert(key, std::string_view("ns0value"), 0).status == Status::Inserted);
  CHECK(t.insert(key, std::string_view("ns7value"), 7).status == Status::Inserted);
  CHECK(t.get(key, 3).status == Status::NotFound);
  CHECK(value_text(t, t.get(key, 0)) == "ns0value");
  CHECK(value_text(t, t.get(key, 7)) == "ns7value");
  CHECK(t.record(t.get(key, 7)).ns() == 7);
  CHECK_THROWS_AS(t.get(bytes_of(key), 4096), std::invalid_argument);
}

TEST_CASE("variable sizes round-trip through growth") {
  Table t(variable_config());
  std::vector<std::string> keys;
  for (int i = 0; i < 2000; ++i) {
    std::string k = "k" + std::to_string(i) + std::string(i % 37, 'x');
    std::string v(i % 101, static_cast<char>('a' + i % 26));
    REQUIRE(t.insert(k, v).status == Status::Inserted);
    keys.push_back(std::move(k));
  }
  CHECK(!t.resize_history().empty());
  for (int i = 0; i < 2000; ++i) {
    const OpResult r = t.get(keys[i]);
    REQUIRE(r.status == Status::Found);
    CHECK(value_text(t, r) == std::string(i % 101, static_cast<char>('a' + i % 26)));
    CHECK(key_text(t.record(r)) == keys[i]);
  }
  CHECK(t.audit().clean());
}

TEST_CASE("fixed layouts reject other sizes") {
  Table t(alloc_config(16, 8));
  CHECK_THROWS_AS(t.insert(std::string_view("short"), std::string_view("12345678")), std::invalid_argument);
  CHECK_THROWS_AS(t.insert(std::string_view("0123456789abcdef"), std::string_view("1")), std::invalid_argument);
  CHECK_THROWS_AS(t.insert(std::string_view(""), std::string_view("12345678")), std::invalid_argument);
}

TEST_CASE("values are writable in place") {
  Table t(alloc_config(8, 8));
  t.insert(std::string_view("counter1"), std::string_view("00000000"));
  const RecordView v = t.record(t.get(std::string_view("counter1")));
  std::memcpy(v.value().data(), "00000042", 8);
  CHECK(value_text(t, t.get(std::string_view("counter1"))) == "00000042");
}

TEST_CASE("shadow inserts and finalize in Allocator mode") {
  Table t(alloc_config(8, 8));
  const std::string k = "lockkey1";
  CHECK(t.shadow_insert(bytes_of(k), bytes_of("payload1")).status == Status::Inserted);
  CHECK(t.get(k).status == Status::NotFound);
  CHECK(t.finalize_shadow(bytes_of(k), Decision::Abort).status == Status::Done);
  CHECK(t.insert(k, std::string_view("payload2")).status == Status::Inserted);
  CHECK(value_text(t, t.get(k)) == "payload2");
}

TEST_CASE("reclamation on: deleted records go after two epochs") {
  Table t(alloc_config(8, 8));
  for (int i = 0; i < 10; ++i) t.insert("key0000" + std::to_string(i), std::string_view("12345678"));
  for (int i = 0; i < 10; ++i) CHECK(t.erase("key0000" + std::to_string(i)).status == Status::Deleted);
  CHECK(t.stats().records_pending == 10);
  t.advance_epoch();
  t.advance_epoch();
  CHECK(t.stats().records_pending == 0);
  CHECK(t.stats().records_released == 10);
}

TEST_CASE("reclamation off: the client owns deleted records") {
  Config c = alloc_config(8, 8);
  c.reclamation = false;
  Table t(c);
  t.insert(std::string_view("key00001"), std::string_view("12345678"));
  const OpResult r = t.erase(std::string_view("key00001"));
  REQUIRE(r.status == Status::Deleted);
  t.advance_epoch();
  t.advance_epoch();
  CHECK(t.stats().records_released == 0);
  CHECK(value_text(t, r) == "12345678");  // still readable: nothing freed it
  t.release_record(r);
}

class CountingAllocator final : public RecordAllocator {
 public:
  void* allocate(std::size_t size, std::size_t alignment) override {
    ++live;
    return heap.allocate(size, alignment);
  }
  void release(void* p, std::size_t size, std::size_t alignment) noexcept override {
    --live;
    heap.release(p, size, alignment);
  }
  int live = 0;
  HeapRecordAllocator heap;
};

TEST_CASE("custom allocator sees every record freed by teardown") {
  auto counting = std::make_shared<CountingAllocator>();
  {
    Config c = alloc_config(8, 8);
    c.allocator = counting;
    Table t(c);
    for (int i = 0; i < 100; ++i) t.insert("k" + std::string(7 - std::to_string(i).size(), '0') + std::to_string(i),
                                         std::string_view("12345678"));
    CHECK(counting->live == 100);
    for (int i = 0; i < 50; ++i) t.erase("k" + std::string(7 - std::to_string(i).size(), '0') + std::to_string(i));
    // Duplicate inserts free their unpublished record immediately.
    CHECK(t.insert(std::string_view("k0000099"), std::string_view("12345678")).status == Status::AlreadyPresent);
    CHECK(counting->live == 100);
  }
  CHECK(counting->live == 0);
}
