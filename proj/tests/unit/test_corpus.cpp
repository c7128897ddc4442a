#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "apr/common/checksum.hpp"
#include "apr/common/text.hpp"
#include "apr/corpus/corpus.hpp"
#include "apr/tokenizer/vocab.hpp"
#include "testing.hpp"

namespace {

namespace corpus = apr::corpus;
using apr::Json;
using apr::testing::raw_record;
using apr::testing::TempDir;

std::string jsonl(const std::vector<Json>& records) { return apr::to_json_lines(records); }

std::string hex_sha(char c) { return std::string(40, c); }

// Hand-built release: three good records, one missing bugType, one with an extra field.
std::vector<Json> five_records() {
  std::vector<Json> r;
  r.push_back(raw_record("CHANGE_OPERATOR", "p.a", hex_sha('a'), "if (a == b)", "if (a != b)"));
  r.push_back(raw_record("SWAP_BOOLEAN_LITERAL", "p.b", hex_sha('b'), "x = true;", "x = false;"));
  Json missing = raw_record("CHANGE_OPERAND", "p.c", hex_sha('c'), "f(a);", "f(b);");
  missing.erase("bugType");
  r.push_back(missing);
  r.push_back(raw_record("CHANGE_OPERAND", "p.a", hex_sha('d'), "return a;", "return b;"));
  Json extra = raw_record("CHANGE_IDENTIFIER", "p.b", hex_sha('e'), "foo();", "bar();");
  extra["customField"] = Json::array({1, 2, 3});
  r.push_back(extra);
  return r;
}

std::vector<corpus::BugInstance> instances_from(const std::vector<Json>& records) {
  return corpus::parse_raw(jsonl(records), corpus::SizeClass::Small, "mem").instances;
}

TEST(LoadRaw, FiveRecordFixtureYieldsFourAndOneReject) {
  const auto raw = corpus::parse_raw(jsonl(five_records()), corpus::SizeClass::Small, "mem");
  EXPECT_EQ(raw.raw_records, 5u);
  ASSERT_EQ(raw.instances.size(), 4u);
  ASSERT_EQ(raw.rejects.size(), 1u);
  EXPECT_EQ(raw.rejects[0].ordinal, 2u);
  EXPECT_NE(raw.rejects[0].reason.find("bugType"), std::string::npos);
  EXPECT_EQ(raw.instances[0].id, "aaaaaaaaaaaa:0");
  EXPECT_EQ(raw.instances[2].id, "dddddddddddd:3");
  EXPECT_EQ(raw.instances[3].extra.at("customField"), Json::array({1, 2, 3}));
  EXPECT_EQ(raw.instances[3].extra.at("lineNum"), 42);
  EXPECT_FALSE(raw.instances[3].extra.contains("bugType"));
}

TEST(LoadRaw, ArrayAndLineFormatsAgree) {
  const auto records = five_records();
  Json arr = Json::array();
  for (const auto& r : records) arr.push_back(r);
  const auto a = corpus::parse_raw(arr.dump(2), corpus::SizeClass::Large, "arr");
  const auto b = corpus::parse_raw(jsonl(records), corpus::SizeClass::Large, "lines");
  EXPECT_EQ(a.instances, b.instances);
  EXPECT_EQ(a.rejects.size(), b.rejects.size());
}

TEST(LoadRaw, EmptyInputAndMissingFile) {
  TempDir dir;
  apr::write_file(dir / "empty.json", "");
  const auto raw = corpus::load_raw(dir / "empty.json", corpus::SizeClass::Small);
  EXPECT_TRUE(raw.instances.empty());
  EXPECT_TRUE(raw.rejects.empty());
  EXPECT_THROW(corpus::load_raw(dir / "absent.json", corpus::SizeClass::Small), apr::DataError);
}

TEST(LoadRaw, RejectsBadRecordsWithoutFailing) {
  std::vector<Json> r = five_records();
  r.push_back(Json(17));
  r.push_back(raw_record("CHANGE_OPERAND", "p", "not-a-sha", "a", "b"));
  const auto raw = corpus::parse_raw(jsonl(r), corpus::SizeClass::Small, "mem");
  EXPECT_EQ(raw.instances.size(), 4u);
  EXPECT_EQ(raw.rejects.size(), 3u);
}

TEST(FilterUsable, DropsExcludedTypesAndEmptySources) {
  std::vector<Json> r;
  r.push_back(raw_record("MISSING_THROWS_EXCEPTION", "p", hex_sha('1'), "void f()", "void f() throws E"));
  r.push_back(raw_record("ADD_THROWS_EXCEPTION", "p", hex_sha('2'), "void f()", "void f() throws E"));
  r.push_back(raw_record("DELETE_THROWS_EXCEPTION", "p", hex_sha('3'), "void f() throws E", "void f()"));
  r.push_back(raw_record("CHANGE_MODIFIER", "p", hex_sha('4'), "public int x;", "private int x;"));
  r.push_back(raw_record("CHANGE_OPERAND", "p", hex_sha('5'), "  \t", "a;"));
  Json no_after = raw_record("CHANGE_OPERAND", "p", hex_sha('6'), "a;", "");
  no_after.erase("sourceAfterFix");
  r.push_back(no_after);
  r.push_back(raw_record("CHANGE_OPERAND", "p", hex_sha('7'), "a;", "b;"));
  const auto result = corpus::filter_usable(instances_from(r));
  ASSERT_EQ(result.kept.size(), 1u);
  EXPECT_EQ(result.kept[0].fix_commit_sha1, hex_sha('7'));
  EXPECT_EQ(result.dropped.at("excluded_type:CHANGE_MODIFIER"), 1u);
  EXPECT_EQ(result.dropped.at("empty_source"), 2u);
  std::size_t dropped = 0;
  for (const auto& [_, n] : result.dropped) dropped += n;
  EXPECT_EQ(dropped + result.kept.size(), r.size());
}

TEST(FilterUsable, IdentityWithoutExcludedTypes) {
  const auto in = instances_from(five_records());
  EXPECT_EQ(corpus::filter_usable(in).kept, in);
}

std::vector<corpus::BugInstance> random_instances(std::mt19937_64& rng, std::size_t n, std::size_t distinct) {
  // Draw pairs from a small pool so duplicates (with different spacing) are common.
  std::vector<std::pair<std::string, std::string>> pool;
  for (std::size_t i = 0; i < distinct; ++i) pool.emplace_back(apr::testing::statement(rng), apr::testing::statement(rng));
  std::vector<Json> records;
  for (std::size_t i = 0; i < n; ++i) {
    auto [before, after] = pool[apr::testing::pick(rng, pool.size())];
    if (apr::testing::pick(rng, 2)) before = " " + before + "  ";
    records.push_back(raw_record("CHANGE_OPERAND", "proj" + std::to_string(apr::testing::pick(rng, 5)),
                                 apr::testing::sha1(rng), before, after));
  }
  return instances_from(records);
}

TEST(Deduplicate, KeepsFirstOccurrenceOfNormalizedPair) {
  std::vector<Json> r;
  r.push_back(raw_record("T", "p", hex_sha('1'), "a  = b;", "a = c;"));
  r.push_back(raw_record("T", "p", hex_sha('2'), "a = b;", "a =\tc;"));
  r.push_back(raw_record("T", "p", hex_sha('3'), "A = b;", "a = c;"));
  const auto out = corpus::deduplicate(instances_from(r));
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].fix_commit_sha1, hex_sha('1'));
  EXPECT_EQ(out[1].fix_commit_sha1, hex_sha('3'));
}

TEST(Deduplicate, IdempotentAndUniqueProperty) {
  std::mt19937_64 rng(3);
  for (int round = 0; round < 30; ++round) {
    const auto in = random_instances(rng, 1 + apr::testing::pick(rng, 60), 1 + apr::testing::pick(rng, 20));
    const auto once = corpus::deduplicate(in);
    EXPECT_EQ(corpus::deduplicate(once), once);
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& b : once)
      keys.emplace(apr::text::normalize_whitespace(b.source_before_fix), apr::text::normalize_whitespace(b.source_after_fix));
    EXPECT_EQ(keys.size(), once.size());
    // Every input pair is represented.
    for (const auto& b : in)
      EXPECT_TRUE(keys.count({apr::text::normalize_whitespace(b.source_before_fix),
                              apr::text::normalize_whitespace(b.source_after_fix)}));
  }
}

TEST(SplitSizes, MatchesPublishedTestDenominators) {
  EXPECT_EQ(corpus::split_sizes(24488).test, 2449u);
  EXPECT_EQ(corpus::split_sizes(58198).test, 5820u);
  EXPECT_EQ(corpus::split_sizes(8263).test, 827u);
  EXPECT_EQ(corpus::split_sizes(4680).test, 468u);
  const auto ten = corpus::split_sizes(10);
  EXPECT_EQ(ten.train, 8u);
  EXPECT_EQ(ten.valid, 1u);
  EXPECT_EQ(ten.test, 1u);
  EXPECT_THROW(corpus::split_sizes(9), apr::DataError);
  EXPECT_THROW(corpus::split_sizes(0), apr::DataError);
}

TEST(SplitSizes, RatioPropertyForAllSmallN) {
  for (std::size_t n = 10; n <= 5000; ++n) {
    const auto s = corpus::split_sizes(n);
    // Smallest t with 10 t >= n, found by search rather than formula.
    std::size_t t = 0;
    while (10 * t < n) ++t;
    ASSERT_EQ(s.test, t) << n;
    ASSERT_EQ(s.valid, t) << n;
    ASSERT_EQ(s.train + s.valid + s.test, n) << n;
    ASSERT_GE(s.train, s.test) << n;
  }
}

TEST(Split, PartitionsIdsDeterministically) {
  std::mt19937_64 rng(5);
  auto in = random_instances(rng, 137, 137);
  const auto a = corpus::split(in, 99);
  const auto b = corpus::split(in, 99);
  EXPECT_EQ(a, b);
  std::set<std::string> ids;
  for (const auto* part : {&a.train, &a.valid, &a.test})
    for (const auto& x : *part) EXPECT_TRUE(ids.insert(x.id).second);
  std::set<std::string> expected;
  for (const auto& x : in) expected.insert(x.id);
  EXPECT_EQ(ids, expected);
  EXPECT_EQ(a.test.size(), 14u);
  EXPECT_EQ(a.valid.size(), 14u);
  const auto c = corpus::split(in, 100);
  EXPECT_NE(a.test, c.test);
  EXPECT_THROW(corpus::split(std::vector<corpus::BugInstance>(in.begin(), in.begin() + 9), 1), apr::DataError);
}

TEST(Prepare, StageCountsAreConsistent) {
  std::mt19937_64 rng(8);
  std::vector<Json> records;
  for (int i = 0; i < 200; ++i) {
    const auto before = apr::testing::statement(rng);
    const bool dup = i % 4 == 0 && i > 0;
    records.push_back(raw_record(i % 7 == 0 ? "CHANGE_MODIFIER" : "CHANGE_OPERAND", "p" + std::to_string(i % 3),
                                 apr::testing::sha1(rng), dup ? "x = 1;" : before, dup ? "x = 2;" : before + " "));
  }
  records.push_back(Json::object());
  const auto raw = corpus::parse_raw(jsonl(records), corpus::SizeClass::Small, "mem");
  for (auto variant : {corpus::Variant::Duplicate, corpus::Variant::Unique}) {
    const auto result = corpus::prepare(raw, variant, 1);
    const auto& s = result.bundle.stats;
    EXPECT_EQ(s.raw, 201u);
    EXPECT_EQ(s.rejected, 1u);
    EXPECT_LE(s.after_type_filter, s.raw - s.rejected);
    std::size_t dropped = 0;
    for (const auto& [_, n] : s.drop_reasons) dropped += n;
    const std::size_t final_count = s.after_dedup ? *s.after_dedup : s.after_type_filter;
    EXPECT_EQ(s.raw, final_count + dropped);
    EXPECT_EQ(result.bundle.size(), final_count);
    if (variant == corpus::Variant::Unique) {
      ASSERT_TRUE(s.after_dedup.has_value());
      EXPECT_LE(*s.after_dedup, s.after_type_filter);
    } else {
      EXPECT_FALSE(s.after_dedup.has_value());
    }
  }
}

TEST(ComputeStats, HistogramsAndOverLength) {
  std::mt19937_64 rng(2);
  auto in = random_instances(rng, 30, 30);
  // Two statements longer than 510 byte-level tokens.
  in[3].source_before_fix = std::string(511, 'x');
  in[7].source_after_fix = std::string(600, 'y');
  in[9].source_after_fix = std::string(510, 'z');
  const auto bundle = corpus::split(in, 4);
  const auto vocab = apr::tokenizer::Vocab::byte_level();
  const auto s = corpus::compute_stats(bundle, vocab);
  EXPECT_EQ(s.over_length_510, 2u);
  std::size_t by_type = 0, by_project = 0;
  for (const auto& [_, n] : s.per_bug_type) by_type += n;
  for (const auto& [_, n] : s.per_project) by_project += n;
  EXPECT_EQ(by_type, 30u);
  EXPECT_EQ(by_project, 30u);
  // Over-length instances stay in the bundle.
  EXPECT_EQ(s.train + s.valid + s.test, 30u);

  const auto empty = corpus::compute_stats(corpus::DatasetBundle{}, vocab);
  EXPECT_TRUE(empty.per_bug_type.empty());
  EXPECT_EQ(empty.over_length_510, 0u);
}

TEST(ExportBundle, RoundTripAndByteIdenticalReexport) {
  std::mt19937_64 rng(6);
  auto bundle = corpus::split(random_instances(rng, 10, 10), 12, {corpus::Variant::Unique, corpus::SizeClass::Small});
  bundle.source_release = "fixture";
  TempDir dir;
  corpus::export_bundle(bundle, dir / "a");
  corpus::export_bundle(bundle, dir / "b");
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "a")) {
    ++files;
    EXPECT_EQ(apr::read_file(e.path()), apr::read_file(dir / "b" / e.path().filename()));
  }
  EXPECT_EQ(files, 4u);
  EXPECT_EQ(corpus::load_bundle(dir / "a"), bundle);
}

TEST(ExportBundle, CorruptedSplitFailsChecksum) {
  std::mt19937_64 rng(6);
  const auto bundle = corpus::split(random_instances(rng, 10, 10), 12);
  TempDir dir;
  corpus::export_bundle(bundle, dir.path());
  auto bytes = apr::read_file(dir / "valid.jsonl");
  bytes[bytes.size() / 2] = bytes[bytes.size() / 2] == 'a' ? 'b' : 'a';
  apr::write_file(dir / "valid.jsonl", bytes);
  EXPECT_THROW(corpus::load_bundle(dir.path()), apr::DataError);
}

TEST(ExportBundle, UnwritableTargetIsFatal) {
  TempDir dir;
  apr::write_file(dir / "file", "x");
  std::mt19937_64 rng(6);
  const auto bundle = corpus::split(random_instances(rng, 10, 10), 12);
  EXPECT_THROW(corpus::export_bundle(bundle, dir / "file" / "sub"), apr::RuntimeFailure);
}

TEST(Prepare, PipelineIsByteReproducible) {
  std::mt19937_64 rng(21);
  std::vector<Json> records;
  for (int i = 0; i < 80; ++i)
    records.push_back(raw_record("CHANGE_OPERAND", "p", apr::testing::sha1(rng), apr::testing::statement(rng),
                                 apr::testing::statement(rng)));
  TempDir dir;
  apr::write_file(dir / "raw.jsonl", jsonl(records));
  for (const char* out : {"x", "y"}) {
    auto result = corpus::prepare(corpus::load_raw(dir / "raw.jsonl", corpus::SizeClass::Small), corpus::Variant::Unique, 5);
    corpus::export_bundle(result.bundle, dir / out);
  }
  for (const char* f : {"train.jsonl", "valid.jsonl", "test.jsonl", "manifest.json"})
    EXPECT_EQ(apr::read_file(dir / "x" / f), apr::read_file(dir / "y" / f)) << f;
}

}  // namespace
