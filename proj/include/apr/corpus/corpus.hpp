#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "apr/common/json_lines.hpp"

namespace apr::tokenizer {
class Vocab;
}

namespace apr::corpus {

enum class Variant { Duplicate, Unique };
enum class SizeClass { Large, Small };

std::string to_string(Variant v);
std::string to_string(SizeClass s);
Variant parse_variant(const std::string& s);
SizeClass parse_size(const std::string& s);

// One ManySStuBs4J record.
struct BugInstance {
  std::string id;  // first 12 chars of fix_commit_sha1 + ":" + ordinal in the raw file
  std::string project_name;
  std::string fix_commit_sha1;
  std::string bug_type;
  std::string source_before_fix;
  std::string source_after_fix;
  Json extra = Json::object();  // every other raw field, untouched

  bool operator==(const BugInstance&) const = default;
};

struct Reject {
  std::size_t ordinal = 0;
  std::string reason;
  Json raw;
};

struct RawRelease {
  SizeClass size = SizeClass::Large;
  std::string source_release;  // file name + sha256
  std::size_t raw_records = 0;
  std::vector<BugInstance> instances;
  std::vector<Reject> rejects;
};

// Token length limit of the pretrained encoder, excluding the two framing tokens.
inline constexpr std::size_t kMaxCodeTokens = 510;

struct CorpusStats {
  std::size_t raw = 0;
  std::size_t rejected = 0;
  std::size_t after_type_filter = 0;
  std::optional<std::size_t> after_dedup;  // Unique only
  std::size_t over_length_510 = 0;
  std::size_t train = 0, valid = 0, test = 0;
  std::map<std::string, std::size_t> drop_reasons;
  std::map<std::string, std::size_t> per_bug_type;
  std::map<std::string, std::size_t> per_project;

  Json to_json() const;
  static CorpusStats from_json(const Json& j);
  bool operator==(const CorpusStats&) const = default;
};

struct BundleName {
  Variant variant = Variant::Duplicate;
  SizeClass size = SizeClass::Large;

  std::string str() const;  // "Unique-Large"
  bool operator==(const BundleName&) const = default;
};

struct DatasetBundle {
  BundleName name;
  std::vector<BugInstance> train, valid, test;
  CorpusStats stats;
  std::uint64_t split_seed = 0;
  std::string source_release;

  std::size_t size() const { return train.size() + valid.size() + test.size(); }
  bool operator==(const DatasetBundle&) const = default;
};

struct FilterResult {
  std::vector<BugInstance> kept;
  std::map<std::string, std::size_t> dropped;  // reason -> count
};

// Bug types whose before/after statements are not usable as repair pairs.
bool is_excluded_bug_type(const std::string& bug_type);

// Reads a release file (JSON array or one object per line). Missing file is fatal;
// records lacking bugType/projectName/fixCommitSHA1 become rejects.
RawRelease load_raw(const std::filesystem::path& path, SizeClass size);
RawRelease parse_raw(const std::string& text, SizeClass size, const std::string& origin);

FilterResult filter_usable(std::vector<BugInstance> instances);

// Keeps the first occurrence of each whitespace-normalized (before, after) pair.
std::vector<BugInstance> deduplicate(const std::vector<BugInstance>& instances);

struct SplitSizes {
  std::size_t train, valid, test;
};
// test = valid = ceil(N/10), train = remainder. Throws DataError for N < 10.
SplitSizes split_sizes(std::size_t n);

// Seeded Fisher-Yates shuffle then partition. Same input + seed gives identical splits.
DatasetBundle split(std::vector<BugInstance> instances, std::uint64_t seed, BundleName name = {});

// Stage counts are carried over from bundle.stats; histograms and over-length counts are recomputed.
CorpusStats compute_stats(const DatasetBundle& bundle, const tokenizer::Vocab& vocab);

// Number of instances whose buggy or fixed statement exceeds kMaxCodeTokens tokens.
std::size_t count_over_length(const std::vector<BugInstance>& instances, const tokenizer::Vocab& vocab);

struct PrepareResult {
  DatasetBundle bundle;
  std::vector<Reject> rejects;
};

// load -> filter -> (dedup) -> split, with stage counts filled in.
PrepareResult prepare(const RawRelease& raw, Variant variant, std::uint64_t seed);

Json instance_to_json(const BugInstance& b);
BugInstance instance_from_json(const Json& j);

// train.jsonl, valid.jsonl, test.jsonl and manifest.json under out_dir.
void export_bundle(const DatasetBundle& bundle, const std::filesystem::path& out_dir);
// Verifies manifest checksums; mismatch is a DataError.
DatasetBundle load_bundle(const std::filesystem::path& dir);
Json read_manifest(const std::filesystem::path& dir);

// Markdown table of stage counts and split sizes.
std::string render_stats_table(const DatasetBundle& bundle);

}  // namespace apr::corpus
