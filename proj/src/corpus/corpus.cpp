#include "apr/corpus/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>
#include <unordered_set>

#include "apr/common/checksum.hpp"
#include "apr/common/errors.hpp"
#include "apr/common/random.hpp"
#include "apr/common/text.hpp"
#include "apr/tokenizer/vocab.hpp"

namespace apr::corpus {
namespace {

constexpr std::array<const char*, 4> kExcludedTypes = {
    "ADD_THROWS_EXCEPTION",      // "Missing Throws Exception"
    "MISSING_THROWS_EXCEPTION",  // alias used in some write-ups
    "DELETE_THROWS_EXCEPTION",
    "CHANGE_MODIFIER",
};

constexpr std::array<const char*, 5> kKnownFields = {"bugType", "projectName", "fixCommitSHA1", "sourceBeforeFix",
                                                     "sourceAfterFix"};

bool is_hex40(const std::string& s) {
  return s.size() == 40 && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isxdigit(c) != 0; });
}

std::string string_field(const Json& rec, const char* key) {
  auto it = rec.find(key);
  if (it == rec.end() || it->is_null()) return {};
  if (it->is_string()) return it->get<std::string>();
  return it->dump();
}

bool has_nonempty_string(const Json& rec, const char* key) {
  auto it = rec.find(key);
  return it != rec.end() && it->is_string() && !it->get_ref<const std::string&>().empty();
}

std::string pair_key(const BugInstance& b) {
  std::string key = text::normalize_whitespace(b.source_before_fix);
  key.push_back('\0');
  key += text::normalize_whitespace(b.source_after_fix);
  return key;
}

const char* kFiles[3] = {"train.jsonl", "valid.jsonl", "test.jsonl"};

}  // namespace

std::string to_string(Variant v) { return v == Variant::Duplicate ? "Duplicate" : "Unique"; }
std::string to_string(SizeClass s) { return s == SizeClass::Large ? "Large" : "Small"; }

Variant parse_variant(const std::string& s) {
  std::string l = s;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
  if (l == "duplicate") return Variant::Duplicate;
  if (l == "unique") return Variant::Unique;
  throw ConfigError("unknown dataset variant '" + s + "' (expected duplicate|unique)");
}

SizeClass parse_size(const std::string& s) {
  std::string l = s;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
  if (l == "large") return SizeClass::Large;
  if (l == "small") return SizeClass::Small;
  throw ConfigError("unknown dataset size '" + s + "' (expected large|small)");
}

std::string BundleName::str() const { return to_string(variant) + "-" + to_string(size); }

bool is_excluded_bug_type(const std::string& bug_type) {
  return std::any_of(kExcludedTypes.begin(), kExcludedTypes.end(), [&](const char* t) { return bug_type == t; });
}

RawRelease parse_raw(const std::string& text, SizeClass size, const std::string& origin) {
  std::vector<Json> records;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    Json arr;
    try {
      arr = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw DataError(origin + ": malformed release file: " + e.what());
    }
    for (auto& r : arr) records.push_back(std::move(r));
  } else {
    records = parse_json_lines(text, origin);
  }

  RawRelease out;
  out.size = size;
  out.raw_records = records.size();
  for (std::size_t ordinal = 0; ordinal < records.size(); ++ordinal) {
    const Json& rec = records[ordinal];
    if (!rec.is_object()) {
      out.rejects.push_back({ordinal, "record is not an object", rec});
      continue;
    }
    std::string missing;
    for (const char* key : {"bugType", "projectName", "fixCommitSHA1"}) {
      if (!has_nonempty_string(rec, key)) missing += (missing.empty() ? "" : ",") + std::string(key);
    }
    if (!missing.empty()) {
      out.rejects.push_back({ordinal, "missing field: " + missing, rec});
      continue;
    }
    BugInstance b;
    b.fix_commit_sha1 = rec.at("fixCommitSHA1").get<std::string>();
    if (!is_hex40(b.fix_commit_sha1)) {
      out.rejects.push_back({ordinal, "fixCommitSHA1 is not 40 hex characters", rec});
      continue;
    }
    b.id = b.fix_commit_sha1.substr(0, 12) + ":" + std::to_string(ordinal);
    b.project_name = rec.at("projectName").get<std::string>();
    b.bug_type = rec.at("bugType").get<std::string>();
    b.source_before_fix = string_field(rec, "sourceBeforeFix");
    b.source_after_fix = string_field(rec, "sourceAfterFix");
    for (auto it = rec.begin(); it != rec.end(); ++it) {
      if (std::find_if(kKnownFields.begin(), kKnownFields.end(), [&](const char* k) { return it.key() == k; }) ==
          kKnownFields.end())
        b.extra[it.key()] = it.value();
    }
    out.instances.push_back(std::move(b));
  }
  return out;
}

RawRelease load_raw(const std::filesystem::path& path, SizeClass size) {
  if (!std::filesystem::is_regular_file(path)) throw DataError("release file not found: " + path.string());
  const auto text = read_file(path);
  auto raw = parse_raw(text, size, path.string());
  raw.source_release = path.filename().string() + "@sha256:" + sha256_hex(text);
  return raw;
}

FilterResult filter_usable(std::vector<BugInstance> instances) {
  FilterResult out;
  out.kept.reserve(instances.size());
  for (auto& b : instances) {
    if (is_excluded_bug_type(b.bug_type)) {
      ++out.dropped["excluded_type:" + b.bug_type];
    } else if (b.bug_type.empty()) {
      ++out.dropped["empty_bug_type"];
    } else if (text::normalize_whitespace(b.source_before_fix).empty() ||
               text::normalize_whitespace(b.source_after_fix).empty()) {
      ++out.dropped["empty_source"];
    } else {
      out.kept.push_back(std::move(b));
    }
  }
  return out;
}

std::vector<BugInstance> deduplicate(const std::vector<BugInstance>& instances) {
  std::unordered_set<std::string> seen;
  std::vector<BugInstance> out;
  for (const auto& b : instances) {
    if (seen.insert(pair_key(b)).second) out.push_back(b);
  }
  return out;
}

SplitSizes split_sizes(std::size_t n) {
  if (n < 10) throw DataError("cannot split " + std::to_string(n) + " instances (need at least 10)");
  const std::size_t tenth = (n + 9) / 10;
  return {n - 2 * tenth, tenth, tenth};
}

DatasetBundle split(std::vector<BugInstance> instances, std::uint64_t seed, BundleName name) {
  const auto sizes = split_sizes(instances.size());
  std::mt19937_64 rng(seed);
  portable_shuffle(instances, rng);

  DatasetBundle bundle;
  bundle.name = name;
  bundle.split_seed = seed;
  auto it = instances.begin();
  bundle.test.assign(std::make_move_iterator(it), std::make_move_iterator(it + sizes.test));
  it += sizes.test;
  bundle.valid.assign(std::make_move_iterator(it), std::make_move_iterator(it + sizes.valid));
  it += sizes.valid;
  bundle.train.assign(std::make_move_iterator(it), std::make_move_iterator(instances.end()));
  bundle.stats.train = bundle.train.size();
  bundle.stats.valid = bundle.valid.size();
  bundle.stats.test = bundle.test.size();
  return bundle;
}

std::size_t count_over_length(const std::vector<BugInstance>& instances, const tokenizer::Vocab& vocab) {
  std::size_t n = 0;
  for (const auto& b : instances) {
    if (vocab.count_code_tokens(b.source_before_fix) > kMaxCodeTokens ||
        vocab.count_code_tokens(b.source_after_fix) > kMaxCodeTokens)
      ++n;
  }
  return n;
}

CorpusStats compute_stats(const DatasetBundle& bundle, const tokenizer::Vocab& vocab) {
  CorpusStats s = bundle.stats;
  s.train = bundle.train.size();
  s.valid = bundle.valid.size();
  s.test = bundle.test.size();
  s.per_bug_type.clear();
  s.per_project.clear();
  s.over_length_510 = 0;
  for (const auto* part : {&bundle.train, &bundle.valid, &bundle.test}) {
    for (const auto& b : *part) {
      ++s.per_bug_type[b.bug_type];
      ++s.per_project[b.project_name];
    }
    s.over_length_510 += count_over_length(*part, vocab);
  }
  return s;
}

PrepareResult prepare(const RawRelease& raw, Variant variant, std::uint64_t seed) {
  CorpusStats stats;
  stats.raw = raw.raw_records;
  stats.rejected = raw.rejects.size();
  for (const auto& r : raw.rejects) ++stats.drop_reasons["reject:" + r.reason];

  auto filtered = filter_usable(raw.instances);
  for (const auto& [reason, n] : filtered.dropped) stats.drop_reasons[reason] += n;
  stats.after_type_filter = filtered.kept.size();

  std::vector<BugInstance> final_set = std::move(filtered.kept);
  if (variant == Variant::Unique) {
    auto unique = deduplicate(final_set);
    stats.drop_reasons["duplicate_pair"] = final_set.size() - unique.size();
    final_set = std::move(unique);
    stats.after_dedup = final_set.size();
  }

  PrepareResult out;
  out.bundle = split(std::move(final_set), seed, BundleName{variant, raw.size});
  out.bundle.source_release = raw.source_release;
  stats.train = out.bundle.stats.train;
  stats.valid = out.bundle.stats.valid;
  stats.test = out.bundle.stats.test;
  out.bundle.stats = stats;
  out.rejects = raw.rejects;
  return out;
}

Json CorpusStats::to_json() const {
  Json j;
  j["raw"] = raw;
  j["rejected"] = rejected;
  j["after_type_filter"] = after_type_filter;
  j["after_dedup"] = after_dedup ? Json(*after_dedup) : Json(nullptr);
  j["over_length_510"] = over_length_510;
  j["train"] = train;
  j["valid"] = valid;
  j["test"] = test;
  j["drop_reasons"] = Json(drop_reasons);
  j["per_bug_type"] = Json(per_bug_type);
  j["per_project"] = Json(per_project);
  return j;
}

CorpusStats CorpusStats::from_json(const Json& j) {
  CorpusStats s;
  s.raw = j.at("raw").get<std::size_t>();
  s.rejected = j.at("rejected").get<std::size_t>();
  s.after_type_filter = j.at("after_type_filter").get<std::size_t>();
  if (!j.at("after_dedup").is_null()) s.after_dedup = j.at("after_dedup").get<std::size_t>();
  s.over_length_510 = j.at("over_length_510").get<std::size_t>();
  s.train = j.at("train").get<std::size_t>();
  s.valid = j.at("valid").get<std::size_t>();
  s.test = j.at("test").get<std::size_t>();
  for (auto [map, key] : {std::pair{&s.drop_reasons, "drop_reasons"}, std::pair{&s.per_bug_type, "per_bug_type"},
                          std::pair{&s.per_project, "per_project"}}) {
    for (auto it = j.at(key).begin(); it != j.at(key).end(); ++it) (*map)[it.key()] = it.value().get<std::size_t>();
  }
  return s;
}

Json instance_to_json(const BugInstance& b) {
  Json j;
  j["id"] = b.id;
  j["bugType"] = b.bug_type;
  j["projectName"] = b.project_name;
  j["fixCommitSHA1"] = b.fix_commit_sha1;
  j["sourceBeforeFix"] = b.source_before_fix;
  j["sourceAfterFix"] = b.source_after_fix;
  j["extra"] = b.extra;
  return j;
}

BugInstance instance_from_json(const Json& j) {
  try {
    BugInstance b;
    b.id = j.at("id").get<std::string>();
    b.bug_type = j.at("bugType").get<std::string>();
    b.project_name = j.at("projectName").get<std::string>();
    b.fix_commit_sha1 = j.at("fixCommitSHA1").get<std::string>();
    b.source_before_fix = j.at("sourceBeforeFix").get<std::string>();
    b.source_after_fix = j.at("sourceAfterFix").get<std::string>();
    b.extra = j.value("extra", Json::object());
    return b;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed bundle record: ") + e.what());
  }
}

void export_bundle(const DatasetBundle& bundle, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    throw RuntimeFailure("cannot create bundle directory " + out_dir.string() + ": " + ec.message());

  Json files = Json::object();
  const std::vector<BugInstance>* parts[3] = {&bundle.train, &bundle.valid, &bundle.test};
  for (int i = 0; i < 3; ++i) {
    std::vector<Json> records;
    records.reserve(parts[i]->size());
    for (const auto& b : *parts[i]) records.push_back(instance_to_json(b));
    const auto bytes = to_json_lines(records);
    write_file(out_dir / kFiles[i], bytes);
    files[kFiles[i]] = sha256_hex(bytes);
  }

  Json manifest;
  manifest["name"] = bundle.name.str();
  manifest["variant"] = to_string(bundle.name.variant);
  manifest["size"] = to_string(bundle.name.size);
  manifest["split_seed"] = bundle.split_seed;
  manifest["source_release"] = bundle.source_release;
  manifest["files"] = files;
  manifest["stats"] = bundle.stats.to_json();
  write_json(out_dir / "manifest.json", manifest);
}

Json read_manifest(const std::filesystem::path& dir) {
  if (!std::filesystem::is_regular_file(dir / "manifest.json"))
    throw DataError("bundle manifest not found in " + dir.string());
  return read_json(dir / "manifest.json");
}

DatasetBundle load_bundle(const std::filesystem::path& dir) {
  const Json manifest = read_manifest(dir);
  DatasetBundle bundle;
  try {
    bundle.name = {parse_variant(manifest.at("variant").get<std::string>()),
                   parse_size(manifest.at("size").get<std::string>())};
    bundle.split_seed = manifest.at("split_seed").get<std::uint64_t>();
    bundle.source_release = manifest.at("source_release").get<std::string>();
    bundle.stats = CorpusStats::from_json(manifest.at("stats"));
  } catch (const Json::exception& e) {
    throw DataError(dir.string() + "/manifest.json: " + e.what());
  } catch (const ConfigError& e) {
    throw DataError(dir.string() + "/manifest.json: " + e.what());
  }
  std::vector<BugInstance>* parts[3] = {&bundle.train, &bundle.valid, &bundle.test};
  for (int i = 0; i < 3; ++i) {
    const auto path = dir / kFiles[i];
    const auto bytes = read_file(path);
    const auto expected = manifest.at("files").value(kFiles[i], std::string{});
    if (sha256_hex(bytes) != expected) throw DataError("checksum mismatch for " + path.string());
    for (const auto& rec : parse_json_lines(bytes, path.string())) parts[i]->push_back(instance_from_json(rec));
  }
  return bundle;
}

std::string render_stats_table(const DatasetBundle& bundle) {
  const auto& s = bundle.stats;
  std::ostringstream os;
  os << "Dataset " << bundle.name.str() << " (seed " << bundle.split_seed << ")\n";
  os << "| Stage | Count |\n|---|---|\n";
  os << "| Original | " << s.raw << " |\n";
  os << "| Rejected records | " << s.rejected << " |\n";
  os << "| Duplicate (type-filtered) | " << s.after_type_filter << " |\n";
  if (s.after_dedup) os << "| Unique (deduplicated) | " << *s.after_dedup << " |\n";
  os << "| Over " << kMaxCodeTokens << " tokens | " << s.over_length_510 << " |\n";
  os << "| Train / Valid / Test | " << s.train << " / " << s.valid << " / " << s.test << " |\n";
  if (!s.drop_reasons.empty()) {
    os << "\nDrop reasons:\n";
    for (const auto& [reason, n] : s.drop_reasons) os << "  " << reason << ": " << n << "\n";
  }
  return os.str();
}

}  // namespace apr::corpus
