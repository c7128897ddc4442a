#include "apr/eval/metrics.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "apr/common/checksum.hpp"
#include "apr/common/errors.hpp"
#include "apr/common/text.hpp"
#include "apr/corpus/corpus.hpp"
#include "apr/tokenizer/vocab.hpp"

namespace apr::eval {
namespace {

constexpr std::size_t kBucketEdges[] = {20, 50, 100};

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) out += ", ";
    out += id;
  }
  return out;
}

Json ratio_json(const Ratio& r) {
  Json j;
  j["matched"] = r.matched;
  j["total"] = r.total;
  j["percent"] = r.percent();
  return j;
}

Ratio ratio_from(const Json& j) { return {j.at("matched").get<long long>(), j.at("total").get<long long>()}; }

Json breakdown_json(const Breakdown& b) {
  Json j = Json::object();
  for (const auto& [k, r] : b) j[k] = ratio_json(r);
  return j;
}

Breakdown breakdown_from(const Json& j) {
  Breakdown b;
  for (const auto& [k, v] : j.items()) b[k] = ratio_from(v);
  return b;
}

}  // namespace

bool exact_match(std::string_view predicted, std::string_view reference) {
  return text::normalize_whitespace(predicted) == text::normalize_whitespace(reference);
}

std::string Ratio::percent() const { return text::percent_2dp(matched, total); }

std::vector<Outcome> join_outcomes(std::span<const PredictionRecord> predictions,
                                   std::span<const corpus::BugInstance> test) {
  std::unordered_map<std::string, const PredictionRecord*> by_id;
  std::vector<std::string> duplicates;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.instance_id, &p).second) duplicates.push_back(p.instance_id);
  }
  std::unordered_set<std::string> test_ids;
  std::vector<std::string> missing;
  for (const auto& b : test) {
    test_ids.insert(b.id);
    if (!by_id.count(b.id)) missing.push_back(b.id);
  }
  std::vector<std::string> unknown;
  for (const auto& p : predictions)
    if (!test_ids.count(p.instance_id)) unknown.push_back(p.instance_id);

  std::string problems;
  auto note = [&](const char* what, std::vector<std::string> ids) {
    if (ids.empty()) return;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    problems += std::string(problems.empty() ? "" : "; ") + what + " (" + std::to_string(ids.size()) + "): " +
                join_ids(ids);
  };
  note("missing predictions", missing);
  note("duplicate predictions", duplicates);
  note("predictions for ids not in the test split", unknown);
  if (!problems.empty()) throw DataError("prediction/test mismatch: " + problems);

  std::vector<Outcome> out;
  out.reserve(test.size());
  for (const auto& b : test) {
    const auto* p = by_id.at(b.id);
    Outcome o;
    o.instance_id = b.id;
    o.bug_type = b.bug_type;
    o.project = b.project_name;
    o.commit = b.fix_commit_sha1;
    o.reference = b.source_after_fix;
    if (const auto* top = p->top()) o.prediction = top->text;
    o.matched = p->top() != nullptr && exact_match(o.prediction, o.reference);
    out.push_back(std::move(o));
  }
  return out;
}

Breakdown breakdown_by_bug_type(std::span<const Outcome> outcomes) {
  Breakdown b;
  for (const auto& o : outcomes) {
    auto& r = b[o.bug_type];
    ++r.total;
    if (o.matched) ++r.matched;
  }
  return b;
}

std::vector<RankedEntry> top_k(const Breakdown& breakdown, std::size_t k) {
  std::vector<RankedEntry> entries;
  for (const auto& [key, r] : breakdown) entries.push_back({key, r});
  // Compare matched/total exactly by cross-multiplication.
  std::sort(entries.begin(), entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
    const auto lhs = static_cast<__int128>(a.ratio.matched) * b.ratio.total;
    const auto rhs = static_cast<__int128>(b.ratio.matched) * a.ratio.total;
    if (lhs != rhs) return lhs > rhs;
    if (a.ratio.total != b.ratio.total) return a.ratio.total > b.ratio.total;
    return a.key < b.key;
  });
  if (entries.size() > k) entries.resize(k);
  return entries;
}

ProjectBreakdown breakdown_by_project(std::span<const Outcome> outcomes, std::span<const corpus::BugInstance> train) {
  ProjectBreakdown out;
  for (const auto& o : outcomes) {
    auto& r = out.per_project[o.project];
    ++r.total;
    if (o.matched) ++r.matched;
  }
  std::set<std::string> seen;
  for (const auto& b : train) seen.insert(b.project_name);
  for (const auto& [project, r] : out.per_project)
    if (!seen.count(project)) out.zero_shot.push_back({project, r});
  return out;
}

std::optional<std::size_t> length_bucket(std::size_t length) {
  if (length == 0) return std::nullopt;
  std::size_t i = 0;
  while (i < std::size(kBucketEdges) && length > kBucketEdges[i]) ++i;
  return i;
}

LengthAnalysis length_analysis(std::span<const Outcome> outcomes, const tokenizer::Vocab& vocab, std::size_t top_n) {
  LengthAnalysis out;
  out.buckets = {{"[1,20]", 0, 20, {}}, {"(20,50]", 20, 50, {}}, {"(50,100]", 50, 100, {}}, {"(100,inf)", 100, 0, {}}};
  for (const auto& o : outcomes) {
    const std::size_t length = vocab.count_code_tokens(o.reference);
    if (const auto b = length_bucket(length)) {
      ++out.buckets[*b].ratio.total;
      if (o.matched) ++out.buckets[*b].ratio.matched;
    }
    if (o.matched && length > 0) out.longest.push_back({o.project, o.commit.substr(0, 12), length, o.instance_id});
  }
  std::sort(out.longest.begin(), out.longest.end(), [](const LongPatch& a, const LongPatch& b) {
    if (a.length != b.length) return a.length > b.length;
    return a.instance_id < b.instance_id;
  });
  if (out.longest.size() > top_n) out.longest.resize(top_n);
  return out;
}

std::vector<std::string> novelty_check(std::span<const Outcome> outcomes, std::span<const corpus::BugInstance> train) {
  std::unordered_set<std::string> known;
  known.reserve(train.size() * 2);
  for (const auto& b : train) {
    known.insert(text::normalize_whitespace(b.source_after_fix));
    known.insert(text::normalize_whitespace(b.source_before_fix));
  }
  std::vector<std::string> novel;
  for (const auto& o : outcomes)
    if (o.matched && !known.count(text::normalize_whitespace(o.prediction))) novel.push_back(o.instance_id);
  return novel;
}

std::string split_checksum(std::span<const corpus::BugInstance> split) {
  std::vector<Json> records;
  records.reserve(split.size());
  for (const auto& b : split) records.push_back(corpus::instance_to_json(b));
  return sha256_hex(to_json_lines(records));
}

Json EvaluationReport::to_json() const {
  Json j;
  j["dataset"] = dataset;
  j["approach"] = approach;
  j["split_checksum"] = split_checksum;
  j["matched"] = matched;
  j["total"] = total;
  j["accuracy"] = accuracy();
  j["accuracy_percent"] = Ratio{matched, total}.percent();
  j["per_bug_type"] = breakdown_json(per_bug_type);
  j["per_project"] = breakdown_json(per_project.per_project);
  Json zs = Json::array();
  for (const auto& e : per_project.zero_shot) {
    Json z = ratio_json(e.ratio);
    z["project"] = e.key;
    zs.push_back(z);
  }
  j["zero_shot_projects"] = zs;
  Json buckets = Json::array();
  for (const auto& b : lengths.buckets) {
    Json x = ratio_json(b.ratio);
    x["bucket"] = b.label;
    buckets.push_back(x);
  }
  j["length_buckets"] = buckets;
  Json longest = Json::array();
  for (const auto& p : lengths.longest) {
    Json x;
    x["project"] = p.project;
    x["commit"] = p.commit_prefix;
    x["length"] = p.length;
    x["instance_id"] = p.instance_id;
    longest.push_back(x);
  }
  j["longest_patches"] = longest;
  j["novel_fixes"] = novel_fixes;
  j["config"] = config;
  return j;
}

EvaluationReport EvaluationReport::from_json(const Json& j) {
  EvaluationReport r;
  r.dataset = j.at("dataset").get<std::string>();
  r.approach = j.at("approach").get<std::string>();
  r.split_checksum = j.at("split_checksum").get<std::string>();
  r.matched = j.at("matched").get<long long>();
  r.total = j.at("total").get<long long>();
  r.per_bug_type = breakdown_from(j.at("per_bug_type"));
  r.per_project.per_project = breakdown_from(j.at("per_project"));
  for (const auto& z : j.at("zero_shot_projects")) r.per_project.zero_shot.push_back({z.at("project"), ratio_from(z)});
  std::size_t low = 0;
  for (const auto& b : j.at("length_buckets")) {
    LengthBucket bucket;
    bucket.label = b.at("bucket").get<std::string>();
    bucket.low = low;
    bucket.high = r.lengths.buckets.size() < std::size(kBucketEdges) ? kBucketEdges[r.lengths.buckets.size()] : 0;
    bucket.ratio = ratio_from(b);
    low = bucket.high;
    r.lengths.buckets.push_back(bucket);
  }
  for (const auto& p : j.at("longest_patches"))
    r.lengths.longest.push_back({p.at("project"), p.at("commit"), p.at("length").get<std::size_t>(), p.at("instance_id")});
  r.novel_fixes = j.at("novel_fixes").get<std::vector<std::string>>();
  r.config = j.value("config", Json::object());
  if (r.matched < 0 || r.matched > r.total) throw DataError("report: matched exceeds total");
  return r;
}

EvaluationReport score(std::span<const PredictionRecord> predictions, std::span<const corpus::BugInstance> test,
                       std::span<const corpus::BugInstance> train, const tokenizer::Vocab& vocab,
                       const ScoreOptions& options) {
  const auto outcomes = join_outcomes(predictions, test);
  EvaluationReport r;
  r.dataset = options.dataset;
  r.approach = options.approach;
  r.split_checksum = split_checksum(test);
  r.total = static_cast<long long>(outcomes.size());
  for (const auto& o : outcomes)
    if (o.matched) ++r.matched;
  r.per_bug_type = breakdown_by_bug_type(outcomes);
  r.per_project = breakdown_by_project(outcomes, train);
  r.lengths = length_analysis(outcomes, vocab, options.longest);
  r.novel_fixes = novelty_check(outcomes, train);
  return r;
}

}  // namespace apr::eval
