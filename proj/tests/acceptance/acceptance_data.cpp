// Criteria that need the published releases and the pretrained vocabulary.
// Exits 77 (skipped) when they are not configured.
#include <cstdio>

#include "data_checks.hpp"

int main() {
  using namespace apr::acceptance;
  const auto paths = DataPaths::from_env();
  if (!paths.have_releases()) {
    std::printf("NOT RUN dataset counts / over-length: set APR_SSTUBS_LARGE and APR_SSTUBS_SMALL\n");
    return 77;
  }
  PreparedReleases raw{apr::corpus::load_raw(paths.large, apr::corpus::SizeClass::Large),
                       apr::corpus::load_raw(paths.small, apr::corpus::SizeClass::Small)};
  bool failed = run_criterion("dataset counts", 300, [&] { return check_dataset_counts(raw); }) == Outcome::Fail;
  if (!paths.have_vocab()) {
    std::printf("NOT RUN over-length counts: set APR_PRETRAINED_VOCAB\n");
    return failed ? 1 : 77;
  }
  const auto vocab = apr::tokenizer::load_vocab(paths.vocab);
  failed = run_criterion("over-length counts", 0, [&] { return check_over_length(raw, vocab); }) == Outcome::Fail || failed;
  return failed ? 1 : 0;
}
