#pragma once

#include <chrono>
#include <cstdio>
#include <string>

namespace apr::acceptance {

enum class Outcome { Pass, Fail, NotRun };

struct Line {
  Outcome outcome = Outcome::Fail;
  std::string detail;
};

inline const char* label(Outcome o) {
  switch (o) {
    case Outcome::Pass: return "PASS";
    case Outcome::Fail: return "FAIL";
    default: return "NOT RUN";
  }
}

// Runs one criterion, prints "<LABEL> <name> (<seconds>s): <detail>" and returns the outcome.
template <typename F>
Outcome run_criterion(const std::string& name, double budget_seconds, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Line line;
  try {
    line = body();
  } catch (const std::exception& e) {
    line = {Outcome::Fail, std::string("threw: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (line.outcome == Outcome::Pass && budget_seconds > 0 && secs > budget_seconds) {
    line.outcome = Outcome::Fail;
    line.detail += "; over the " + std::to_string(static_cast<int>(budget_seconds)) + "s budget";
  }
  std::printf("%-7s %-26s (%.2fs): %s\n", label(line.outcome), name.c_str(), secs, line.detail.c_str());
  std::fflush(stdout);
  return line.outcome;
}

}  // namespace apr::acceptance
