#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "progsim/simulation.hpp"

namespace progsim {

/// Process exit codes shared by every verdict-bearing command.
enum ExitCode : int { kExitYes = 0, kExitNo = 1, kExitUnknown = 2, kExitInputError = 3 };

inline int exit_code(Verdict v) {
  switch (v) {
    case Verdict::Yes: return kExitYes;
    case Verdict::No: return kExitNo;
    case Verdict::Unknown: return kExitUnknown;
  }
  return kExitUnknown;
}

/// Result of one CLI command. Timing is only emitted on request so that
/// reports stay byte-identical between runs.
struct RunReport {
  std::string command;
  Verdict verdict = Verdict::Yes;
  nlohmann::json bounds = nlohmann::json::object();
  nlohmann::json witness;  // null when there is none
  std::string note;
  std::vector<std::pair<std::string, double>> timing;
  bool emit_timing = false;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["command"] = command;
    j["verdict"] = std::string(to_string(verdict));
    if (!bounds.empty()) j["bounds"] = bounds;
    if (!witness.is_null()) j["witness"] = witness;
    if (!note.empty()) j["note"] = note;
    if (emit_timing) {
      nlohmann::json t = nlohmann::json::array();
      for (const auto& [phase, ms] : timing) t.push_back({{"phase", phase}, {"ms", ms}});
      j["timing"] = t;
    }
    return j;
  }
};

/// Wall-clock phases for RunReport::timing.
class PhaseTimer {
 public:
  explicit PhaseTimer(RunReport& r) : report_(r), start_(std::chrono::steady_clock::now()) {}

  void lap(std::string phase) {
    auto now = std::chrono::steady_clock::now();
    report_.timing.emplace_back(std::move(phase), std::chrono::duration<double, std::milli>(now - start_).count());
    start_ = now;
  }

 private:
  RunReport& report_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace progsim
