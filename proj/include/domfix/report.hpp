#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "domfix/laws.hpp"

// Rendering of solve results and law reports for the command line tool.
// JSON output uses ordered maps and fully determined member order, so two
// runs over the same inputs and flags produce byte-identical bytes.

namespace domfix::cli {

using ordered_json = nlohmann::ordered_json;

struct RankInfo {
  int rank = 0;
  std::size_t count = 0;
  std::vector<std::string> elements;
};

struct TypeInfo {
  std::string name;
  std::vector<RankInfo> ranks;
  // set when materialization stopped early, e.g. a truncation over budget
  std::string note;
};

inline const char* verdict_str(LawStatus s) {
  switch (s) {
    case LawStatus::Pass: return "PASS";
    case LawStatus::Fail: return "FAIL";
    case LawStatus::Skip: return "SKIP";
  }
  return "?";
}

inline ordered_json report_json(const std::vector<TypeInfo>& types, const LawReport& laws) {
  ordered_json out;
  out["types"] = ordered_json::array();
  for (const auto& t : types) {
    ordered_json jt;
    jt["name"] = t.name;
    jt["ranks"] = ordered_json::array();
    for (const auto& r : t.ranks) {
      ordered_json jr;
      jr["rank"] = r.rank;
      jr["count"] = r.count;
      jr["elements"] = r.elements;
      jt["ranks"].push_back(std::move(jr));
    }
    out["types"].push_back(std::move(jt));
  }
  out["laws"] = ordered_json::array();
  for (const auto& r : laws.results) {
    ordered_json jl;
    jl["name"] = r.instance.empty() ? r.law : r.law + " @ " + r.instance;
    jl["verdict"] = verdict_str(r.status);
    if (!r.detail.empty()) jl["counterexample"] = r.detail;
    out["laws"].push_back(std::move(jl));
  }
  return out;
}

inline void render_text(std::ostream& os, const std::vector<TypeInfo>& types,
                        const LawReport& laws) {
  for (const auto& t : types) {
    os << t.name << "\n";
    for (const auto& r : t.ranks) os << "  rank " << r.rank << ": " << r.count << "\n";
    if (!t.note.empty()) os << "  (" << t.note << ")\n";
  }
  for (const auto& r : laws.results) {
    os << verdict_str(r.status) << "  " << r.law;
    if (!r.instance.empty()) os << " @ " << r.instance;
    if (!r.detail.empty()) os << "  [" << r.detail << "]";
    os << "\n";
  }
  if (!laws.results.empty())
    os << laws.passed() << " passed, " << laws.failed() << " failed, " << laws.skipped()
       << " skipped\n";
}

}  // namespace domfix::cli
