#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "domfix/report.hpp"
#include "domfix/session.hpp"

// Command implementations behind the domfix binary. The commands write to
// caller-supplied streams and return the process exit code, which keeps them
// testable without spawning processes:
//   0  everything passed (or was skipped with a reason)
//   1  input could not be read or parsed, or the flags make no sense
//   2  at least one law failed

namespace domfix::cli {

struct RunConfig {
  int rank = 5;
  std::uint64_t seed = 0;
  std::string format = "text";  // text | json | dot
  std::vector<std::string> inputs;
  std::string type_name;                // restrict solve/dot to one declaration
  std::vector<std::string> suites;      // law suites over the input files
  std::vector<std::string> builtins;    // named law batteries, no input needed
};

namespace detail {

inline bool read_file(const std::string& path, std::string* out, std::string* err) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    *err = "cannot open " + path;
    return false;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  *out = ss.str();
  return true;
}

// counts per rank for one declaration, stopping early if a truncation would
// blow the poset budget
inline TypeInfo type_info(const session::SolvedDecl& s, int rank) {
  TypeInfo t;
  t.name = s.name;
  for (int r = 0; r <= rank; ++r) {
    RankInfo ri;
    ri.rank = r;
    try {
      Poset p = s.count_dom.trunc(r);
      ri.count = p.size();
      ri.elements.reserve(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) ri.elements.push_back(p.element(i).str());
    } catch (const bound_exceeded& ex) {
      t.note = "rank " + std::to_string(r) + " over materialization budget";
      break;
    }
    t.ranks.push_back(std::move(ri));
  }
  return t;
}

}  // namespace detail

inline int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.inputs.empty()) {
    err << "error: solve needs at least one declaration file\n";
    return 1;
  }
  if (cfg.format != "text" && cfg.format != "json" && cfg.format != "dot") {
    err << "error: unknown format " << cfg.format << "\n";
    return 1;
  }

  std::string source;
  for (const auto& path : cfg.inputs) {
    std::string chunk, why;
    if (!detail::read_file(path, &chunk, &why)) {
      err << "error: " << why << "\n";
      return 1;
    }
    source += chunk;
    if (!source.empty() && source.back() != '\n') source += '\n';
  }

  session::Program prog;
  try {
    prog = session::analyze(source);
  } catch (const parse_error& ex) {
    err << "error: " << ex.what() << "\n";
    return 1;
  }

  std::vector<const session::SolvedDecl*> picked;
  for (const auto& s : prog.solved)
    if (cfg.type_name.empty() || s.name == cfg.type_name) picked.push_back(&s);
  if (picked.empty()) {
    err << "error: no declaration named " << cfg.type_name << "\n";
    return 1;
  }

  if (cfg.format == "dot") {
    if (picked.size() != 1) {
      err << "error: dot output needs a single type; pass --type NAME\n";
      return 1;
    }
    try {
      out << to_dot(picked[0]->count_dom.trunc(cfg.rank), picked[0]->name);
    } catch (const bound_exceeded& ex) {
      err << "error: truncation at rank " << cfg.rank << " is over budget: " << ex.what()
          << "\n";
      return 1;
    }
    return 0;
  }

  std::vector<TypeInfo> types;
  for (const auto* s : picked) types.push_back(detail::type_info(*s, cfg.rank));

  if (cfg.format == "json") {
    out << report_json(types, LawReport{}).dump(2) << "\n";
  } else {
    render_text(out, types, LawReport{});
  }
  return 0;
}

inline int cmd_check(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.format != "text" && cfg.format != "json") {
    err << "error: check writes text or json\n";
    return 1;
  }
  if (cfg.builtins.empty() && cfg.inputs.empty()) {
    err << "error: nothing to check; pass declaration files or --builtin NAME\n";
    return 1;
  }

  LawReport rep;

  for (const auto& name : cfg.builtins) {
    if (name == "conway") {
      rep.merge(conway_laws(cfg.seed, cfg.rank));
    } else if (name == "eplaws") {
      rep.merge(ep_laws(cfg.seed, 50));
    } else if (name == "colimit") {
      rep.merge(colimit_laws(cfg.seed, 10, cfg.rank));
    } else if (name == "parameter") {
      rep.merge(parameter_laws(cfg.seed, 12));
    } else if (name == "iterate") {
      rep.merge(iterate_laws(cfg.seed, 20, cfg.rank < 4 ? cfg.rank : 4));
    } else if (name == "all") {
      rep.merge(all_laws(cfg.seed, cfg.rank));
    } else {
      err << "error: unknown builtin " << name
          << " (known: conway, eplaws, colimit, parameter, iterate, all)\n";
      return 1;
    }
  }

  if (!cfg.inputs.empty()) {
    std::string source;
    for (const auto& path : cfg.inputs) {
      std::string chunk, why;
      if (!detail::read_file(path, &chunk, &why)) {
        err << "error: " << why << "\n";
        return 1;
      }
      source += chunk;
      if (!source.empty() && source.back() != '\n') source += '\n';
    }
    session::Program prog;
    try {
      prog = session::analyze(source);
    } catch (const parse_error& ex) {
      err << "error: " << ex.what() << "\n";
      return 1;
    }

    // file checks default to every suite
    std::vector<std::string> suites = cfg.suites;
    if (suites.empty()) suites = {"session", "substitution", "unfolding"};
    for (const auto& s : suites) {
      if (s == "session") {
        rep.merge(session::check_program(prog, cfg.rank));
      } else if (s == "substitution") {
        rep.merge(session::substitution_suite(prog, cfg.rank));
      } else if (s == "unfolding") {
        rep.merge(session::unfolding_suite(prog, cfg.rank));
      } else {
        err << "error: unknown suite " << s
            << " (known: session, substitution, unfolding)\n";
        return 1;
      }
    }
  } else if (!cfg.suites.empty()) {
    err << "error: --suite needs declaration files to run on\n";
    return 1;
  }

  if (cfg.format == "json") {
    out << report_json({}, rep).dump(2) << "\n";
  } else {
    render_text(out, {}, rep);
  }
  return rep.failed() == 0 ? 0 : 2;
}

}  // namespace domfix::cli
