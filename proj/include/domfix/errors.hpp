#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace domfix {

// Base class for everything this library throws on contract violations.
struct domain_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct arity_mismatch : domain_error {
  using domain_error::domain_error;
};

// Composition or application where source and target do not line up.
struct source_mismatch : domain_error {
  using domain_error::domain_error;
};

struct duplicate_label : domain_error {
  using domain_error::domain_error;
};

struct not_monotone : domain_error {
  using domain_error::domain_error;
};

struct not_strict : domain_error {
  using domain_error::domain_error;
};

// A map claimed to be an embedding has no projection half.
struct not_an_embedding : domain_error {
  using domain_error::domain_error;
};

struct value_not_in_stage : domain_error {
  using domain_error::domain_error;
};

struct cocone_mismatch : domain_error {
  using domain_error::domain_error;
};

struct invalid_link_morphism : domain_error {
  using domain_error::domain_error;
};

// Enumeration or materialization would exceed the configured limits.
struct bound_exceeded : domain_error {
  using domain_error::domain_error;
};

// A law that should hold by theorem failed its witness construction.
struct iso_not_found : domain_error {
  using domain_error::domain_error;
};

struct parse_error : domain_error {
  int line;
  int column;
  parse_error(const std::string& msg, int l, int c)
      : domain_error(msg + " at " + std::to_string(l) + ":" + std::to_string(c)),
        line(l),
        column(c) {}
};

// Global materialization limits. Chains refuse to produce stages past
// max_rank, posets refuse to grow past max_poset elements, and brute-force
// enumerations refuse to walk more than max_enumeration candidates.
struct limits {
  int max_rank = 8;
  // dense order matrices cost |P|^2 bits, so this also caps memory
  std::size_t max_poset = 20000;
  std::size_t max_enumeration = 2000000;
};

inline limits& current_limits() {
  static limits l;
  return l;
}

// RAII override, used by checks that briefly need deeper chains (the power
// identity compares against stage n*k of the fine chain).
class scoped_limits {
 public:
  explicit scoped_limits(limits l) : saved_(current_limits()) { current_limits() = l; }
  scoped_limits(const scoped_limits&) = delete;
  scoped_limits& operator=(const scoped_limits&) = delete;
  ~scoped_limits() { current_limits() = saved_; }

 private:
  limits saved_;
};

}  // namespace domfix
