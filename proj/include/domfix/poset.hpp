#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "domfix/elem.hpp"
#include "domfix/errors.hpp"

namespace domfix {

// A finite pointed poset: canonically sorted element labels, a full order
// matrix, and the index of the unique least element. Immutable and cheap to
// copy (shared representation).
class Poset {
 public:
  Poset() : Poset(singleton_rep()) {}

  // Build from explicit data and verify the axioms. Use this for
  // user-supplied or test-supplied posets; the structural constructors below
  // produce valid orders by construction.
  static Poset from_relation(std::vector<El> elements,
                             const std::vector<std::pair<El, El>>& pairs) {
    std::sort(elements.begin(), elements.end());
    for (std::size_t i = 0; i + 1 < elements.size(); ++i)
      if (elements[i] == elements[i + 1])
        throw domain_error("duplicate element label: " + elements[i].str());
    std::size_t n = elements.size();
    if (n == 0) throw domain_error("a pointed poset needs at least one element");
    std::vector<std::vector<bool>> leq(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) leq[i][i] = true;
    auto idx = [&](const El& e) -> std::size_t {
      auto it = std::lower_bound(elements.begin(), elements.end(), e);
      if (it == elements.end() || !(*it == e))
        throw domain_error("order pair mentions unknown element: " + e.str());
      return static_cast<std::size_t>(it - elements.begin());
    };
    for (const auto& [a, b] : pairs) leq[idx(a)][idx(b)] = true;
    // Transitive closure; from_relation accepts any generating set of pairs.
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i)
        if (leq[i][k])
          for (std::size_t j = 0; j < n; ++j)
            if (leq[k][j]) leq[i][j] = true;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && leq[i][j] && leq[j][i])
          throw domain_error("order is not antisymmetric between " + elements[i].str() +
                             " and " + elements[j].str());
    std::size_t bot = n;
    for (std::size_t i = 0; i < n; ++i) {
      bool least = true;
      for (std::size_t j = 0; j < n; ++j) least = least && leq[i][j];
      if (least) {
        bot = i;
        break;
      }
    }
    if (bot == n) throw domain_error("no least element");
    auto rep = std::make_shared<Rep>();
    rep->elems = std::move(elements);
    rep->leq = std::move(leq);
    rep->bot = bot;
    return Poset(std::move(rep));
  }

  std::size_t size() const { return r_->elems.size(); }
  const std::vector<El>& elements() const { return r_->elems; }
  const El& element(std::size_t i) const { return r_->elems[i]; }

  std::optional<std::size_t> find(const El& e) const {
    auto it = std::lower_bound(r_->elems.begin(), r_->elems.end(), e);
    if (it == r_->elems.end() || !(*it == e)) return std::nullopt;
    return static_cast<std::size_t>(it - r_->elems.begin());
  }

  std::size_t index_of(const El& e) const {
    auto i = find(e);
    if (!i) throw domain_error("element not in poset: " + e.str());
    return *i;
  }

  bool contains(const El& e) const { return find(e).has_value(); }

  bool leq(std::size_t i, std::size_t j) const { return r_->leq[i][j]; }
  bool leq(const El& a, const El& b) const { return r_->leq[index_of(a)][index_of(b)]; }

  std::size_t bottom_index() const { return r_->bot; }
  const El& bottom() const { return r_->elems[r_->bot]; }

  bool same_as(const Poset& o) const {
    if (r_ == o.r_) return true;
    return r_->elems == o.r_->elems && r_->leq == o.r_->leq;
  }

  friend bool operator==(const Poset& a, const Poset& b) { return a.same_as(b); }

  std::size_t content_hash() const {
    std::size_t h = 0x51ed270b0a1f2c3dull;
    for (const El& e : r_->elems) h = h * 1099511628211ull ^ e.hash();
    for (const auto& row : r_->leq)
      for (bool b : row) h = h * 31 + (b ? 2 : 1);
    return h;
  }

  // Covering relation (i covered-by j), used for Hasse rendering.
  std::vector<std::pair<std::size_t, std::size_t>> covers() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j || !r_->leq[i][j]) continue;
        bool covered = true;
        for (std::size_t k = 0; k < n && covered; ++k)
          if (k != i && k != j && r_->leq[i][k] && r_->leq[k][j]) covered = false;
        if (covered) out.emplace_back(i, j);
      }
    return out;
  }

  // Re-verify the axioms (reflexive, transitive, antisymmetric, unique
  // bottom). Structural constructors keep these by construction; tests call
  // this on samples.
  void validate() const {
    std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i)
      if (!r_->leq[i][i]) throw domain_error("order not reflexive");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j && r_->leq[i][j] && r_->leq[j][i])
          throw domain_error("order not antisymmetric");
        if (!r_->leq[i][j]) continue;
        for (std::size_t k = 0; k < n; ++k)
          if (r_->leq[j][k] && !r_->leq[i][k]) throw domain_error("order not transitive");
      }
    for (std::size_t j = 0; j < n; ++j)
      if (!r_->leq[r_->bot][j]) throw domain_error("bottom not least");
  }

  // Internal fast path: trusted builders hand over sorted elements and a
  // valid matrix.
  struct Raw {
    std::vector<El> elems;
    std::vector<std::vector<bool>> leq;
    std::size_t bot;
  };
  static Poset from_raw(Raw raw) {
    auto rep = std::make_shared<Rep>();
    rep->elems = std::move(raw.elems);
    rep->leq = std::move(raw.leq);
    rep->bot = raw.bot;
    return Poset(std::move(rep));
  }

 private:
  struct Rep {
    std::vector<El> elems;
    std::vector<std::vector<bool>> leq;
    std::size_t bot = 0;
  };

  explicit Poset(std::shared_ptr<const Rep> r) : r_(std::move(r)) {}

  static std::shared_ptr<const Rep> singleton_rep() {
    static const std::shared_ptr<const Rep> s = [] {
      auto rep = std::make_shared<Rep>();
      rep->elems = {El::bot()};
      rep->leq = {{true}};
      rep->bot = 0;
      return rep;
    }();
    return s;
  }

  std::shared_ptr<const Rep> r_;
};

// The one-point domain.
inline Poset singleton() { return Poset(); }

namespace detail {
inline void check_poset_budget(std::size_t n) {
  if (n > current_limits().max_poset)
    throw bound_exceeded("poset would have " + std::to_string(n) +
                         " elements, over the limit of " +
                         std::to_string(current_limits().max_poset));
}
}  // namespace detail

// Coalesced sum: a fresh bottom below tagged copies of the parts.
// Tag(l, d) <= Tag(l', d') iff l = l' and d <= d'.
inline Poset labelled_sum(const std::vector<std::pair<std::string, Poset>>& parts) {
  {
    std::vector<std::string> ls;
    for (const auto& [l, p] : parts) ls.push_back(l);
    std::sort(ls.begin(), ls.end());
    for (std::size_t i = 0; i + 1 < ls.size(); ++i)
      if (ls[i] == ls[i + 1]) throw duplicate_label("duplicate summand label: " + ls[i]);
  }
  std::size_t n = 1;
  for (const auto& [l, p] : parts) n += p.size();
  detail::check_poset_budget(n);

  std::vector<El> elems;
  elems.reserve(n);
  elems.push_back(El::bot());
  // (part, original index) per element, bottom marked as part = npos.
  std::vector<std::pair<std::size_t, std::size_t>> origin;
  origin.emplace_back(static_cast<std::size_t>(-1), 0);
  for (std::size_t pi = 0; pi < parts.size(); ++pi)
    for (std::size_t k = 0; k < parts[pi].second.size(); ++k) {
      elems.push_back(El::tag(parts[pi].first, parts[pi].second.element(k)));
      origin.emplace_back(pi, k);
    }
  // Sort canonically, carrying origins along.
  std::vector<std::size_t> perm(elems.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return elems[a] < elems[b]; });
  std::vector<El> sorted;
  std::vector<std::pair<std::size_t, std::size_t>> sorted_origin;
  sorted.reserve(elems.size());
  for (std::size_t i : perm) {
    sorted.push_back(elems[i]);
    sorted_origin.push_back(origin[i]);
  }
  std::size_t bot = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i)
    if (sorted[i].is_bot()) bot = i;
  std::vector<std::vector<bool>> leq(sorted.size(), std::vector<bool>(sorted.size(), false));
  for (std::size_t i = 0; i < sorted.size(); ++i)
    for (std::size_t j = 0; j < sorted.size(); ++j) {
      if (i == j || i == bot) {
        leq[i][j] = (i == j) || i == bot;
        continue;
      }
      if (j == bot) continue;
      const auto& [pi, ki] = sorted_origin[i];
      const auto& [pj, kj] = sorted_origin[j];
      leq[i][j] = (pi == pj) && parts[pi].second.leq(ki, kj);
    }
  return Poset::from_raw({std::move(sorted), std::move(leq), bot});
}

// Componentwise product. The empty product is the one-point domain whose
// element is the empty tuple; we normalize that to the plain singleton so
// nullary products and `1` coincide.
inline Poset product(const std::vector<Poset>& ps) {
  if (ps.empty()) return singleton();
  std::size_t n = 1;
  for (const Poset& p : ps) {
    if (p.size() != 0 && n > current_limits().max_poset / p.size() + 1) n = current_limits().max_poset + 1;
    else n *= p.size();
  }
  detail::check_poset_budget(n);

  std::vector<std::vector<std::size_t>> tuples;
  std::vector<std::size_t> cur(ps.size(), 0);
  for (;;) {
    tuples.push_back(cur);
    std::size_t d = ps.size();
    while (d > 0) {
      --d;
      if (++cur[d] < ps[d].size()) break;
      cur[d] = 0;
      if (d == 0) goto done;
    }
  }
done:
  std::vector<El> elems;
  elems.reserve(tuples.size());
  for (const auto& t : tuples) {
    std::vector<El> comps;
    comps.reserve(t.size());
    for (std::size_t d = 0; d < t.size(); ++d) comps.push_back(ps[d].element(t[d]));
    elems.push_back(El::tup(std::move(comps)));
  }
  std::vector<std::size_t> perm(elems.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return elems[a] < elems[b]; });
  std::vector<El> sorted;
  std::vector<std::vector<std::size_t>> sorted_tuples;
  for (std::size_t i : perm) {
    sorted.push_back(elems[i]);
    sorted_tuples.push_back(tuples[i]);
  }
  std::size_t bot = 0;
  std::vector<std::vector<bool>> leq(sorted.size(), std::vector<bool>(sorted.size(), false));
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    bool is_bot = true;
    for (std::size_t d = 0; d < ps.size(); ++d)
      is_bot = is_bot && sorted_tuples[i][d] == ps[d].bottom_index();
    if (is_bot) bot = i;
    for (std::size_t j = 0; j < sorted.size(); ++j) {
      bool le = true;
      for (std::size_t d = 0; d < ps.size() && le; ++d)
        le = ps[d].leq(sorted_tuples[i][d], sorted_tuples[j][d]);
      leq[i][j] = le;
    }
  }
  return Poset::from_raw({std::move(sorted), std::move(leq), bot});
}

// Same elements in the same order with the same relation. Elements are kept
// sorted by every constructor, so this is equality of presentations, not just
// isomorphism.
inline bool poset_equal(const Poset& a, const Poset& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a.element(i) == b.element(i))) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      if (a.leq(i, j) != b.leq(i, j)) return false;
  return true;
}

// Test fixtures: a chain bot < a1 < a2 < ... and a flat poset bot < {ai}.
inline Poset chain_of(const std::vector<std::string>& names) {
  std::vector<El> elems{El::bot()};
  std::vector<std::pair<El, El>> pairs;
  El prev = El::bot();
  for (const auto& n : names) {
    El e = El::atom(n);
    pairs.emplace_back(prev, e);
    elems.push_back(e);
    prev = e;
  }
  return Poset::from_relation(std::move(elems), pairs);
}

inline Poset flat_of(const std::vector<std::string>& names) {
  std::vector<El> elems{El::bot()};
  std::vector<std::pair<El, El>> pairs;
  for (const auto& n : names) {
    El e = El::atom(n);
    pairs.emplace_back(El::bot(), e);
    elems.push_back(e);
  }
  return Poset::from_relation(std::move(elems), pairs);
}

// A strict monotone map between finite posets, tabulated by source index.
class MonoMap {
 public:
  MonoMap() = default;

  // Validating constructor.
  static MonoMap make(Poset src, Poset dst, std::vector<std::size_t> tab) {
    MonoMap m;
    m.src_ = std::move(src);
    m.dst_ = std::move(dst);
    m.tab_ = std::move(tab);
    if (m.tab_.size() != m.src_.size())
      throw domain_error("map table size does not match source");
    for (std::size_t t : m.tab_)
      if (t >= m.dst_.size()) throw domain_error("map table entry out of range");
    if (m.tab_[m.src_.bottom_index()] != m.dst_.bottom_index())
      throw not_strict("map does not send bottom to bottom");
    for (std::size_t i = 0; i < m.src_.size(); ++i)
      for (std::size_t j = 0; j < m.src_.size(); ++j)
        if (m.src_.leq(i, j) && !m.dst_.leq(m.tab_[i], m.tab_[j]))
          throw not_monotone("map not monotone: " + m.src_.element(i).str() + " <= " +
                             m.src_.element(j).str() + " but images are unordered");
    return m;
  }

  static MonoMap make(const Poset& src, const Poset& dst,
                      const std::function<El(const El&)>& f) {
    std::vector<std::size_t> tab(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
      El v = f(src.element(i));
      auto t = dst.find(v);
      if (!t)
        throw domain_error("map image not in target poset: " + v.str());
      tab[i] = *t;
    }
    return make(src, dst, std::move(tab));
  }

  const Poset& src() const { return src_; }
  const Poset& dst() const { return dst_; }
  const std::vector<std::size_t>& table() const { return tab_; }

  std::size_t at(std::size_t i) const { return tab_[i]; }
  El operator()(const El& e) const { return dst_.element(tab_[src_.index_of(e)]); }

  friend bool operator==(const MonoMap& f, const MonoMap& g) {
    return f.src_.same_as(g.src_) && f.dst_.same_as(g.dst_) && f.tab_ == g.tab_;
  }

 private:
  Poset src_, dst_;
  std::vector<std::size_t> tab_;
};

inline MonoMap identity_map(const Poset& p) {
  std::vector<std::size_t> tab(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) tab[i] = i;
  return MonoMap::make(p, p, std::move(tab));
}

// The least map: everything to bottom.
inline MonoMap zero_map(const Poset& src, const Poset& dst) {
  return MonoMap::make(src, dst, std::vector<std::size_t>(src.size(), dst.bottom_index()));
}

inline MonoMap compose(const MonoMap& g, const MonoMap& f) {
  if (!f.dst().same_as(g.src()))
    throw source_mismatch("composition mismatch: target of inner is not source of outer");
  std::vector<std::size_t> tab(f.src().size());
  for (std::size_t i = 0; i < tab.size(); ++i) tab[i] = g.at(f.at(i));
  return MonoMap::make(f.src(), g.dst(), std::move(tab));
}

// Pointwise order on maps with shared source and target.
inline bool map_leq(const MonoMap& f, const MonoMap& g) {
  if (!f.src().same_as(g.src()) || !f.dst().same_as(g.dst()))
    throw source_mismatch("map_leq needs maps with the same source and target");
  for (std::size_t i = 0; i < f.src().size(); ++i)
    if (!f.dst().leq(f.at(i), g.at(i))) return false;
  return true;
}

// Functorial action of labelled_sum on maps: parts must agree labelwise.
inline MonoMap sum_map(const std::vector<std::pair<std::string, MonoMap>>& parts) {
  std::vector<std::pair<std::string, Poset>> src_parts, dst_parts;
  for (const auto& [l, m] : parts) {
    src_parts.emplace_back(l, m.src());
    dst_parts.emplace_back(l, m.dst());
  }
  Poset src = labelled_sum(src_parts), dst = labelled_sum(dst_parts);
  return MonoMap::make(src, dst, [&](const El& e) -> El {
    if (e.is_bot()) return El::bot();
    for (const auto& [l, m] : parts)
      if (e.name() == l) return El::tag(l, m(e.inner()));
    throw domain_error("sum_map: unknown tag " + e.name());
  });
}

inline MonoMap prod_map(const std::vector<MonoMap>& parts) {
  std::vector<Poset> src_parts, dst_parts;
  for (const auto& m : parts) {
    src_parts.push_back(m.src());
    dst_parts.push_back(m.dst());
  }
  Poset src = product(src_parts), dst = product(dst_parts);
  return MonoMap::make(src, dst, [&](const El& e) -> El {
    std::vector<El> out;
    out.reserve(parts.size());
    for (std::size_t d = 0; d < parts.size(); ++d) out.push_back(parts[d](e.parts()[d]));
    return El::tup(std::move(out));
  });
}

// An embedding/projection pair: project . embed = id, embed . project <= id.
// Each half determines the other; projection_of recovers the projection.
struct EPPair {
  MonoMap embed;
  MonoMap project;
};

// p(y) = max { x | e(x) <= y }. Throws not_an_embedding when some y has no
// greatest approximant or when the roundtrip laws fail.
inline MonoMap projection_of(const MonoMap& e) {
  const Poset& src = e.src();
  const Poset& dst = e.dst();
  // embeddings are injective; without this, a collapsing map can produce a
  // candidate "projection" that is not even strict
  for (std::size_t x = 0; x < src.size(); ++x)
    for (std::size_t y = x + 1; y < src.size(); ++y)
      if (e.at(x) == e.at(y))
        throw not_an_embedding("not injective: " + src.element(x).str() + " and " +
                               src.element(y).str() + " collapse");
  std::vector<std::size_t> tab(dst.size());
  for (std::size_t y = 0; y < dst.size(); ++y) {
    std::size_t best = src.size();
    for (std::size_t x = 0; x < src.size(); ++x) {
      if (!dst.leq(e.at(x), y)) continue;
      if (best == src.size() || src.leq(best, x)) best = x;
    }
    if (best == src.size())
      throw not_an_embedding("no candidate below " + dst.element(y).str());
    // best was chosen greedily; verify it dominates every candidate.
    for (std::size_t x = 0; x < src.size(); ++x)
      if (dst.leq(e.at(x), y) && !src.leq(x, best))
        throw not_an_embedding("no greatest element below " + dst.element(y).str() +
                               "; not an embedding");
    tab[y] = best;
  }
  MonoMap p = MonoMap::make(dst, src, std::move(tab));
  for (std::size_t x = 0; x < src.size(); ++x)
    if (p.at(e.at(x)) != x)
      throw not_an_embedding("projection . embedding is not the identity at " +
                             src.element(x).str());
  return p;
}

inline bool is_embedding(const MonoMap& e) {
  try {
    projection_of(e);
    return true;
  } catch (const not_an_embedding&) {
    return false;
  }
}

inline EPPair ep_from_embed(MonoMap e) {
  MonoMap p = projection_of(e);
  return EPPair{std::move(e), std::move(p)};
}

// All strict monotone maps src -> dst, in lexicographic order of their
// tables over the canonical element order. Brute force with monotonicity
// pruning; guarded by the enumeration budget.
inline std::vector<MonoMap> enumerate_strict_monotone_maps(const Poset& src, const Poset& dst) {
  double budget = 1;
  for (std::size_t i = 0; i < src.size(); ++i) {
    budget *= static_cast<double>(dst.size());
    if (budget > static_cast<double>(current_limits().max_enumeration))
      throw bound_exceeded("map enumeration over budget: |dst|^|src| too large");
  }
  std::vector<MonoMap> out;
  std::vector<std::size_t> tab(src.size());
  std::function<void(std::size_t)> go = [&](std::size_t i) {
    if (i == src.size()) {
      out.push_back(MonoMap::make(src, dst, tab));
      return;
    }
    for (std::size_t v = 0; v < dst.size(); ++v) {
      if (i == src.bottom_index() && v != dst.bottom_index()) continue;
      bool ok = true;
      for (std::size_t j = 0; j < i && ok; ++j) {
        if (src.leq(j, i) && !dst.leq(tab[j], v)) ok = false;
        if (src.leq(i, j) && !dst.leq(v, tab[j])) ok = false;
      }
      if (!ok) continue;
      tab[i] = v;
      go(i + 1);
    }
  };
  go(0);
  return out;
}

// Deterministic isomorphism search: returns the lexicographically least
// order-isomorphism (as a table over canonical element order), or nullopt.
inline std::optional<MonoMap> iso_check(const Poset& a, const Poset& b) {
  if (a.size() != b.size()) return std::nullopt;
  std::size_t n = a.size();
  // Degree invariants prune most of the search.
  auto degrees = [](const Poset& p) {
    std::vector<std::pair<std::size_t, std::size_t>> d(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      std::size_t lo = 0, hi = 0;
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (p.leq(j, i)) ++lo;
        if (p.leq(i, j)) ++hi;
      }
      d[i] = {lo, hi};
    }
    return d;
  };
  auto da = degrees(a), db = degrees(b);
  std::vector<std::size_t> tab(n);
  std::vector<bool> used(n, false);
  std::function<bool(std::size_t)> go = [&](std::size_t i) -> bool {
    if (i == n) return true;
    for (std::size_t v = 0; v < n; ++v) {
      if (used[v] || da[i] != db[v]) continue;
      bool ok = true;
      for (std::size_t j = 0; j < i && ok; ++j) {
        if (a.leq(j, i) != b.leq(tab[j], v)) ok = false;
        if (a.leq(i, j) != b.leq(v, tab[j])) ok = false;
      }
      if (!ok) continue;
      tab[i] = v;
      used[v] = true;
      if (go(i + 1)) return true;
      used[v] = false;
    }
    return false;
  };
  if (!go(0)) return std::nullopt;
  return MonoMap::make(a, b, std::move(tab));
}

// Hasse diagram in DOT syntax, edges pointing upward.
inline std::string to_dot(const Poset& p, const std::string& name = "poset") {
  std::string out = "digraph \"" + name + "\" {\n  rankdir=BT;\n  node [shape=box];\n";
  for (std::size_t i = 0; i < p.size(); ++i)
    out += "  n" + std::to_string(i) + " [label=\"" + p.element(i).str() + "\"];\n";
  for (const auto& [i, j] : p.covers())
    out += "  n" + std::to_string(i) + " -> n" + std::to_string(j) + ";\n";
  out += "}\n";
  return out;
}

}  // namespace domfix
