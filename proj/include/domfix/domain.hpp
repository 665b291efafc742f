#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "domfix/elem.hpp"
#include "domfix/errors.hpp"
#include "domfix/poset.hpp"

// Functor expressions over pointed posets, domains (finite posets, bilimits
// of embedding chains, and structural sums/products over them), and maps
// between domains. Everything is immutable and interned, so equal
// constructions share representation and caches.

namespace domfix {

class Domain;
class FunctorExpr;
class DomainMap;
struct DomainEP;
struct ChainRep;
struct CompactElt;

Domain apply_obj(const FunctorExpr& f, const std::vector<Domain>& args);
DomainMap apply_mor(const FunctorExpr& f, const std::vector<DomainMap>& fs);

// ---------------------------------------------------------------------------
// Functor expressions.
//
//   Const(D) | Arg(i) | Sum[l1: F1, ...] | Prod[F1, ...] |
//   Compose(outer, inners) | Dagger(body)
//
// Dagger binds the LAST argument of its body: Dagger(body) has arity one
// less than body and sends args to the least fixed point of
// X |-> body(args, X).
// ---------------------------------------------------------------------------

enum class FK : std::uint8_t { Const, Arg, Sum, Prod, Compose, Dagger };

class FunctorExpr {
 public:
  FunctorExpr() = default;

  static FunctorExpr constant(Domain d, std::size_t arity);
  static FunctorExpr constant_poset(Poset p, std::size_t arity);

  static FunctorExpr arg(std::size_t index, std::size_t arity);

  static FunctorExpr sum(std::vector<std::pair<std::string, FunctorExpr>> parts);

  static FunctorExpr prod(std::vector<FunctorExpr> factors);

  // kids[0] = outer (arity = #inners), kids[1..] = inners (all same arity).
  static FunctorExpr compose(FunctorExpr outer, std::vector<FunctorExpr> inners);

  static FunctorExpr dagger(FunctorExpr body);

  bool valid() const { return n_ != nullptr; }
  FK kind() const { return n_->kind; }
  std::size_t arity() const { return n_->arity; }
  const Domain& const_value() const { return n_->cval[0]; }
  std::size_t arg_index() const { return n_->index; }
  const std::vector<std::string>& labels() const { return n_->labels; }
  const std::vector<FunctorExpr>& children() const { return n_->kids; }
  const FunctorExpr& body() const { return n_->kids[0]; }  // Dagger

  // Bitmask of argument indices the expression actually uses.
  std::uint64_t used_args() const { return n_->uses; }

  std::size_t hash() const { return n_->hash; }

  // Interned: structural equality coincides with pointer equality.
  bool same_as(const FunctorExpr& o) const { return n_ == o.n_; }
  friend bool operator==(const FunctorExpr& a, const FunctorExpr& b) { return a.n_ == b.n_; }

  const void* id() const { return n_.get(); }

  // Substitute repl[i] for Arg(i). All repl share one arity, which becomes
  // the arity of the result. Compose nodes are flattened by substitution and
  // closed subtrees are folded to constants, so any two expressions with the
  // same normal form become pointer-equal.
  FunctorExpr substitute(const std::vector<FunctorExpr>& repl) const;

  // Same expression over a wider argument list (indices unchanged).
  FunctorExpr substitute_widen(std::size_t new_arity) const;

  // The closed unary functor X |-> f(args, X).
  FunctorExpr partial_apply(const std::vector<Domain>& args) const;

  std::string str() const;

 private:
  struct Node {
    FK kind;
    std::size_t arity = 0;
    std::vector<Domain> cval;  // Const payload (vector to dodge incomplete type)
    std::size_t index = 0;
    std::vector<std::string> labels;
    std::vector<FunctorExpr> kids;
    std::uint64_t uses = 0;
    std::size_t hash = 0;
  };

  explicit FunctorExpr(std::shared_ptr<const Node> n) : n_(std::move(n)) {}

  static FunctorExpr intern(Node n);
  static bool node_equal(const Node& a, const Node& b);

  std::shared_ptr<const Node> n_;

  friend struct ChainRep;
};

// ---------------------------------------------------------------------------
// Domains.
// ---------------------------------------------------------------------------

enum class DK : std::uint8_t { Finite, Sum, Prod, Bilimit };

class Domain {
 public:
  Domain() : Domain(finite(Poset())) {}

  static Domain finite(Poset p);
  static Domain sum(std::vector<std::pair<std::string, Domain>> parts);
  static Domain prod(std::vector<Domain> parts);
  static Domain bilimit(std::shared_ptr<ChainRep> chain);

  DK kind() const { return r_->kind; }
  bool is_finite() const { return r_->kind == DK::Finite; }
  const Poset& poset() const {
    if (r_->kind != DK::Finite) throw domain_error("not a finite domain");
    return r_->fin;
  }
  const std::vector<std::string>& labels() const { return r_->labels; }
  const std::vector<Domain>& parts() const { return r_->parts; }
  const std::shared_ptr<ChainRep>& chain() const {
    if (r_->kind != DK::Bilimit) throw domain_error("not a bilimit domain");
    return r_->chain;
  }

  bool same_as(const Domain& o) const { return r_ == o.r_; }
  friend bool operator==(const Domain& a, const Domain& b) { return a.r_ == b.r_; }
  const void* id() const { return r_.get(); }
  std::size_t hash() const { return r_->hash; }

  El bottom() const;

  // True when the element denotes a member of this domain (for bilimits:
  // resolvable within the rank limit).
  bool el_valid(const El& e) const;

  // The domain's own partial order on element labels; knob-free.
  bool el_leq(const El& a, const El& b) const;

  // Finite snapshot: all elements whose every nested chain rank is <= r.
  // Exact (r-independent) whenever no bilimit is involved; for bilimits with
  // finite stages it is the rank-r compact truncation.
  Poset trunc(int r) const;

  // Inclusion trunc(r) -> trunc(r+1).
  MonoMap trunc_incl(int r) const;

  std::string brief() const;

 private:
  struct Rep {
    DK kind;
    Poset fin;
    std::vector<std::string> labels;
    std::vector<Domain> parts;
    std::shared_ptr<ChainRep> chain;
    std::size_t hash = 0;
    mutable std::map<int, Poset> trunc_memo;
    mutable std::map<int, MonoMap> trunc_incl_memo;
  };

  explicit Domain(std::shared_ptr<Rep> r) : r_(std::move(r)) {}

  std::shared_ptr<Rep> r_;
};

// ---------------------------------------------------------------------------
// Maps between domains: evaluators on element labels, with a memo table.
// Finite restrictions (tables on truncations) provide the checkable views.
// ---------------------------------------------------------------------------

class DomainMap {
 public:
  DomainMap() = default;
  DomainMap(Domain src, Domain dst, std::function<El(const El&)> f, std::string desc = "")
      : src_(std::move(src)),
        dst_(std::move(dst)),
        f_(std::move(f)),
        desc_(std::move(desc)),
        memo_(std::make_shared<std::map<El, El>>()) {}

  bool valid() const { return static_cast<bool>(f_); }
  const Domain& src() const { return src_; }
  const Domain& dst() const { return dst_; }
  const std::string& desc() const { return desc_; }

  El operator()(const El& e) const {
    auto it = memo_->find(e);
    if (it != memo_->end()) return it->second;
    El out = f_(e);
    memo_->emplace(e, out);
    return out;
  }

  // Restriction to truncations as a checked strict monotone table.
  MonoMap table(int r_src, int r_dst) const {
    Poset sp = src_.trunc(r_src);
    Poset dp = dst_.trunc(r_dst);
    std::vector<std::size_t> tab(sp.size());
    for (std::size_t i = 0; i < sp.size(); ++i) {
      El out = (*this)(sp.element(i));
      auto j = dp.find(out);
      if (!j)
        throw value_not_in_stage("image " + out.str() + " not inside target truncation at rank " +
                                 std::to_string(r_dst));
      tab[i] = *j;
    }
    return MonoMap::make(sp, dp, std::move(tab));
  }

 private:
  Domain src_, dst_;
  std::function<El(const El&)> f_;
  std::string desc_;
  std::shared_ptr<std::map<El, El>> memo_;
};

struct DomainEP {
  DomainMap embed;
  DomainMap project;
};

inline DomainMap didentity(const Domain& d) {
  return DomainMap(d, d, [](const El& e) { return e; }, "id");
}

inline DomainMap dzero(const Domain& src, const Domain& dst) {
  El b = dst.bottom();
  return DomainMap(src, dst, [b](const El&) { return b; }, "0");
}

inline DomainMap dcompose(const DomainMap& g, const DomainMap& f) {
  if (!f.dst().same_as(g.src()))
    throw source_mismatch("domain map composition mismatch");
  return DomainMap(f.src(), g.dst(), [g, f](const El& e) { return g(f(e)); },
                   g.desc() + "." + f.desc());
}

// ---------------------------------------------------------------------------
// Chains of embeddings and their bilimits.
// ---------------------------------------------------------------------------

struct CompactElt {
  std::shared_ptr<ChainRep> chain;
  int rank = 0;
  El value;

  friend bool operator==(const CompactElt& a, const CompactElt& b) {
    return a.chain == b.chain && a.rank == b.rank && a.value == b.value;
  }
};

// One omega-chain of embeddings. Either generated by a closed unary functor
// from a seed link K -> F(K), or an explicitly generated chain (used for the
// simultaneous solution of mutual systems).
struct ChainRep : std::enable_shared_from_this<ChainRep> {
  bool is_link = false;
  Domain seed;
  DomainEP seed_step;  // K -> stage(1)
  FunctorExpr fun;     // unary, only for links

  // For explicit chains: next(n) yields (stage n, step n-1 -> n), n >= 1.
  std::function<std::pair<Domain, DomainEP>(int)> next;

  // memoized ladder
  std::vector<Domain> stages_;
  std::vector<DomainEP> steps_;

  // label -> normalized (rank, stage value)
  std::map<El, std::pair<int, El>> label_index;

  std::map<int, Poset> trunc_memo;
  std::map<int, MonoMap> trunc_incl_memo;

  Domain stage(int n);
  const DomainEP& step(int n);  // stage(n) -> stage(n+1)

  // Compose step embeddings/projections between ranks.
  El lift_value(int from, int to, El v);     // from <= to, embeds
  El lower_value(int from, int to, El v);    // from >= to, projects

  std::pair<int, El> normalize(int n, El v);

  void register_compact(int rank, const El& value);
  std::pair<int, El> resolve(const El& label);
  bool try_resolve(const El& label, std::pair<int, El>& out);

  Poset trunc(int r);
  MonoMap trunc_incl(int r);
};

inline Domain bilimit_domain(const std::shared_ptr<ChainRep>& c) { return Domain::bilimit(c); }

// Canonical bottom-seeded link for a closed unary functor. Interned by the
// functor, so equal functors give the identical chain object.
inline std::shared_ptr<ChainRep> fix_link(const FunctorExpr& fun);

// General link: seed K with embedding k : K -> fun(K).
inline std::shared_ptr<ChainRep> make_link(const Domain& seed, const DomainEP& k,
                                           const FunctorExpr& fun);

// Explicit chain from a seed and a generator.
inline std::shared_ptr<ChainRep> explicit_chain(
    Domain seed, std::function<std::pair<Domain, DomainEP>(int)> next);

CompactElt inject(const std::shared_ptr<ChainRep>& chain, int n, const El& v);
El project_to(const CompactElt& c, int n);
bool compact_leq(const CompactElt& a, const CompactElt& b);

// kappa_n and its projection as domain maps.
DomainMap inject_map(const std::shared_ptr<ChainRep>& chain, int n);
DomainMap project_map(const std::shared_ptr<ChainRep>& chain, int n);

// Weak-fixed-point witnesses of a link: fold : F(lim) -> lim, unfold its
// inverse. Mutually inverse strict order-isomorphisms on compacts.
DomainMap fold_map(const std::shared_ptr<ChainRep>& link);
DomainMap unfold_map(const std::shared_ptr<ChainRep>& link);

// ===========================================================================
// Implementation.
// ===========================================================================

// ----- FunctorExpr interning -----

inline bool FunctorExpr::node_equal(const Node& a, const Node& b) {
  if (a.kind != b.kind || a.arity != b.arity || a.index != b.index) return false;
  if (a.labels != b.labels) return false;
  if (a.cval.size() != b.cval.size()) return false;
  for (std::size_t i = 0; i < a.cval.size(); ++i)
    if (!a.cval[i].same_as(b.cval[i])) return false;
  if (a.kids.size() != b.kids.size()) return false;
  for (std::size_t i = 0; i < a.kids.size(); ++i)
    if (!a.kids[i].same_as(b.kids[i])) return false;
  return true;
}

inline FunctorExpr FunctorExpr::intern(Node n) {
  static std::unordered_multimap<std::size_t, std::shared_ptr<const Node>> registry;
  std::size_t h = 0xcbf29ce484222325ull ^ static_cast<std::size_t>(n.kind);
  h = h * 1099511628211ull ^ n.arity;
  h = h * 1099511628211ull ^ n.index;
  for (const auto& l : n.labels) h = h * 1099511628211ull ^ std::hash<std::string>{}(l);
  for (const auto& d : n.cval) h = h * 1099511628211ull ^ d.hash();
  for (const auto& k : n.kids) h = h * 1099511628211ull ^ k.hash();
  n.hash = h;
  auto [lo, hi] = registry.equal_range(h);
  for (auto it = lo; it != hi; ++it)
    if (node_equal(*it->second, n)) return FunctorExpr(it->second);
  auto sp = std::make_shared<const Node>(std::move(n));
  registry.emplace(h, sp);
  return FunctorExpr(sp);
}

inline FunctorExpr FunctorExpr::constant(Domain d, std::size_t arity) {
  Node n;
  n.kind = FK::Const;
  n.arity = arity;
  n.cval.push_back(std::move(d));
  return intern(std::move(n));
}

inline FunctorExpr FunctorExpr::constant_poset(Poset p, std::size_t arity) {
  return constant(Domain::finite(std::move(p)), arity);
}

inline FunctorExpr FunctorExpr::arg(std::size_t index, std::size_t arity) {
  if (index >= arity) throw arity_mismatch("argument index out of range");
  Node n;
  n.kind = FK::Arg;
  n.arity = arity;
  n.index = index;
  n.uses = std::uint64_t{1} << index;
  return intern(std::move(n));
}

inline FunctorExpr FunctorExpr::sum(std::vector<std::pair<std::string, FunctorExpr>> parts) {
  if (parts.empty()) throw arity_mismatch("sum needs at least one summand");
  Node n;
  n.kind = FK::Sum;
  n.arity = parts[0].second.arity();
  for (auto& [l, f] : parts) {
    if (f.arity() != n.arity) throw arity_mismatch("sum parts disagree on arity");
    for (const auto& prev : n.labels)
      if (prev == l) throw duplicate_label("duplicate summand label: " + l);
    n.labels.push_back(l);
    n.uses |= f.used_args();
    n.kids.push_back(std::move(f));
  }
  return intern(std::move(n));
}

inline FunctorExpr FunctorExpr::prod(std::vector<FunctorExpr> factors) {
  if (factors.empty()) throw arity_mismatch("prod needs at least one factor; use constant for 1");
  Node n;
  n.kind = FK::Prod;
  n.arity = factors[0].arity();
  for (auto& f : factors) {
    if (f.arity() != n.arity) throw arity_mismatch("prod factors disagree on arity");
    n.uses |= f.used_args();
    n.kids.push_back(std::move(f));
  }
  return intern(std::move(n));
}

inline FunctorExpr FunctorExpr::compose(FunctorExpr outer, std::vector<FunctorExpr> inners) {
  if (outer.arity() != inners.size())
    throw arity_mismatch("compose: outer arity must equal number of inners");
  if (inners.empty()) return outer;  // nothing to feed; outer must be closed of arity 0
  Node n;
  n.kind = FK::Compose;
  n.arity = inners[0].arity();
  n.kids.push_back(std::move(outer));
  for (auto& f : inners) {
    if (f.arity() != n.arity) throw arity_mismatch("compose inners disagree on arity");
    n.uses |= f.used_args();
    n.kids.push_back(std::move(f));
  }
  return intern(std::move(n));
}

inline FunctorExpr FunctorExpr::dagger(FunctorExpr body) {
  if (body.arity() < 1) throw arity_mismatch("dagger body needs at least one argument");
  Node n;
  n.kind = FK::Dagger;
  n.arity = body.arity() - 1;
  n.uses = body.used_args() & ((std::uint64_t{1} << n.arity) - 1);
  n.kids.push_back(std::move(body));
  return intern(std::move(n));
}

// ----- Domain interning -----

inline Domain Domain::finite(Poset p) {
  static std::unordered_multimap<std::size_t, std::shared_ptr<Rep>> registry;
  std::size_t h = p.content_hash();
  auto [lo, hi] = registry.equal_range(h);
  for (auto it = lo; it != hi; ++it)
    if (it->second->fin.same_as(p)) return Domain(it->second);
  auto rep = std::make_shared<Rep>();
  rep->kind = DK::Finite;
  rep->fin = std::move(p);
  rep->hash = h;
  registry.emplace(h, rep);
  return Domain(rep);
}

inline Domain Domain::sum(std::vector<std::pair<std::string, Domain>> parts) {
  {
    std::vector<std::string> seen;
    for (const auto& [l, d] : parts) {
      for (const auto& s : seen)
        if (s == l) throw duplicate_label("duplicate summand label: " + l);
      seen.push_back(l);
    }
  }
  bool all_fin = true;
  for (const auto& [l, d] : parts) all_fin = all_fin && d.is_finite();
  if (all_fin) {
    std::vector<std::pair<std::string, Poset>> ps;
    for (const auto& [l, d] : parts) ps.emplace_back(l, d.poset());
    return finite(labelled_sum(ps));
  }
  static std::unordered_multimap<std::size_t, std::shared_ptr<Rep>> registry;
  std::size_t h = 0x9e3779b97f4a7c15ull;
  for (const auto& [l, d] : parts) {
    h = h * 1099511628211ull ^ std::hash<std::string>{}(l);
    h = h * 1099511628211ull ^ reinterpret_cast<std::size_t>(d.id());
  }
  auto [lo, hi] = registry.equal_range(h);
  for (auto it = lo; it != hi; ++it) {
    const Rep& r = *it->second;
    if (r.parts.size() != parts.size()) continue;
    bool eq = true;
    for (std::size_t i = 0; i < parts.size() && eq; ++i)
      eq = r.labels[i] == parts[i].first && r.parts[i].same_as(parts[i].second);
    if (eq) return Domain(it->second);
  }
  auto rep = std::make_shared<Rep>();
  rep->kind = DK::Sum;
  for (auto& [l, d] : parts) {
    rep->labels.push_back(l);
    rep->parts.push_back(std::move(d));
  }
  rep->hash = h;
  registry.emplace(h, rep);
  return Domain(rep);
}

inline Domain Domain::prod(std::vector<Domain> parts) {
  bool all_fin = true;
  for (const auto& d : parts) all_fin = all_fin && d.is_finite();
  if (all_fin) {
    std::vector<Poset> ps;
    for (const auto& d : parts) ps.push_back(d.poset());
    return finite(product(ps));
  }
  static std::unordered_multimap<std::size_t, std::shared_ptr<Rep>> registry;
  std::size_t h = 0x517cc1b727220a95ull;
  for (const auto& d : parts) h = h * 1099511628211ull ^ reinterpret_cast<std::size_t>(d.id());
  auto [lo, hi] = registry.equal_range(h);
  for (auto it = lo; it != hi; ++it) {
    const Rep& r = *it->second;
    if (r.parts.size() != parts.size()) continue;
    bool eq = true;
    for (std::size_t i = 0; i < parts.size() && eq; ++i) eq = r.parts[i].same_as(parts[i]);
    if (eq) return Domain(it->second);
  }
  auto rep = std::make_shared<Rep>();
  rep->kind = DK::Prod;
  rep->parts = std::move(parts);
  rep->hash = h;
  registry.emplace(h, rep);
  return Domain(rep);
}

inline Domain Domain::bilimit(std::shared_ptr<ChainRep> chain) {
  static std::map<const ChainRep*, std::shared_ptr<Rep>> registry;
  auto it = registry.find(chain.get());
  if (it != registry.end()) return Domain(it->second);
  auto rep = std::make_shared<Rep>();
  rep->kind = DK::Bilimit;
  rep->chain = chain;
  rep->hash = reinterpret_cast<std::size_t>(chain.get()) ^ 0xb111ull;
  registry.emplace(chain.get(), rep);
  return Domain(rep);
}

// ----- apply_obj -----

namespace detail {
struct ApplyKey {
  const void* f;
  std::vector<const void*> args;
  bool operator==(const ApplyKey& o) const = default;
};
struct ApplyKeyHash {
  std::size_t operator()(const ApplyKey& k) const {
    std::size_t h = reinterpret_cast<std::size_t>(k.f);
    for (const void* a : k.args) h = h * 1099511628211ull ^ reinterpret_cast<std::size_t>(a);
    return h;
  }
};
}  // namespace detail

inline Domain apply_obj(const FunctorExpr& f, const std::vector<Domain>& args) {
  if (args.size() != f.arity())
    throw arity_mismatch("apply_obj: expected " + std::to_string(f.arity()) + " arguments, got " +
                         std::to_string(args.size()));
  static std::unordered_map<detail::ApplyKey, Domain, detail::ApplyKeyHash> memo;
  detail::ApplyKey key{f.id(), {}};
  for (const auto& d : args) key.args.push_back(d.id());
  if (auto it = memo.find(key); it != memo.end()) return it->second;

  Domain out;
  switch (f.kind()) {
    case FK::Const:
      out = f.const_value();
      break;
    case FK::Arg:
      out = args[f.arg_index()];
      break;
    case FK::Sum: {
      std::vector<std::pair<std::string, Domain>> parts;
      for (std::size_t i = 0; i < f.children().size(); ++i)
        parts.emplace_back(f.labels()[i], apply_obj(f.children()[i], args));
      out = Domain::sum(std::move(parts));
      break;
    }
    case FK::Prod: {
      std::vector<Domain> parts;
      for (const auto& k : f.children()) parts.push_back(apply_obj(k, args));
      out = Domain::prod(std::move(parts));
      break;
    }
    case FK::Compose: {
      std::vector<Domain> mids;
      for (std::size_t i = 1; i < f.children().size(); ++i)
        mids.push_back(apply_obj(f.children()[i], args));
      out = apply_obj(f.children()[0], mids);
      break;
    }
    case FK::Dagger:
      out = Domain::bilimit(fix_link(f.body().partial_apply(args)));
      break;
  }
  memo.emplace(std::move(key), out);
  return out;
}

// ----- substitution / partial application -----

namespace detail {
inline Domain eval_closed(const FunctorExpr& f) {
  std::vector<Domain> dummy(f.arity(), Domain());
  return apply_obj(f, dummy);
}
}  // namespace detail

inline FunctorExpr FunctorExpr::substitute(const std::vector<FunctorExpr>& repl) const {
  if (repl.size() != arity()) throw arity_mismatch("substitute: wrong replacement count");
  std::size_t new_arity = repl.empty() ? 0 : repl[0].arity();
  for (const auto& r : repl)
    if (r.arity() != new_arity) throw arity_mismatch("substitute: replacements disagree on arity");

  FunctorExpr out;
  switch (kind()) {
    case FK::Const:
      return constant(const_value(), new_arity);
    case FK::Arg:
      return repl[arg_index()];
    case FK::Sum: {
      std::vector<std::pair<std::string, FunctorExpr>> parts;
      for (std::size_t i = 0; i < children().size(); ++i)
        parts.emplace_back(labels()[i], children()[i].substitute(repl));
      out = sum(std::move(parts));
      break;
    }
    case FK::Prod: {
      std::vector<FunctorExpr> parts;
      for (const auto& k : children()) parts.push_back(k.substitute(repl));
      out = prod(std::move(parts));
      break;
    }
    case FK::Compose: {
      // Flatten: substitute the substituted inners into the outer body.
      std::vector<FunctorExpr> inners;
      for (std::size_t i = 1; i < children().size(); ++i)
        inners.push_back(children()[i].substitute(repl));
      return children()[0].substitute(inners);
    }
    case FK::Dagger: {
      std::vector<FunctorExpr> ext;
      for (const auto& r : repl) ext.push_back(r.substitute_widen(new_arity + 1));
      ext.push_back(arg(new_arity, new_arity + 1));
      out = dagger(body().substitute(ext));
      break;
    }
  }
  // Constant folding: a node that no longer mentions any argument denotes a
  // fixed domain; collapsing it makes syntactically different partial
  // applications land on the identical expression.
  if (out.kind() != FK::Const && out.kind() != FK::Arg && out.used_args() == 0)
    return constant(detail::eval_closed(out), new_arity);
  return out;
}

inline FunctorExpr FunctorExpr::substitute_widen(std::size_t new_arity) const {
  if (new_arity < arity()) throw arity_mismatch("substitute_widen cannot shrink arity");
  // closed expressions widen to the constant functor on their value; an empty
  // replacement list could not carry the target arity through substitute
  if (arity() == 0) return constant(detail::eval_closed(*this), new_arity);
  std::vector<FunctorExpr> repl;
  for (std::size_t i = 0; i < arity(); ++i) repl.push_back(arg(i, new_arity));
  return substitute(repl);
}

inline FunctorExpr FunctorExpr::partial_apply(const std::vector<Domain>& args) const {
  if (args.size() + 1 != arity())
    throw arity_mismatch("partial_apply: need all but the last argument");
  std::vector<FunctorExpr> repl;
  for (const auto& d : args) repl.push_back(constant(d, 1));
  repl.push_back(arg(0, 1));
  return substitute(repl);
}

inline std::string FunctorExpr::str() const {
  switch (kind()) {
    case FK::Const:
      return const_value().brief();
    case FK::Arg:
      return "#" + std::to_string(arg_index());
    case FK::Sum: {
      std::string s = "Sum[";
      for (std::size_t i = 0; i < children().size(); ++i) {
        if (i) s += ", ";
        s += labels()[i] + ": " + children()[i].str();
      }
      return s + "]";
    }
    case FK::Prod: {
      std::string s = "(";
      for (std::size_t i = 0; i < children().size(); ++i) {
        if (i) s += " * ";
        s += children()[i].str();
      }
      return s + ")";
    }
    case FK::Compose: {
      std::string s = children()[0].str() + " . <";
      for (std::size_t i = 1; i < children().size(); ++i) {
        if (i > 1) s += ", ";
        s += children()[i].str();
      }
      return s + ">";
    }
    case FK::Dagger:
      return "Dagger(" + body().str() + ")";
  }
  return "?";
}

// ----- Domain methods -----

inline El Domain::bottom() const {
  switch (kind()) {
    case DK::Finite:
      return poset().bottom();
    case DK::Sum:
      return El::bot();
    case DK::Prod: {
      std::vector<El> bs;
      for (const auto& p : parts()) bs.push_back(p.bottom());
      return El::tup(std::move(bs));
    }
    case DK::Bilimit: {
      El b = r_->chain->stage(0).bottom();
      r_->chain->register_compact(0, b);
      return b;
    }
  }
  return El::bot();
}

inline bool Domain::el_valid(const El& e) const {
  switch (kind()) {
    case DK::Finite:
      return poset().contains(e);
    case DK::Sum: {
      if (e.is_bot()) return true;
      if (e.kind() != El::Kind::Tag) return false;
      for (std::size_t i = 0; i < labels().size(); ++i)
        if (labels()[i] == e.name()) return parts()[i].el_valid(e.inner());
      return false;
    }
    case DK::Prod: {
      if (e.kind() != El::Kind::Tup || e.parts().size() != parts().size()) return false;
      for (std::size_t i = 0; i < parts().size(); ++i)
        if (!parts()[i].el_valid(e.parts()[i])) return false;
      return true;
    }
    case DK::Bilimit: {
      std::pair<int, El> out;
      return r_->chain->try_resolve(e, out);
    }
  }
  return false;
}

inline bool Domain::el_leq(const El& a, const El& b) const {
  switch (kind()) {
    case DK::Finite:
      return poset().leq(a, b);
    case DK::Sum: {
      if (a.is_bot()) return true;
      if (b.is_bot()) return false;
      if (a.name() != b.name()) return false;
      for (std::size_t i = 0; i < labels().size(); ++i)
        if (labels()[i] == a.name()) return parts()[i].el_leq(a.inner(), b.inner());
      throw domain_error("el_leq: unknown tag " + a.name());
    }
    case DK::Prod: {
      for (std::size_t i = 0; i < parts().size(); ++i)
        if (!parts()[i].el_leq(a.parts()[i], b.parts()[i])) return false;
      return true;
    }
    case DK::Bilimit: {
      auto ca = r_->chain->resolve(a);
      auto cb = r_->chain->resolve(b);
      return compact_leq(CompactElt{r_->chain, ca.first, ca.second},
                         CompactElt{r_->chain, cb.first, cb.second});
    }
  }
  return false;
}

inline Poset Domain::trunc(int r) const {
  if (kind() == DK::Finite) return poset();
  auto it = r_->trunc_memo.find(r);
  if (it != r_->trunc_memo.end()) return it->second;
  Poset out;
  switch (kind()) {
    case DK::Sum: {
      std::vector<std::pair<std::string, Poset>> ps;
      for (std::size_t i = 0; i < parts().size(); ++i)
        ps.emplace_back(labels()[i], parts()[i].trunc(r));
      out = labelled_sum(ps);
      break;
    }
    case DK::Prod: {
      std::vector<Poset> ps;
      for (const auto& p : parts()) ps.push_back(p.trunc(r));
      out = product(ps);
      break;
    }
    case DK::Bilimit:
      out = r_->chain->trunc(r);
      break;
    default:
      out = poset();
  }
  r_->trunc_memo.emplace(r, out);
  return out;
}

inline MonoMap Domain::trunc_incl(int r) const {
  if (kind() == DK::Finite) return identity_map(poset());
  auto it = r_->trunc_incl_memo.find(r);
  if (it != r_->trunc_incl_memo.end()) return it->second;
  MonoMap out;
  switch (kind()) {
    case DK::Sum: {
      std::vector<std::pair<std::string, MonoMap>> ms;
      for (std::size_t i = 0; i < parts().size(); ++i)
        ms.emplace_back(labels()[i], parts()[i].trunc_incl(r));
      out = sum_map(ms);
      break;
    }
    case DK::Prod: {
      std::vector<MonoMap> ms;
      for (const auto& p : parts()) ms.push_back(p.trunc_incl(r));
      out = prod_map(ms);
      break;
    }
    case DK::Bilimit:
      out = r_->chain->trunc_incl(r);
      break;
    default:
      out = identity_map(poset());
  }
  r_->trunc_incl_memo.emplace(r, out);
  return out;
}

inline std::string Domain::brief() const {
  switch (kind()) {
    case DK::Finite:
      return poset().size() == 1 ? "1" : "Const<" + std::to_string(poset().size()) + ">";
    case DK::Sum:
      return "Sum<...>";
    case DK::Prod:
      return "Prod<...>";
    case DK::Bilimit:
      return "Bilimit";
  }
  return "?";
}

// ----- apply_mor -----

inline DomainMap apply_mor(const FunctorExpr& f, const std::vector<DomainMap>& fs) {
  if (fs.size() != f.arity()) throw arity_mismatch("apply_mor: wrong number of maps");
  std::vector<Domain> srcs, dsts;
  for (const auto& m : fs) {
    srcs.push_back(m.src());
    dsts.push_back(m.dst());
  }
  Domain S = apply_obj(f, srcs);
  Domain D = apply_obj(f, dsts);

  std::function<El(const El&)> ev;
  switch (f.kind()) {
    case FK::Const:
      ev = [](const El& e) { return e; };
      break;
    case FK::Arg: {
      DomainMap m = fs[f.arg_index()];
      ev = [m](const El& e) { return m(e); };
      break;
    }
    case FK::Sum: {
      std::vector<DomainMap> kids;
      for (const auto& k : f.children()) kids.push_back(apply_mor(k, fs));
      FunctorExpr ff = f;
      ev = [ff, kids](const El& e) -> El {
        if (e.is_bot()) return e;
        for (std::size_t i = 0; i < ff.labels().size(); ++i)
          if (ff.labels()[i] == e.name()) return El::tag(e.name(), kids[i](e.inner()));
        throw domain_error("apply_mor(sum): unknown tag " + e.name());
      };
      break;
    }
    case FK::Prod: {
      std::vector<DomainMap> kids;
      for (const auto& k : f.children()) kids.push_back(apply_mor(k, fs));
      ev = [kids](const El& e) -> El {
        std::vector<El> out;
        out.reserve(kids.size());
        for (std::size_t i = 0; i < kids.size(); ++i) out.push_back(kids[i](e.parts()[i]));
        return El::tup(std::move(out));
      };
      break;
    }
    case FK::Compose: {
      std::vector<DomainMap> mids;
      for (std::size_t i = 1; i < f.children().size(); ++i)
        mids.push_back(apply_mor(f.children()[i], fs));
      DomainMap outer = apply_mor(f.children()[0], mids);
      ev = [outer](const El& e) { return outer(e); };
      break;
    }
    case FK::Dagger: {
      auto sc = S.chain();
      auto dc = D.chain();
      FunctorExpr body = f.body();
      std::vector<DomainMap> maps = fs;
      ev = [sc, dc, body, maps](const El& e) -> El {
        auto [m, x] = sc->resolve(e);
        // Stagewise action: level j maps source stage j to target stage j.
        DomainMap lvl = didentity(sc->stage(0));
        for (int j = 1; j <= m; ++j) {
          std::vector<DomainMap> ext = maps;
          ext.push_back(lvl);
          lvl = apply_mor(body, ext);
        }
        return inject(dc, m, lvl(x)).value;
      };
      break;
    }
  }
  return DomainMap(S, D, std::move(ev));
}

// Functors preserve embedding/projection pairs componentwise.
inline DomainEP apply_ep(const FunctorExpr& f, const std::vector<DomainEP>& eps) {
  std::vector<DomainMap> es, ps;
  for (const auto& ep : eps) {
    es.push_back(ep.embed);
    ps.push_back(ep.project);
  }
  return DomainEP{apply_mor(f, es), apply_mor(f, ps)};
}

// ----- ChainRep -----

inline Domain ChainRep::stage(int n) {
  if (n < 0) throw domain_error("negative stage index");
  if (n > current_limits().max_rank)
    throw bound_exceeded("stage " + std::to_string(n) + " past the rank limit of " +
                         std::to_string(current_limits().max_rank));
  if (stages_.empty()) stages_.push_back(seed);
  while (static_cast<int>(stages_.size()) <= n) {
    int k = static_cast<int>(stages_.size());
    if (is_link) {
      stages_.push_back(apply_obj(fun, {stages_[k - 1]}));
    } else {
      auto [d, ep] = next(k);
      stages_.push_back(d);
      if (static_cast<int>(steps_.size()) < k) steps_.resize(k);
      steps_[k - 1] = ep;
    }
  }
  return stages_[n];
}

inline const DomainEP& ChainRep::step(int n) {
  stage(n + 1);  // ensure stages exist (and, for explicit chains, steps too)
  if (is_link) {
    if (steps_.empty()) steps_.push_back(seed_step);
    while (static_cast<int>(steps_.size()) <= n) {
      int k = static_cast<int>(steps_.size());
      steps_.push_back(apply_ep(fun, {steps_[k - 1]}));
    }
  }
  return steps_[n];
}

inline El ChainRep::lift_value(int from, int to, El v) {
  for (int j = from; j < to; ++j) v = step(j).embed(v);
  return v;
}

inline El ChainRep::lower_value(int from, int to, El v) {
  for (int j = from; j > to; --j) v = step(j - 1).project(v);
  return v;
}

inline std::pair<int, El> ChainRep::normalize(int n, El v) {
  while (n > 0) {
    El w = step(n - 1).project(v);
    if (step(n - 1).embed(w) == v) {
      v = w;
      --n;
    } else {
      break;
    }
  }
  return {n, std::move(v)};
}

inline void ChainRep::register_compact(int rank, const El& value) {
  auto it = label_index.find(value);
  if (it == label_index.end()) {
    label_index.emplace(value, std::pair<int, El>{rank, value});
    return;
  }
  if (it->second.first != rank || !(it->second.second == value))
    throw std::logic_error("ambiguous compact labelling in chain: " + value.str());
}

inline bool ChainRep::try_resolve(const El& label, std::pair<int, El>& out) {
  auto it = label_index.find(label);
  if (it != label_index.end()) {
    out = it->second;
    return true;
  }
  for (int r = 0; r <= current_limits().max_rank; ++r) {
    trunc(r);
    it = label_index.find(label);
    if (it != label_index.end()) {
      out = it->second;
      return true;
    }
  }
  return false;
}

inline std::pair<int, El> ChainRep::resolve(const El& label) {
  std::pair<int, El> out;
  if (!try_resolve(label, out))
    throw value_not_in_stage("element " + label.str() + " is not a compact of this chain within rank " +
                             std::to_string(current_limits().max_rank));
  return out;
}

inline Poset ChainRep::trunc(int r) {
  auto memo = trunc_memo.find(r);
  if (memo != trunc_memo.end()) return memo->second;

  // Normal forms of rank <= r with every nested chain also cut at r.
  std::vector<std::pair<int, El>> normals;
  for (int n = 0; n <= r; ++n) {
    Domain st = stage(n);
    Poset sp = st.trunc(r);
    for (std::size_t i = 0; i < sp.size(); ++i) {
      const El& v = sp.element(i);
      if (n > 0) {
        El w = step(n - 1).project(v);
        if (step(n - 1).embed(w) == v) continue;  // not a normal form
      }
      normals.emplace_back(n, v);
      register_compact(n, v);
    }
  }
  // Order: lift everything to stage r and compare there.
  Domain top = stage(r);
  Poset tp = top.trunc(r);
  std::vector<std::size_t> lifted(normals.size());
  for (std::size_t i = 0; i < normals.size(); ++i)
    lifted[i] = tp.index_of(lift_value(normals[i].first, r, normals[i].second));

  std::vector<El> labels(normals.size());
  for (std::size_t i = 0; i < normals.size(); ++i) labels[i] = normals[i].second;
  std::vector<std::size_t> perm(normals.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::sort(perm.begin(), perm.end(),
            [&](std::size_t a, std::size_t b) { return labels[a] < labels[b]; });
  std::vector<El> sorted;
  std::vector<std::size_t> sorted_lift;
  std::size_t bot = 0;
  for (std::size_t k = 0; k < perm.size(); ++k) {
    sorted.push_back(labels[perm[k]]);
    sorted_lift.push_back(lifted[perm[k]]);
    if (normals[perm[k]].first == 0 && normals[perm[k]].second == stage(0).bottom()) bot = k;
  }
  std::vector<std::vector<bool>> leq(sorted.size(), std::vector<bool>(sorted.size(), false));
  for (std::size_t i = 0; i < sorted.size(); ++i)
    for (std::size_t j = 0; j < sorted.size(); ++j)
      leq[i][j] = tp.leq(sorted_lift[i], sorted_lift[j]);
  Poset out = Poset::from_raw({std::move(sorted), std::move(leq), bot});
  trunc_memo.emplace(r, out);
  return out;
}

inline MonoMap ChainRep::trunc_incl(int r) {
  auto memo = trunc_incl_memo.find(r);
  if (memo != trunc_incl_memo.end()) return memo->second;
  Poset a = trunc(r), b = trunc(r + 1);
  std::vector<std::size_t> tab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) tab[i] = b.index_of(a.element(i));
  MonoMap out = MonoMap::make(a, b, std::move(tab));
  trunc_incl_memo.emplace(r, out);
  return out;
}

// ----- chain constructors -----

inline std::shared_ptr<ChainRep> make_link(const Domain& seed, const DomainEP& k,
                                           const FunctorExpr& fun) {
  if (fun.arity() != 1) throw arity_mismatch("link functor must be unary");
  auto c = std::make_shared<ChainRep>();
  c->is_link = true;
  c->seed = seed;
  c->seed_step = k;
  c->fun = fun;
  return c;
}

inline std::shared_ptr<ChainRep> fix_link(const FunctorExpr& fun) {
  if (fun.arity() != 1) throw arity_mismatch("link functor must be unary");
  static std::map<const void*, std::shared_ptr<ChainRep>> registry;
  auto it = registry.find(fun.id());
  if (it != registry.end()) return it->second;
  Domain bot = Domain::finite(Poset());
  Domain st1 = apply_obj(fun, {bot});
  El b1 = st1.bottom();
  DomainEP k{DomainMap(bot, st1, [b1](const El&) { return b1; }, "!"),
             DomainMap(st1, bot, [](const El&) { return El::bot(); }, "!p")};
  auto c = make_link(bot, k, fun);
  registry.emplace(fun.id(), c);
  return c;
}

inline std::shared_ptr<ChainRep> explicit_chain(
    Domain seed, std::function<std::pair<Domain, DomainEP>(int)> next) {
  auto c = std::make_shared<ChainRep>();
  c->is_link = false;
  c->seed = std::move(seed);
  c->next = std::move(next);
  return c;
}

// ----- compacts -----

inline CompactElt inject(const std::shared_ptr<ChainRep>& chain, int n, const El& v) {
  if (!chain->stage(n).el_valid(v))
    throw value_not_in_stage("value " + v.str() + " is not in stage " + std::to_string(n));
  auto [rank, value] = chain->normalize(n, v);
  chain->register_compact(rank, value);
  return CompactElt{chain, rank, value};
}

inline El project_to(const CompactElt& c, int n) {
  if (n >= c.rank) return c.chain->lift_value(c.rank, n, c.value);
  return c.chain->lower_value(c.rank, n, c.value);
}

inline bool compact_leq(const CompactElt& a, const CompactElt& b) {
  if (a.chain != b.chain) throw domain_error("compact_leq: compacts of different chains");
  int m = a.rank > b.rank ? a.rank : b.rank;
  El va = a.chain->lift_value(a.rank, m, a.value);
  El vb = b.chain->lift_value(b.rank, m, b.value);
  return a.chain->stage(m).el_leq(va, vb);
}

inline DomainMap inject_map(const std::shared_ptr<ChainRep>& chain, int n) {
  Domain lim = bilimit_domain(chain);
  auto c = chain;
  return DomainMap(chain->stage(n), lim,
                   [c, n](const El& e) { return inject(c, n, e).value; },
                   "kappa_" + std::to_string(n));
}

inline DomainMap project_map(const std::shared_ptr<ChainRep>& chain, int n) {
  Domain lim = bilimit_domain(chain);
  auto c = chain;
  return DomainMap(lim, chain->stage(n),
                   [c, n](const El& e) {
                     auto [rank, value] = c->resolve(e);
                     return project_to(CompactElt{c, rank, value}, n);
                   },
                   "kappa_" + std::to_string(n) + "^p");
}

// ----- fold / unfold -----

inline DomainMap fold_map(const std::shared_ptr<ChainRep>& link) {
  if (!link->is_link) throw domain_error("fold needs a functor-generated chain");
  Domain lim = bilimit_domain(link);
  Domain unf = apply_obj(link->fun, {lim});
  auto c = link;
  FunctorExpr fun = link->fun;
  return DomainMap(
      unf, lim,
      [c, fun, lim](const El& e) -> El {
        // Pass 1: greatest rank among the embedded compacts.
        int m = 0;
        DomainMap recorder(lim, lim,
                           [c, &m](const El& x) {
                             auto [r, v] = c->resolve(x);
                             if (r > m) m = r;
                             return x;
                           },
                           "rec");
        apply_mor(fun, {recorder})(e);
        // Pass 2: project everything to stage m, reassemble, inject at m+1.
        DomainMap down(lim, c->stage(m),
                       [c, m](const El& x) {
                         auto [r, v] = c->resolve(x);
                         return project_to(CompactElt{c, r, v}, m);
                       },
                       "proj");
        El packed = apply_mor(fun, {down})(e);
        return inject(c, m + 1, packed).value;
      },
      "fold");
}

inline DomainMap unfold_map(const std::shared_ptr<ChainRep>& link) {
  if (!link->is_link) throw domain_error("unfold needs a functor-generated chain");
  Domain lim = bilimit_domain(link);
  Domain unf = apply_obj(link->fun, {lim});
  auto c = link;
  FunctorExpr fun = link->fun;
  return DomainMap(
      lim, unf,
      [c, fun](const El& e) -> El {
        auto [rank, value] = c->resolve(e);
        int m = rank > 1 ? rank : 1;
        El v = c->lift_value(rank, m, value);
        // v sits in stage m = F(stage m-1); re-tag the stage-(m-1) parts as
        // compacts of the limit.
        DomainMap up(c->stage(m - 1), bilimit_domain(c),
                     [c, m](const El& x) { return inject(c, m - 1, x).value; }, "inj");
        return apply_mor(fun, {up})(v);
      },
      "unfold");
}

}  // namespace domfix
