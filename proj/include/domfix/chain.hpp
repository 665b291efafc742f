#pragma once

#include <functional>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "domfix/domain.hpp"
#include "domfix/transform.hpp"

// Morphisms of links, their chainwise action, cocones over chains, and the
// mediating maps out of bilimits.

namespace domfix {

// A morphism of links (K, k, F) -> (K', k', F'): a strict map f between the
// seeds and a transformation eta : F => F' making the seed square commute,
//
//     k' . f  =  eta_{K'} . F(f) . k        (as maps K -> F'(K'))
//
// The square is checked eagerly on the rank-`check_rank` truncation of the
// seed. With the canonical one-point seed the condition is vacuous; custom
// seeds genuinely constrain eta.
struct LinkMor {
  std::shared_ptr<ChainRep> src;
  std::shared_ptr<ChainRep> dst;
  DomainMap f;
  NatTrans eta;

  LinkMor(std::shared_ptr<ChainRep> src_, std::shared_ptr<ChainRep> dst_, DomainMap f_,
          NatTrans eta_, int check_rank = 2)
      : src(std::move(src_)), dst(std::move(dst_)), f(std::move(f_)), eta(std::move(eta_)) {
    if (!src->is_link || !dst->is_link)
      throw invalid_link_morphism("link morphisms need functor-generated chains");
    if (!eta.src().same_as(src->fun) || !eta.dst().same_as(dst->fun))
      throw invalid_link_morphism("transformation endpoints are not the link functors");
    if (!f.src().same_as(src->seed) || !f.dst().same_as(dst->seed))
      throw invalid_link_morphism("seed map endpoints are not the link seeds");
    DomainMap lhs = dcompose(dst->seed_step.embed, f);
    DomainMap rhs = dcompose(eta.at({dst->seed}),
                             dcompose(apply_mor(src->fun, {f}), src->seed_step.embed));
    if (!maps_agree(lhs, rhs, src->seed.trunc(check_rank)))
      throw invalid_link_morphism("seed square does not commute");
  }
};

// Chainwise action of a link morphism: level 0 is the seed map, level n+1 is
// eta at the target stage after F of level n. Each level then commutes with
// the steps of both chains.
class ChainMor {
 public:
  ChainMor(std::shared_ptr<ChainRep> src, std::shared_ptr<ChainRep> dst,
           std::function<DomainMap(int)> level)
      : src_(std::move(src)),
        dst_(std::move(dst)),
        level_(std::move(level)),
        memo_(std::make_shared<std::map<int, DomainMap>>()) {}

  const std::shared_ptr<ChainRep>& src() const { return src_; }
  const std::shared_ptr<ChainRep>& dst() const { return dst_; }

  DomainMap at(int n) const {
    auto it = memo_->find(n);
    if (it != memo_->end()) return it->second;
    DomainMap m = level_(n);
    memo_->emplace(n, m);
    return m;
  }

 private:
  std::shared_ptr<ChainRep> src_, dst_;
  std::function<DomainMap(int)> level_;
  std::shared_ptr<std::map<int, DomainMap>> memo_;
};

inline ChainMor omega_mor(const LinkMor& lm) {
  struct Rec {
    std::shared_ptr<ChainRep> src, dst;
    DomainMap f;
    NatTrans eta;
    std::shared_ptr<std::map<int, DomainMap>> memo;
    DomainMap operator()(int n) const {
      if (n == 0) return f;
      auto it = memo->find(n);
      if (it != memo->end()) return it->second;
      DomainMap below = (*this)(n - 1);
      DomainMap out = dcompose(eta.at({dst->stage(n - 1)}), apply_mor(src->fun, {below}));
      memo->emplace(n, out);
      return out;
    }
  };
  Rec rec{lm.src, lm.dst, lm.f, lm.eta, std::make_shared<std::map<int, DomainMap>>()};
  return ChainMor(lm.src, lm.dst, [rec](int n) { return rec(n); });
}

// Does the chain morphism commute with the steps up to the given level,
// sampled on rank-r truncations of the stages?
inline bool chain_mor_coherent(const ChainMor& m, int upto, int r) {
  for (int n = 0; n < upto; ++n) {
    DomainMap lhs = dcompose(m.at(n + 1), m.src()->step(n).embed);
    DomainMap rhs = dcompose(m.dst()->step(n).embed, m.at(n));
    if (!maps_agree(lhs, rhs, m.src()->stage(n).trunc(r))) return false;
  }
  return true;
}

// Bilimit-level map induced by a link morphism: send the class of (n, x) to
// the class of (n, level_n(x)).
inline DomainMap gfix_mor(const LinkMor& lm) {
  ChainMor cm = omega_mor(lm);
  auto src = lm.src;
  auto dst = lm.dst;
  return DomainMap(bilimit_domain(src), bilimit_domain(dst),
                   [cm, src, dst](const El& e) {
                     auto [n, x] = src->resolve(e);
                     return inject(dst, n, cm.at(n)(x)).value;
                   },
                   "gfix_mor");
}

// ---------------------------------------------------------------------------
// Cocones and mediating maps.
// ---------------------------------------------------------------------------

struct Cocone {
  std::shared_ptr<ChainRep> chain;
  Domain target;
  std::function<DomainMap(int)> leg;  // leg(n) : stage(n) -> target
};

// leg(n) = leg(n+1) . step(n).embed, sampled on rank-r stage truncations.
inline bool cocone_coherent(const Cocone& c, int upto, int r) {
  for (int n = 0; n < upto; ++n) {
    DomainMap via = dcompose(c.leg(n + 1), c.chain->step(n).embed);
    if (!maps_agree(c.leg(n), via, c.chain->stage(n).trunc(r))) return false;
  }
  return true;
}

// The universal map out of the bilimit: the class of (n, x) goes to leg(n)(x).
// Well-definedness rests on cocone coherence, which the caller should have
// checked at whatever rank they trust.
inline DomainMap mediating(const Cocone& c) {
  auto chain = c.chain;
  auto leg = c.leg;
  return DomainMap(bilimit_domain(chain), c.target,
                   [chain, leg](const El& e) {
                     auto [n, x] = chain->resolve(e);
                     return leg(n)(x);
                   },
                   "mediating");
}

// The canonical colimit cocone kappa_n : stage(n) -> bilimit.
inline Cocone colimit_cocone(const std::shared_ptr<ChainRep>& chain) {
  auto c = chain;
  return Cocone{chain, bilimit_domain(chain), [c](int n) { return inject_map(c, n); }};
}

// The order-colimit law at rank r: on compacts of rank at most r the
// roundtrip through stage r is the identity, i.e. the join of
// kappa_n . kappa_n^p over n <= r has already reached the identity there.
inline bool ocolimit_law(const std::shared_ptr<ChainRep>& chain, int r) {
  Poset t = chain->trunc(r);
  DomainMap round = dcompose(inject_map(chain, r), project_map(chain, r));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const El& e = t.element(i);
    if (!(round(e) == e)) return false;
  }
  // below rank r the roundtrip only loses information
  if (r > 0) {
    DomainMap lower = dcompose(inject_map(chain, r - 1), project_map(chain, r - 1));
    Domain lim = bilimit_domain(chain);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const El& e = t.element(i);
      if (!lim.el_leq(lower(e), e)) return false;
    }
  }
  return true;
}

}  // namespace domfix
