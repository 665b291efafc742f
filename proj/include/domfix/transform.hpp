#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "domfix/domain.hpp"

// Natural transformations between functor expressions of equal arity.
// A transformation is carried by its component builder; naturality is a
// property we can sample-check, not something the type enforces.

namespace domfix {

class NatTrans {
 public:
  NatTrans() = default;
  NatTrans(FunctorExpr src, FunctorExpr dst,
           std::function<DomainMap(const std::vector<Domain>&)> comp, std::string name = "")
      : src_(std::move(src)),
        dst_(std::move(dst)),
        comp_(std::move(comp)),
        name_(std::move(name)),
        memo_(std::make_shared<std::map<std::vector<const void*>, DomainMap>>()) {
    if (src_.arity() != dst_.arity())
      throw arity_mismatch("transformation endpoints disagree on arity");
  }

  bool valid() const { return static_cast<bool>(comp_); }
  const FunctorExpr& src() const { return src_; }
  const FunctorExpr& dst() const { return dst_; }
  std::size_t arity() const { return src_.arity(); }
  const std::string& name() const { return name_; }

  DomainMap at(const std::vector<Domain>& args) const {
    if (args.size() != arity()) throw arity_mismatch("component at wrong number of arguments");
    std::vector<const void*> key;
    key.reserve(args.size());
    for (const auto& d : args) key.push_back(d.id());
    auto it = memo_->find(key);
    if (it != memo_->end()) return it->second;
    DomainMap m = comp_(args);
    if (!m.src().same_as(apply_obj(src_, args)) || !m.dst().same_as(apply_obj(dst_, args)))
      throw source_mismatch("component endpoints do not match the declared functors");
    memo_->emplace(std::move(key), m);
    return m;
  }

 private:
  FunctorExpr src_, dst_;
  std::function<DomainMap(const std::vector<Domain>&)> comp_;
  std::string name_;
  std::shared_ptr<std::map<std::vector<const void*>, DomainMap>> memo_;
};

inline NatTrans nat_identity(const FunctorExpr& f) {
  return NatTrans(f, f, [f](const std::vector<Domain>& args) {
    return didentity(apply_obj(f, args));
  }, "id");
}

// The least transformation: every component is the constant bottom map.
inline NatTrans nat_zero(const FunctorExpr& f, const FunctorExpr& g) {
  return NatTrans(f, g, [f, g](const std::vector<Domain>& args) {
    return dzero(apply_obj(f, args), apply_obj(g, args));
  }, "0");
}

// Inclusion of one summand into a sum.
inline NatTrans nat_sum_incl(const FunctorExpr& sum, std::size_t which) {
  if (sum.kind() != FK::Sum || which >= sum.children().size())
    throw domain_error("nat_sum_incl needs a sum and a summand index");
  FunctorExpr child = sum.children()[which];
  std::string label = sum.labels()[which];
  return NatTrans(child, sum, [child, sum, label](const std::vector<Domain>& args) {
    return DomainMap(apply_obj(child, args), apply_obj(sum, args),
                     [label](const El& e) { return El::tag(label, e); }, "incl_" + label);
  }, "incl");
}

// Projection onto one factor of a product.
inline NatTrans nat_prod_proj(const FunctorExpr& prod, std::size_t which) {
  if (prod.kind() != FK::Prod || which >= prod.children().size())
    throw domain_error("nat_prod_proj needs a product and a factor index");
  FunctorExpr child = prod.children()[which];
  return NatTrans(prod, child, [child, prod, which](const std::vector<Domain>& args) {
    return DomainMap(apply_obj(prod, args), apply_obj(child, args),
                     [which](const El& e) { return e.parts()[which]; },
                     "proj_" + std::to_string(which));
  }, "proj");
}

// Vertical composition: rho after eta.
inline NatTrans vcompose(const NatTrans& rho, const NatTrans& eta) {
  if (!eta.dst().same_as(rho.src()))
    throw source_mismatch("vertical composition endpoints do not meet");
  return NatTrans(eta.src(), rho.dst(), [rho, eta](const std::vector<Domain>& args) {
    return dcompose(rho.at(args), eta.at(args));
  }, rho.name() + "." + eta.name());
}

// Whisker on the inside: eta * <gs>, the transformation F(g...) => G(g...).
inline NatTrans precompose(const NatTrans& eta, const std::vector<FunctorExpr>& gs) {
  if (gs.size() != eta.arity()) throw arity_mismatch("precompose: wrong number of inner functors");
  FunctorExpr s = eta.src().substitute(gs);
  FunctorExpr d = eta.dst().substitute(gs);
  std::vector<FunctorExpr> inner = gs;
  return NatTrans(s, d, [eta, inner](const std::vector<Domain>& args) {
    std::vector<Domain> mids;
    mids.reserve(inner.size());
    for (const auto& g : inner) mids.push_back(apply_obj(g, args));
    return eta.at(mids);
  }, eta.name() + "*<>");
}

// Whisker on the outside: h applied to a tuple of transformations,
// h(eta...) : h(F...) => h(G...).
inline NatTrans map_nat(const FunctorExpr& h, const std::vector<NatTrans>& etas) {
  if (etas.size() != h.arity()) throw arity_mismatch("map_nat: wrong number of transformations");
  std::vector<FunctorExpr> ss, ds;
  for (const auto& e : etas) {
    ss.push_back(e.src());
    ds.push_back(e.dst());
  }
  return NatTrans(h.substitute(ss), h.substitute(ds), [h, etas](const std::vector<Domain>& args) {
    std::vector<DomainMap> comps;
    comps.reserve(etas.size());
    for (const auto& e : etas) comps.push_back(e.at(args));
    return apply_mor(h, comps);
  }, "map");
}

// Horizontal composition of unary transformations:
// (eta2 * eta1)_A = (eta2 at G1 A) . F2(eta1 at A).
inline NatTrans hcompose(const NatTrans& eta2, const NatTrans& eta1) {
  if (eta2.arity() != 1 || eta1.arity() != 1)
    throw arity_mismatch("hcompose works on unary transformations");
  return vcompose(precompose(eta2, {eta1.dst()}), map_nat(eta2.src(), {eta1}));
}

// eta * <rhos> : F(H...) => G(K...), one rho per argument of eta.
inline NatTrans hcompose_family(const NatTrans& eta, const std::vector<NatTrans>& rhos) {
  if (rhos.size() != eta.arity())
    throw arity_mismatch("hcompose_family: one inner transformation per argument");
  std::vector<FunctorExpr> ds;
  ds.reserve(rhos.size());
  for (const auto& r : rhos) ds.push_back(r.dst());
  return vcompose(precompose(eta, ds), map_nat(eta.src(), rhos));
}

// F^n as a normalized expression. power_expr(f, 0) is the identity functor.
inline FunctorExpr power_expr(const FunctorExpr& f, int n) {
  if (f.arity() != 1) throw arity_mismatch("power_expr needs a unary functor");
  FunctorExpr out = FunctorExpr::arg(0, 1);
  for (int i = 0; i < n; ++i) out = f.substitute({out});
  return out;
}

// eta^(n) : F^n => G^n by repeated horizontal composition with itself.
inline NatTrans iterate_nat(const NatTrans& eta, int n) {
  if (eta.arity() != 1) throw arity_mismatch("iterate_nat needs a unary transformation");
  NatTrans out = nat_identity(FunctorExpr::arg(0, 1));
  for (int i = 0; i < n; ++i) out = hcompose(eta, out);
  return out;
}

// Do two maps with common endpoints agree on a finite sample of inputs?
// Element labels are canonical, so El equality is semantic equality.
inline bool maps_agree(const DomainMap& a, const DomainMap& b, const Poset& sample) {
  for (std::size_t i = 0; i < sample.size(); ++i)
    if (!(a(sample.element(i)) == b(sample.element(i)))) return false;
  return true;
}

// Naturality square for one tuple of test maps, sampled on the rank-r
// truncation of the source.
inline bool naturality_holds(const NatTrans& eta, const std::vector<DomainMap>& fs, int r) {
  std::vector<Domain> srcs, dsts;
  for (const auto& m : fs) {
    srcs.push_back(m.src());
    dsts.push_back(m.dst());
  }
  DomainMap lhs = dcompose(eta.at(dsts), apply_mor(eta.src(), fs));
  DomainMap rhs = dcompose(apply_mor(eta.dst(), fs), eta.at(srcs));
  return maps_agree(lhs, rhs, apply_obj(eta.src(), srcs).trunc(r));
}

}  // namespace domfix
