// Acceptance gate. Ten checks, one line of output each, nonzero exit if any
// of them fails. Every check carries a wall-clock budget that is part of the
// check itself. This binary deliberately avoids the test framework: it is the
// thing CI looks at last, so it should have no machinery of its own to doubt.

#include "domfix/domfix.hpp"

#include <array>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <sys/wait.h>

using namespace domfix;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool ok = false;
  std::string note;
};

std::array<std::size_t, 3> split(const LawReport& rep, const std::string& law) {
  std::array<std::size_t, 3> out{0, 0, 0};
  for (const auto& r : rep.results)
    if (r.law == law) out[static_cast<int>(r.status)]++;
  return out;
}

// Require an exact pass count and no fails or skips for one law family.
bool family(const LawReport& rep, const std::string& law, std::size_t want, std::string& note) {
  auto s = split(rep, law);
  if (s[0] == want && s[1] == 0 && s[2] == 0) return true;
  note += law + " expected " + std::to_string(want) + " passes, got " + std::to_string(s[0]) +
          "/" + std::to_string(s[1]) + "/" + std::to_string(s[2]) + "; ";
  for (const auto& r : rep.results)
    if (r.law == law && r.status == LawStatus::Fail)
      note += "[" + r.instance + "] " + r.detail + "; ";
  return false;
}

bool has_pass(const LawReport& rep, const std::string& law, const std::string& inst_sub) {
  for (const auto& r : rep.results)
    if (r.law == law && r.status == LawStatus::Pass &&
        r.instance.find(inst_sub) != std::string::npos)
      return true;
  return false;
}

El s_tower(int k, El base) {
  for (int i = 0; i < k; ++i) base = El::tag("S", std::move(base));
  return base;
}

// ---------------------------------------------------------------------------
// 1. The naturals pipeline against a hand-built oracle.
// ---------------------------------------------------------------------------

Outcome crit_nat_pipeline() {
  FunctorExpr natF = FunctorExpr::sum(
      {{"Z", FunctorExpr::constant(Domain(), 1)}, {"S", FunctorExpr::arg(0, 1)}});
  auto link = fix_link(natF);

  for (int n = 0; n <= 6; ++n) {
    Poset got = link->stage(n).trunc(n);
    if (got.size() != static_cast<std::size_t>(2 * n + 1))
      return {false, "stage " + std::to_string(n) + " has " + std::to_string(got.size()) +
                         " elements, wanted " + std::to_string(2 * n + 1)};

    // Oracle: the n-th iterate contains bottom, the cut-off towers S^k(bot)
    // for k = 1..n, and the settled towers S^k(Z(bot)) for k = 0..n-1. A
    // cut-off tower sits below anything with at least as many S layers; a
    // settled tower is maximal. from_relation closes the covering pairs.
    std::vector<El> elems{El::bot()};
    std::vector<std::pair<El, El>> pairs;
    for (int k = 1; k <= n; ++k) elems.push_back(s_tower(k, El::bot()));
    for (int k = 0; k < n; ++k) elems.push_back(s_tower(k, El::tag("Z", El::bot())));
    for (int k = 0; k < n; ++k) {
      pairs.emplace_back(s_tower(k, El::bot()), s_tower(k + 1, El::bot()));
      pairs.emplace_back(s_tower(k, El::bot()), s_tower(k, El::tag("Z", El::bot())));
    }
    Poset oracle = Poset::from_relation(elems, pairs);
    if (!poset_equal(oracle, got))
      return {false, "stage " + std::to_string(n) + " disagrees with the oracle poset"};
  }

  Domain d = bilimit_domain(link);
  Poset c5 = d.trunc(5);
  if (c5.size() != 11)
    return {false, "expected 11 compacts at rank 5, found " + std::to_string(c5.size())};

  DomainMap fo = fold_map(link);
  DomainMap un = unfold_map(link);
  for (std::size_t i = 0; i < c5.size(); ++i) {
    El x = c5.element(i);
    if (!(fo(un(x)) == x)) return {false, "fold(unfold(" + x.str() + ")) strayed"};
  }
  Poset f5 = apply_obj(natF, {d}).trunc(5);
  for (std::size_t i = 0; i < f5.size(); ++i) {
    El y = f5.element(i);
    if (!(un(fo(y)) == y)) return {false, "unfold(fold(" + y.str() + ")) strayed"};
  }
  return {true, "stages 0..6 match the oracle; 11 compacts at rank 5; fold/unfold roundtrip"};
}

// ---------------------------------------------------------------------------
// 2. Mutual systems: stage sizes, the pair witness, and elimination vs the
//    direct solution for one to four unknowns.
// ---------------------------------------------------------------------------

// Elimination again, but keeping the fold map of every solved coordinate so
// the solutions can serve as algebra carriers below.
struct ElimFolds {
  std::vector<Domain> sol;
  std::vector<DomainMap> folds;
};

ElimFolds elim_with_folds(const std::vector<FunctorExpr>& funs) {
  std::size_t k = funs.size();
  if (k == 1) {
    auto l = fix_link(funs[0]);
    return {{bilimit_domain(l)}, {fold_map(l)}};
  }
  FunctorExpr last = FunctorExpr::dagger(funs[k - 1]);
  std::vector<FunctorExpr> repl;
  for (std::size_t i = 0; i + 1 < k; ++i) repl.push_back(FunctorExpr::arg(i, k - 1));
  repl.push_back(last);
  std::vector<FunctorExpr> reduced;
  for (std::size_t i = 0; i + 1 < k; ++i) reduced.push_back(funs[i].substitute(repl));
  ElimFolds w = elim_with_folds(reduced);
  auto link_last = fix_link(funs[k - 1].partial_apply(w.sol));
  w.sol.push_back(bilimit_domain(link_last));
  w.folds.push_back(fold_map(link_last));
  return w;
}

enum class SysRes { Ok, NotCovered, Bad };

// Compare the eliminated solutions with the direct simultaneous chains by a
// mediating map per coordinate: legs l_0 = 0, l_{m+1} = fold_i . F_i(l_m).
// The map must be a strict order embedding, and every eliminated compact of
// rank <= `rank` must be hit by some direct compact of rank <= `depth`.
// Ranks need not line up coordinate by coordinate (elimination nests daggers,
// which stretches ranks), hence the depth knob and the retry in the caller.
SysRes system_attempt(const std::vector<FunctorExpr>& funs, int rank, int depth,
                      std::string* why) {
  std::size_t k = funs.size();
  limits raised = current_limits();
  if (raised.max_rank < depth + 1) raised.max_rank = depth + 1;
  scoped_limits scope(raised);

  SystemChains sys = solve_system(funs);
  ElimFolds ef = elim_with_folds(funs);
  std::vector<Domain> shipped = bekic_solve(funs);
  for (std::size_t i = 0; i < k; ++i) {
    if (!ef.sol[i].same_as(shipped[i])) {
      *why = "collected solution differs from the eliminator at coordinate " + std::to_string(i);
      return SysRes::Bad;
    }
    if (!ef.folds[i].src().same_as(apply_obj(funs[i], ef.sol)) ||
        !ef.folds[i].dst().same_as(ef.sol[i])) {
      *why = "fold map has the wrong type at coordinate " + std::to_string(i);
      return SysRes::Bad;
    }
  }

  std::vector<std::vector<DomainMap>> legs;
  legs.emplace_back();
  for (std::size_t i = 0; i < k; ++i)
    legs.back().push_back(dzero(sys.chains[i]->stage(0), ef.sol[i]));
  for (int m = 0; m < depth; ++m) {
    legs.emplace_back();
    for (std::size_t i = 0; i < k; ++i)
      legs.back().push_back(dcompose(ef.folds[i], apply_mor(funs[i], legs[m])));
  }

  for (std::size_t i = 0; i < k; ++i) {
    Cocone co{sys.chains[i], ef.sol[i], [&legs, i](int n) { return legs[n][i]; }};
    if (!cocone_coherent(co, rank, rank)) {
      *why = "legs are not a cocone at coordinate " + std::to_string(i);
      return SysRes::Bad;
    }
    DomainMap fwd = mediating(co);

    Poset deep = sys.limit(i).trunc(depth);
    std::vector<El> img(deep.size());
    std::map<El, std::size_t> seen;
    for (std::size_t x = 0; x < deep.size(); ++x) {
      img[x] = fwd(deep.element(x));
      auto [it, fresh] = seen.emplace(img[x], x);
      if (!fresh) {
        *why = "mediating map is not injective at coordinate " + std::to_string(i) + ": " +
               deep.element(x).str() + " collides with " + deep.element(it->second).str();
        return SysRes::Bad;
      }
    }
    for (std::size_t x = 0; x < deep.size(); ++x)
      for (std::size_t y = 0; y < deep.size(); ++y)
        if (deep.leq(x, y) != ef.sol[i].el_leq(img[x], img[y])) {
          *why = "order disagrees at coordinate " + std::to_string(i) + ": " +
                 deep.element(x).str() + " vs " + deep.element(y).str();
          return SysRes::Bad;
        }
    for (int r = 0; r <= rank; ++r) {
      Poset t = ef.sol[i].trunc(r);
      for (std::size_t e = 0; e < t.size(); ++e)
        if (!seen.count(t.element(e))) {
          *why = "eliminated compact " + t.element(e).str() + " (rank " + std::to_string(r) +
                 ", coordinate " + std::to_string(i) + ") not reached at depth " +
                 std::to_string(depth);
          return SysRes::NotCovered;
        }
    }
  }
  return SysRes::Ok;
}

bool system_isomorphic(const std::vector<FunctorExpr>& funs, int rank, std::string* why) {
  int k = static_cast<int>(funs.size());
  for (int depth = k * rank + 2; depth <= 40; depth += 6) {
    switch (system_attempt(funs, rank, depth, why)) {
      case SysRes::Ok: return true;
      case SysRes::Bad: return false;
      case SysRes::NotCovered: break;  // deepen and retry
    }
  }
  *why = "coverage still missing at depth 40: " + *why;
  return false;
}

Outcome crit_mutual_systems() {
  Domain two = Domain::finite(chain_of({"a"}));
  FunctorExpr ev = FunctorExpr::sum(
      {{"Z", FunctorExpr::constant(Domain(), 2)}, {"S", FunctorExpr::arg(1, 2)}});
  FunctorExpr od = FunctorExpr::sum({{"S", FunctorExpr::arg(0, 2)}});

  SystemChains sys = solve_system({ev, od});
  const std::size_t want[5][2] = {{1, 1}, {3, 2}, {4, 4}, {6, 5}, {7, 7}};
  for (int n = 0; n <= 4; ++n) {
    std::size_t se = sys.chains[0]->stage(n).trunc(n).size();
    std::size_t so = sys.chains[1]->stage(n).trunc(n).size();
    if (se != want[n][0] || so != want[n][1])
      return {false, "stage " + std::to_string(n) + " sizes (" + std::to_string(se) + "," +
                         std::to_string(so) + ") do not match the recurrence"};
  }

  {
    // the pair witness folds twice per leg, so its scratch elements outrun
    // the default rank ceiling at verification rank 4
    limits raised = current_limits();
    if (raised.max_rank < 12) raised.max_rank = 12;
    scoped_limits scope(raised);
    BekicWitness bw = bekic_check(ev, od, 4);
    if (!bw.ok)
      return {false, "pair witness failed: " + (bw.b.ok ? bw.c.detail : bw.b.detail)};
  }

  FunctorExpr natF = FunctorExpr::sum(
      {{"Z", FunctorExpr::constant(Domain(), 1)}, {"S", FunctorExpr::arg(0, 1)}});
  std::vector<std::vector<FunctorExpr>> systems;
  systems.push_back({natF});
  systems.push_back({ev, od});
  systems.push_back({FunctorExpr::sum({{"Z", FunctorExpr::constant(Domain(), 3)},
                                       {"S", FunctorExpr::arg(1, 3)}}),
                     FunctorExpr::sum({{"S", FunctorExpr::arg(2, 3)}}),
                     FunctorExpr::sum({{"S", FunctorExpr::arg(0, 3)}})});
  systems.push_back({FunctorExpr::sum({{"Z", FunctorExpr::constant(Domain(), 4)},
                                       {"S", FunctorExpr::arg(1, 4)}}),
                     FunctorExpr::sum({{"S", FunctorExpr::arg(2, 4)}}),
                     FunctorExpr::sum({{"S", FunctorExpr::arg(3, 4)},
                                       {"T", FunctorExpr::constant(two, 4)}}),
                     FunctorExpr::sum({{"S", FunctorExpr::arg(0, 4)}})});
  for (const auto& funs : systems) {
    std::string why;
    if (!system_isomorphic(funs, 4, &why))
      return {false, "k=" + std::to_string(funs.size()) + ": " + why};
  }
  return {true, "stage sizes match; pair witness ok; elimination order-isomorphic for k=1..4"};
}

// ---------------------------------------------------------------------------
// 3..5, 8. Law batteries with pinned pass counts.
// ---------------------------------------------------------------------------

Outcome crit_ep_battery() {
  LawReport rep = ep_laws(0, 50);
  std::string note;
  bool ok = true;
  for (const char* law : {"ep/retract", "ep/deflate", "ep/greatest", "ep/sum", "ep/prod",
                          "ep/functor", "ep/compose"})
    ok = family(rep, law, 50, note) && ok;
  if (!ok) return {false, note};
  return {true, "50 embeddings: retract, deflation, greatest-projection, sum/prod/compose, "
                "functor preservation all exact"};
}

Outcome crit_colimit_roundtrip() {
  LawReport rep = colimit_laws(0, 12, 5);
  std::string note;
  bool ok = family(rep, "colimit/roundtrip", 84, note);
  ok = family(rep, "colimit/cocone-step", 14, note) && ok;
  if (!ok) return {false, note};
  return {true, "84 roundtrip identities and 14 cocone steps, ranks 0..5, all exact"};
}

Outcome crit_parameter_identity() {
  LawReport rep = parameter_laws(0, 12);
  std::string note;
  if (!family(rep, "parameter/on-the-nose", 12, note)) return {false, note};

  // Replay the same draws and also compare the two sides element by element
  // on low truncations. The battery already proves the domains are the same
  // interned object; this guards the comparison itself.
  Gen g(0);
  for (int i = 0; i < 12; ++i) {
    FunctorExpr f = g.functor(2, 2);
    FunctorExpr inner = g.functor(1, 1);
    std::vector<std::vector<Domain>> samples{{Domain::finite(g.poset())},
                                             {Domain::finite(g.poset())}};
    auto r = parameter_identity(f, {inner}, samples);
    if (!r.expr_equal || !r.domains_equal)
      return {false, "replayed draw " + std::to_string(i) + " disagrees"};
    for (const auto& args : samples)
      for (int rr = 0; rr <= 2; ++rr) {
        try {
          if (!poset_equal(apply_obj(r.lhs, args).trunc(rr), apply_obj(r.rhs, args).trunc(rr)))
            return {false, "draw " + std::to_string(i) + " differs extensionally at rank " +
                               std::to_string(rr)};
        } catch (const bound_exceeded&) {
          // structural equality already covers this instance; the element
          // comparison is extra and only runs where it is affordable
        }
      }
  }
  return {true, "12 instances equal structurally and element-wise on truncations"};
}

Outcome crit_iterate_interchange() {
  LawReport rep = iterate_laws(0, 20, 4);
  std::string note;
  if (!family(rep, "iterate/interchange", 20, note)) return {false, note};
  return {true, "20 composable pairs, iterates up to n=4, all exact"};
}

// ---------------------------------------------------------------------------
// 6. The fixed-point calculus battery.
// ---------------------------------------------------------------------------

Outcome crit_conway_battery() {
  LawReport rep = conway_laws(0, 4);
  std::string note;
  bool ok = true;
  ok = family(rep, "conway/composition", 7, note) && ok;
  ok = family(rep, "conway/power", 12, note) && ok;
  {
    auto s = split(rep, "conway/double-dagger");
    if (s[0] != 9 || s[1] != 0 || s[2] != 1) {
      note += "conway/double-dagger expected 9 passes and the one oversized skip, got " +
              std::to_string(s[0]) + "/" + std::to_string(s[1]) + "/" + std::to_string(s[2]) +
              "; ";
      ok = false;
    }
  }
  {
    auto s = split(rep, "conway/abstraction");
    if (s[2] != 1) {
      note += "conway/abstraction must be reported as skipped; ";
      ok = false;
    }
  }
  // the named members of the battery must be among the passes
  ok = has_pass(rep, "conway/composition", "Sum[Z: 1, S: #0] ; Sum[N: 1, C: (Const<2> * #0)]") &&
       ok;
  ok = has_pass(rep, "conway/double-dagger", "Sum[Z: 1, S: #1]") && ok;
  ok = has_pass(rep, "conway/power", "Sum[Z: 1, S: #0] ^2") && ok;
  ok = has_pass(rep, "conway/power", "Sum[Z: 1, S: #0] ^3") && ok;
  if (!ok) return {false, note.empty() ? "a named battery member is missing" : note};
  return {true, "28 identities at rank 4 (7 composition, 9 double-dagger, 12 power); "
                "abstraction and one oversized instance reported skipped"};
}

// ---------------------------------------------------------------------------
// 7. Initial algebras: the homomorphism law, brute-force uniqueness, and
//    embedding algebras yielding e-p pairs.
// ---------------------------------------------------------------------------

Outcome crit_initial_algebra() {
  // counting the naturals into the three-point chain, saturating at the top
  FunctorExpr natF = FunctorExpr::sum(
      {{"Z", FunctorExpr::constant(Domain(), 1)}, {"S", FunctorExpr::arg(0, 1)}});
  Domain a3 = Domain::finite(chain_of({"a", "b"}));
  El ea = El::atom("a"), eb = El::atom("b");
  DomainMap act(apply_obj(natF, {a3}), a3,
                [ea, eb](const El& e) {
                  if (e.is_bot()) return El::bot();
                  if (e.name() == "Z") return El(ea);
                  const El& v = e.inner();  // S branch: bump one step, capped
                  if (v.is_bot()) return El(ea);
                  return El(eb);
                },
                "count3");
  DomainMap phi = initial_mediating(Algebra{natF, a3, act});
  auto link = fix_link(natF);
  Domain d = bilimit_domain(link);
  DomainMap fo = fold_map(link);
  DomainMap fphi = apply_mor(natF, {phi});
  Poset fd5 = apply_obj(natF, {d}).trunc(5);
  for (std::size_t i = 0; i < fd5.size(); ++i) {
    El x = fd5.element(i);
    if (!(phi(fo(x)) == act(fphi(x))))
      return {false, "homomorphism law broke at " + x.str()};
  }

  // brute-force uniqueness for constant bodies: enumerate every strict map
  // out of the solution and count those satisfying the homomorphism square
  auto unique_hom = [](const Domain& c, const Domain& a, const DomainMap& act_ca,
                       std::string* why) {
    FunctorExpr fc = FunctorExpr::constant(c, 1);
    auto l = fix_link(fc);
    Domain dd = bilimit_domain(l);
    DomainMap fold_c = fold_map(l);
    Poset dp = dd.trunc(2);
    Poset ap = a.trunc(2);
    Poset cp = c.trunc(2);
    std::vector<std::size_t> free_ix;
    for (std::size_t i = 0; i < dp.size(); ++i)
      if (i != dp.bottom_index()) free_ix.push_back(i);
    std::size_t total = 1;
    for (std::size_t i = 0; i < free_ix.size(); ++i) total *= ap.size();
    int found = 0;
    for (std::size_t code = 0; code < total; ++code) {
      std::map<El, El> tab;
      tab[dp.element(dp.bottom_index())] = El::bot();
      std::size_t rest = code;
      for (std::size_t fi : free_ix) {
        tab[dp.element(fi)] = ap.element(rest % ap.size());
        rest /= ap.size();
      }
      bool mono = true;
      for (std::size_t i = 0; i < dp.size() && mono; ++i)
        for (std::size_t j = 0; j < dp.size() && mono; ++j)
          if (dp.leq(i, j) && !a.el_leq(tab[dp.element(i)], tab[dp.element(j)])) mono = false;
      if (!mono) continue;
      DomainMap h(dd, a, [tab](const El& e) { return tab.at(e); }, "cand");
      DomainMap fh = apply_mor(fc, {h});
      bool law = true;
      for (std::size_t i = 0; i < cp.size() && law; ++i) {
        El x = cp.element(i);
        if (!(h(fold_c(x)) == act_ca(fh(x)))) law = false;
      }
      if (law) ++found;
    }
    if (found != 1) {
      *why = "found " + std::to_string(found) + " homomorphisms, wanted exactly 1 among " +
             std::to_string(total) + " candidates";
      return false;
    }
    return true;
  };

  std::string why;
  Domain c3 = Domain::finite(chain_of({"a", "b"}));
  Domain a2 = Domain::finite(chain_of({"a"}));
  DomainMap squash(c3, a2,
                   [ea](const El& e) { return e.is_bot() ? El::bot() : El(ea); }, "squash");
  if (!unique_hom(c3, a2, squash, &why)) return {false, "chain instance: " + why};

  Domain flat = Domain::sum({{"L", Domain()}, {"R", Domain()}});
  Domain wide = Domain::sum({{"L", a2}, {"R", a2}});
  DomainMap widen(flat, wide,
                  [ea](const El& e) {
                    if (e.is_bot()) return El::bot();
                    if (e.name() == "L") return El::tag("L", El(ea));
                    return El::tag("R", El::bot());
                  },
                  "widen");
  if (!unique_hom(flat, wide, widen, &why)) return {false, "flat instance: " + why};

  // embedding algebras: the mediating map is itself an embedding and comes
  // with its projection partner
  auto ep_instance = [](const Domain& c, const Domain& a, const DomainMap& emb_act,
                        std::string* bad) {
    DomainMap m = initial_mediating(Algebra{FunctorExpr::constant(c, 1), a, emb_act});
    MonoMap tab = m.table(2, 2);
    if (!is_embedding(tab)) {
      *bad = "mediating map is not an embedding";
      return false;
    }
    MonoMap rho = projection_of(tab);
    MonoMap retract = compose(rho, tab);
    MonoMap ident_src = identity_map(tab.src());
    if (!(map_leq(retract, ident_src) && map_leq(ident_src, retract))) {
      *bad = "projection does not retract the embedding";
      return false;
    }
    if (!map_leq(compose(tab, rho), identity_map(tab.dst()))) {
      *bad = "embedding after projection is not below the identity";
      return false;
    }
    return true;
  };
  Domain c2 = Domain::finite(chain_of({"a"}));
  Domain a3b = Domain::finite(chain_of({"a", "b"}));
  DomainMap incl(c2, a3b, [](const El& e) { return e; }, "incl");
  if (!ep_instance(c2, a3b, incl, &why)) return {false, "chain e-p instance: " + why};
  DomainMap incl2(flat, wide,
                  [](const El& e) {
                    return e.is_bot() ? El::bot() : El::tag(e.name(), El::bot());
                  },
                  "incl2");
  if (!ep_instance(flat, wide, incl2, &why)) return {false, "flat e-p instance: " + why};

  return {true, "homomorphism square on all rank-5 compacts; uniqueness by brute force "
                "(1 of 4 and 1 of 25 candidates); embedding algebras give e-p pairs"};
}

// ---------------------------------------------------------------------------
// 9. The declaration corpus.
// ---------------------------------------------------------------------------

const char* corpus_source =
    "datatype nat = Zero | Succ of nat\n"
    "type natt = rec n. +{ zero: 1, succ: n }\n"
    "type bits = rec b. +{ e: 1, o: b, i: b }\n"
    "type even = +{ z: 1, s: odd }\n"
    "type odd = +{ s: even }\n"
    "type nest = rec o. +{ stop: 1, go: rec i. +{ back: o, more: i } }\n"
    "type unit = 1\n"
    "type loop = rec a. a\n"
    "type wrap = rec a. 1\n"
    "datatype proto = Get of nat | Put of proto\n";

Outcome crit_session_corpus() {
  session::Program p = session::analyze(corpus_source);
  if (p.solved.size() != 10)
    return {false, "corpus solved " + std::to_string(p.solved.size()) + " declarations"};

  std::string note;
  bool ok = true;
  LawReport subst = session::substitution_suite(p, 4);
  for (const char* law : {"subst/functor-structural", "subst/objects", "subst/compacts",
                          "subst/pi-minus", "subst/pi-plus"})
    ok = family(subst, law, 10, note) && ok;
  LawReport unf = session::unfolding_suite(p, 4);
  ok = family(unf, "unfold/roundtrip", 9, note) && ok;
  ok = family(unf, "unfold/substituted-domain", 9, note) && ok;
  LawReport prog = session::check_program(p, 4);
  ok = family(prog, "session/pi-embedding", 10, note) && ok;
  ok = family(prog, "session/unfold-roundtrip", 9, note) && ok;
  ok = family(prog, "session/bekic-elimination", 1, note) && ok;
  ok = family(prog, "session/bekic-agreement", 1, note) && ok;
  if (!ok) return {false, note};

  // every splitting map is an honest embedding witnessed by a finite table;
  // the nested declaration's table lives at rank 3 because its rank-4 target
  // would need a 796536-element product poset, and its rank-4 behaviour is
  // covered by the value-level order-embedding check below
  for (const auto& s : p.solved) {
    int used = -1;
    bool emb = false;
    for (int r = 4; r >= 1 && used < 0; --r) {
      for (int extra = 0; extra <= 2; ++extra) {
        if (session::detail::pi_target_trunc_size(s.dom.pi.dst(), r + extra) >
            0.75 * static_cast<double>(current_limits().max_poset))
          break;
        try {
          MonoMap m = s.dom.pi.table(r, r + extra);
          used = r;
          emb = is_embedding(m);
          break;
        } catch (const value_not_in_stage&) {
        }
      }
    }
    int want_rank = (s.name == "nest") ? 3 : 4;
    if (used != want_rank || !emb)
      return {false, s.name + ": splitting table at rank " + std::to_string(used) +
                         (emb ? "" : " is not an embedding")};
    std::string why;
    if (!session::detail::pi_embeds_on_trunc(s.dom, 4, &why))
      return {false, s.name + ": value-level rank-4 check failed: " + why};
  }
  return {true, "10 declarations: substitution and splitting equalities, unfolding "
                "roundtrips, finite embedding tables (nested one at rank 3 + rank-4 "
                "value check)"};
}

// ---------------------------------------------------------------------------
// 10. Byte-identical tool output.
// ---------------------------------------------------------------------------

bool run_cli(const std::string& cmd, std::string* out, int* code) {
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return false;
  char buf[4096];
  std::size_t n;
  out->clear();
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) out->append(buf, n);
  int st = pclose(pipe);
  if (!WIFEXITED(st)) return false;
  *code = WEXITSTATUS(st);
  return true;
}

Outcome crit_cli_determinism() {
#ifndef DOMFIX_CLI_PATH
  return {false, "tool path not provided at build time"};
#else
  std::string cmd = std::string(DOMFIX_CLI_PATH) + " check --builtin conway --seed 7 --format json";
  std::string a, b;
  int ca = -1, cb = -1;
  if (!run_cli(cmd, &a, &ca) || !run_cli(cmd, &b, &cb))
    return {false, "could not run the tool"};
  if (ca != 0 || cb != 0)
    return {false, "exit codes " + std::to_string(ca) + " and " + std::to_string(cb)};
  if (a.empty()) return {false, "empty output"};
  if (a != b) return {false, "two runs differ"};
  return {true, "two runs, " + std::to_string(a.size()) + " bytes each, byte-identical"};
#endif
}

}  // namespace

int main() {
  struct Row {
    const char* name;
    Outcome (*fn)();
    double budget;  // seconds
  };
  const Row rows[] = {
      {"nat-pipeline", crit_nat_pipeline, 1.0},
      {"mutual-systems", crit_mutual_systems, 5.0},
      {"ep-battery", crit_ep_battery, 10.0},
      {"colimit-roundtrip", crit_colimit_roundtrip, 10.0},
      {"parameter-identity", crit_parameter_identity, 5.0},
      {"conway-battery", crit_conway_battery, 60.0},
      {"initial-algebra", crit_initial_algebra, 10.0},
      {"iterate-interchange", crit_iterate_interchange, 5.0},
      {"session-corpus", crit_session_corpus, 30.0},
      {"cli-determinism", crit_cli_determinism, 30.0},
  };

  int failures = 0;
  int idx = 0;
  for (const Row& row : rows) {
    ++idx;
    auto t0 = Clock::now();
    Outcome o;
    try {
      o = row.fn();
    } catch (const std::exception& ex) {
      o = {false, std::string("unexpected exception: ") + ex.what()};
    }
    double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    bool pass = o.ok && secs <= row.budget;
    if (o.ok && secs > row.budget)
      o.note += " [over the " + std::to_string(row.budget) + "s budget]";
    if (!pass) ++failures;
    std::printf("%s %2d/10 %-20s %6.2fs  %s\n", pass ? "PASS" : "FAIL", idx, row.name, secs,
                o.note.c_str());
  }
  if (failures) std::printf("%d of 10 criteria failed\n", failures);
  return failures ? 1 : 0;
}
