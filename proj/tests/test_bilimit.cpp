// Bilimit domains at full depth: sums and products whose parts are bilimits,
// and chains whose stages are themselves bilimits (iterated dagger).
//
// Size oracles, worked out by hand:
//   nat bilimit N: trunc(r) has 2r + 1 elements
//   F(X) = Sum[A: N, B: X] chain:   s_0 = 1, s_n(r) = 1 + (2r+1) + s_{n-1}(r)
//     trunc(2) = s_2(2) = 13, trunc(3) = s_3(3) = 25
//   B(X, Y) = Sum[L: X, N: Y], G = dagger_Y B (unary), H-chain = 1, G(1), ...
//     G(1).trunc(r) = 2r + 1
//     G(G(1)).trunc(r): u_0 = 1, u_{k+1} = 1 + (2r+1) + u_k, at r=2: 13, r=3: 25
//     H-chain trunc sizes: 1, 3, 13, 79

#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "domfix/domain.hpp"

using namespace domfix;

namespace {

FunctorExpr nat_functor() {
  return FunctorExpr::sum({{"Zero", FunctorExpr::constant(Domain(), 1)},
                           {"Succ", FunctorExpr::arg(0, 1)}});
}

Domain nat_limit() { return bilimit_domain(fix_link(nat_functor())); }

}  // namespace

TEST_CASE("sum with a bilimit summand") {
  Domain n = nat_limit();
  FunctorExpr f = FunctorExpr::sum({{"A", FunctorExpr::constant(n, 1)},
                                    {"B", FunctorExpr::arg(0, 1)}});
  auto link = fix_link(f);

  REQUIRE(link->stage(1).kind() == DK::Sum);
  REQUIRE(link->stage(1).trunc(2).size() == 7);
  REQUIRE(link->trunc(2).size() == 13);
  REQUIRE(link->trunc(3).size() == 25);

  // order inside the A summand follows the nat compacts
  auto nl = fix_link(nat_functor());
  El zero = inject(nl, 1, El::tag("Zero", El::bot())).value;
  Domain lim = bilimit_domain(link);
  El a_bot = inject(link, 1, El::tag("A", El::bot())).value;
  El a_zero = inject(link, 1, El::tag("A", zero)).value;
  REQUIRE(lim.el_leq(a_bot, a_zero));
  REQUIRE_FALSE(lim.el_leq(a_zero, a_bot));
  REQUIRE(lim.el_leq(lim.bottom(), a_zero));
}

TEST_CASE("product with a bilimit factor") {
  Domain n = nat_limit();
  Domain two = Domain::finite(chain_of({"t"}));
  Domain p = Domain::prod({n, two});
  REQUIRE(p.kind() == DK::Prod);
  for (int r = 0; r <= 3; ++r) REQUIRE(p.trunc(r).size() == (2u * r + 1) * 2);
  REQUIRE(p.bottom() == El::tup({El::bot(), El::bot()}));

  auto nl = fix_link(nat_functor());
  El zero = inject(nl, 1, El::tag("Zero", El::bot())).value;
  El lo = El::tup({zero, El::bot()});
  El hi = El::tup({zero, El::atom("t")});
  REQUIRE(p.el_valid(lo));
  REQUIRE(p.el_leq(lo, hi));
  REQUIRE_FALSE(p.el_leq(hi, lo));
  // incomparable when coordinates disagree in opposite directions
  El other = El::tup({El::bot(), El::atom("t")});
  REQUIRE_FALSE(p.el_leq(lo, other));
  REQUIRE_FALSE(p.el_leq(other, lo));
}

TEST_CASE("truncation labels are stable across ranks") {
  Domain n = nat_limit();
  FunctorExpr f = FunctorExpr::sum({{"A", FunctorExpr::constant(n, 1)},
                                    {"B", FunctorExpr::arg(0, 1)}});
  Domain lim = bilimit_domain(fix_link(f));
  for (int r = 0; r <= 2; ++r) {
    Poset small = lim.trunc(r);
    Poset big = lim.trunc(r + 1);
    std::set<El> bigset;
    for (std::size_t i = 0; i < big.size(); ++i) bigset.insert(big.element(i));
    for (std::size_t i = 0; i < small.size(); ++i) REQUIRE(bigset.count(small.element(i)) == 1);
    MonoMap incl = lim.trunc_incl(r);
    REQUIRE(is_embedding(incl));
  }
}

TEST_CASE("iterated dagger: stages that are bilimits themselves") {
  FunctorExpr b = FunctorExpr::sum({{"L", FunctorExpr::arg(0, 2)},
                                    {"N", FunctorExpr::arg(1, 2)}});
  FunctorExpr g = FunctorExpr::dagger(b);  // unary: X |-> FIX_Y B(X, Y)
  auto link = fix_link(g);

  SECTION("stage kinds and sizes") {
    REQUIRE(link->stage(1).kind() == DK::Bilimit);
    REQUIRE(link->stage(2).kind() == DK::Bilimit);
    REQUIRE(link->stage(1).trunc(2).size() == 5);
    REQUIRE(link->stage(1).trunc(3).size() == 7);
    REQUIRE(link->stage(2).trunc(2).size() == 13);
    REQUIRE(link->stage(2).trunc(3).size() == 25);
  }

  SECTION("chain truncation sizes") {
    REQUIRE(link->trunc(0).size() == 1);
    REQUIRE(link->trunc(1).size() == 3);
    REQUIRE(link->trunc(2).size() == 13);
    REQUIRE(link->trunc(3).size() == 79);
  }

  SECTION("truncations are honest posets with a bottom") {
    for (int r = 0; r <= 2; ++r) {
      Poset t = link->trunc(r);
      REQUIRE_NOTHROW(t.validate());
      REQUIRE(t.element(t.bottom_index()).is_bot());
    }
  }

  SECTION("fold and unfold roundtrip through nested stages") {
    // unlike sums of finite posets, unfolding a rank-r compact here lands on
    // a rank-r element of the dagger-valued functor domain, so the checks run
    // on element labels rather than rank-shifted tables
    DomainMap fo = fold_map(link);
    DomainMap un = unfold_map(link);
    Domain lim = bilimit_domain(link);
    Poset inside = lim.trunc(2);
    for (std::size_t i = 0; i < inside.size(); ++i) {
      El x = inside.element(i);
      REQUIRE(fo(un(x)) == x);
    }
    Poset outside = fo.src().trunc(2);
    for (std::size_t i = 0; i < outside.size(); ++i) {
      El y = outside.element(i);
      REQUIRE(un(fo(y)) == y);
    }
    // monotone restrictions exist at the honest ranks
    REQUIRE_NOTHROW(fo.table(1, 2));
    REQUIRE_NOTHROW(un.table(2, 2));
  }

  SECTION("compacts of nested stages resolve and compare") {
    // a rank-1 compact: the L(bottom) shape of the inner fixed point
    El l_bot = inject(link, 1, El::tag("L", El::bot())).value;
    El n_bot = inject(link, 1, El::tag("N", El::bot())).value;
    Domain lim = bilimit_domain(link);
    REQUIRE(lim.el_leq(lim.bottom(), l_bot));
    REQUIRE_FALSE(lim.el_leq(l_bot, n_bot));
    REQUIRE_FALSE(lim.el_leq(n_bot, l_bot));
  }
}

TEST_CASE("inclusion chain reaches every truncation element eventually") {
  auto link = fix_link(nat_functor());
  // composing inclusions trunc(0) -> ... -> trunc(4) lands on the rank-0 image
  MonoMap comp = link->trunc_incl(0);
  for (int r = 1; r < 4; ++r) comp = compose(link->trunc_incl(r), comp);
  REQUIRE(comp.src().size() == 1);
  REQUIRE(comp.dst().size() == 9);
  REQUIRE(comp.dst().element(comp.table()[0]).is_bot());
}
