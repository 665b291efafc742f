#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace domfix {

// Structured element labels. Every element of every poset this library
// builds is one of these terms:
//
//   bot            the designated least element
//   name           an atom (base-poset element)
//   Label(e)       a tagged copy, introduced by labelled sums
//   (e1, ..., en)  a tuple, introduced by products
//
// Keeping labels structured (rather than opaque strings) is what lets
// fold/unfold act by re-interpretation: the normal form of a compact element
// of a solved domain is literally its stage value.
class El {
 public:
  enum class Kind : std::uint8_t { Bot = 0, Atom = 1, Tag = 2, Tup = 3 };

  El() : n_(bot_node()) {}

  static El bot() { return El(); }

  static El atom(std::string name) {
    return El(std::make_shared<const Node>(Kind::Atom, std::move(name), std::vector<El>{}));
  }

  static El tag(std::string label, El inner) {
    return El(std::make_shared<const Node>(Kind::Tag, std::move(label),
                                           std::vector<El>{std::move(inner)}));
  }

  static El tup(std::vector<El> parts) {
    return El(std::make_shared<const Node>(Kind::Tup, std::string{}, std::move(parts)));
  }

  Kind kind() const { return n_->k; }
  bool is_bot() const { return n_->k == Kind::Bot; }

  // Atom name or Tag label.
  const std::string& name() const { return n_->s; }

  // Tag payload.
  const El& inner() const { return n_->kids[0]; }

  // Tuple components.
  const std::vector<El>& parts() const { return n_->kids; }

  std::size_t hash() const { return n_->h; }

  friend bool operator==(const El& a, const El& b) {
    if (a.n_ == b.n_) return true;
    if (a.n_->h != b.n_->h) return false;
    return structurally_equal(*a.n_, *b.n_);
  }

  friend bool operator!=(const El& a, const El& b) { return !(a == b); }

  // Total order used for canonical sorting of poset element lists. Not the
  // partial order of any poset; purely syntactic.
  friend std::strong_ordering operator<=>(const El& a, const El& b) {
    if (a.n_ == b.n_) return std::strong_ordering::equal;
    return compare(*a.n_, *b.n_);
  }

  std::string str() const {
    std::string out;
    print(out);
    return out;
  }

 private:
  struct Node {
    Kind k;
    std::string s;
    std::vector<El> kids;
    std::size_t h;

    Node(Kind kk, std::string ss, std::vector<El> kk2)
        : k(kk), s(std::move(ss)), kids(std::move(kk2)), h(compute_hash(k, s, kids)) {}
  };

  explicit El(std::shared_ptr<const Node> n) : n_(std::move(n)) {}

  static const std::shared_ptr<const Node>& bot_node() {
    static const std::shared_ptr<const Node> b =
        std::make_shared<const Node>(Kind::Bot, std::string{}, std::vector<El>{});
    return b;
  }

  static std::size_t compute_hash(Kind k, const std::string& s, const std::vector<El>& kids) {
    std::size_t h = 0x9e3779b97f4a7c15ull ^ static_cast<std::size_t>(k);
    h = h * 1099511628211ull ^ std::hash<std::string>{}(s);
    for (const El& e : kids) h = h * 1099511628211ull ^ e.hash();
    return h;
  }

  static bool structurally_equal(const Node& a, const Node& b) {
    if (a.k != b.k || a.s != b.s || a.kids.size() != b.kids.size()) return false;
    for (std::size_t i = 0; i < a.kids.size(); ++i)
      if (!(a.kids[i] == b.kids[i])) return false;
    return true;
  }

  static std::strong_ordering compare(const Node& a, const Node& b) {
    if (a.k != b.k) return a.k <=> b.k;
    if (int c = a.s.compare(b.s); c != 0)
      return c < 0 ? std::strong_ordering::less : std::strong_ordering::greater;
    std::size_t n = a.kids.size() < b.kids.size() ? a.kids.size() : b.kids.size();
    for (std::size_t i = 0; i < n; ++i)
      if (auto c = a.kids[i] <=> b.kids[i]; c != std::strong_ordering::equal) return c;
    return a.kids.size() <=> b.kids.size();
  }

  void print(std::string& out) const {
    switch (n_->k) {
      case Kind::Bot:
        out += "bot";
        break;
      case Kind::Atom:
        out += n_->s;
        break;
      case Kind::Tag:
        out += n_->s;
        out += '(';
        n_->kids[0].print(out);
        out += ')';
        break;
      case Kind::Tup:
        out += '(';
        for (std::size_t i = 0; i < n_->kids.size(); ++i) {
          if (i) out += ", ";
          n_->kids[i].print(out);
        }
        out += ')';
        break;
    }
  }

  std::shared_ptr<const Node> n_;
};

struct ElHash {
  std::size_t operator()(const El& e) const { return e.hash(); }
};

}  // namespace domfix
