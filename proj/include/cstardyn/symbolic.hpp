#pragma once

// Symbol dynamics over tracts: essential itineraries (sequences over {0, inf}),
// external addresses (sequences of tracts), the admissibility subshift, the
// lexicographic order, and the correspondence with fundamental domains.
//
// Infinite sequences are represented as preperiod + repeating period, held in
// canonical form: the period is primitive and no preperiod suffix can be
// absorbed into a rotation of the cycle.

#include <cctype>
#include <compare>
#include <numeric>
#include <sstream>
#include <string>

#include "cstardyn/logspace.hpp"

namespace cstar {

struct incomparable_error : std::domain_error {
  using std::domain_error::domain_error;
};

namespace detail {

template <class T>
void canonicalize_seq(std::vector<T>& pre, std::vector<T>& per) {
  for (std::size_t d = 1; d <= per.size(); ++d) {
    if (per.size() % d != 0) continue;
    bool repeats = true;
    for (std::size_t i = d; i < per.size() && repeats; ++i)
      repeats = per[i] == per[i - d];
    if (repeats) {
      per.resize(d);
      break;
    }
  }
  while (!pre.empty() && pre.back() == per.back()) {
    std::rotate(per.begin(), per.end() - 1, per.end());
    pre.pop_back();
  }
}

template <class T>
const T& seq_at(const std::vector<T>& pre, const std::vector<T>& per,
                std::size_t n) {
  if (n < pre.size()) return pre[n];
  return per[(n - pre.size()) % per.size()];
}

template <class T>
void shift_seq(std::vector<T>& pre, std::vector<T>& per, std::size_t k) {
  if (k < pre.size()) {
    pre.erase(pre.begin(), pre.begin() + long(k));
    return;
  }
  k -= pre.size();
  pre.clear();
  std::rotate(per.begin(), per.begin() + long(k % per.size()), per.end());
}

}  // namespace detail

struct EssentialItinerary {
  std::vector<Side> preperiod;
  std::vector<Side> period{Side::inf};

  EssentialItinerary() = default;
  EssentialItinerary(std::vector<Side> pre, std::vector<Side> per)
      : preperiod(std::move(pre)), period(std::move(per)) {
    if (period.empty())
      throw std::invalid_argument("EssentialItinerary: period must be nonempty");
    detail::canonicalize_seq(preperiod, period);
  }

  Side at(std::size_t n) const { return detail::seq_at(preperiod, period, n); }
  friend bool operator==(const EssentialItinerary&, const EssentialItinerary&) = default;
};

struct ExternalAddress {
  std::vector<TractId> preperiod;
  std::vector<TractId> period{TractId{}};

  ExternalAddress() = default;
  ExternalAddress(std::vector<TractId> pre, std::vector<TractId> per)
      : preperiod(std::move(pre)), period(std::move(per)) {
    if (period.empty())
      throw std::invalid_argument("ExternalAddress: period must be nonempty");
    detail::canonicalize_seq(preperiod, period);
  }

  const TractId& at(std::size_t n) const {
    return detail::seq_at(preperiod, period, n);
  }
  std::size_t symbol_count() const { return preperiod.size() + period.size(); }
  friend bool operator==(const ExternalAddress&, const ExternalAddress&) = default;
};

// The head-start comparison function phi(x) = K x + offset; K > 1 keeps phi
// expanding, which the speed ordering relies on.
struct HeadStartProfile {
  double slope_K = 2.0;
  double offset = 10.0;

  HeadStartProfile() = default;
  HeadStartProfile(double K, double off) : slope_K(K), offset(off) {
    if (!(K > 1.0)) throw std::invalid_argument("HeadStartProfile: K must exceed 1");
    if (!(off >= 0.0))
      throw std::invalid_argument("HeadStartProfile: offset must be nonnegative");
  }
  double operator()(double x) const { return slope_K * x + offset; }
};

inline EssentialItinerary itinerary_of_address(const ExternalAddress& a) {
  std::vector<Side> pre, per;
  pre.reserve(a.preperiod.size());
  per.reserve(a.period.size());
  for (const TractId& t : a.preperiod) pre.push_back(t.side);
  for (const TractId& t : a.period) per.push_back(t.side);
  return {std::move(pre), std::move(per)};
}

inline ExternalAddress shift(ExternalAddress a, std::size_t k) {
  detail::shift_seq(a.preperiod, a.period, k);
  return {std::move(a.preperiod), std::move(a.period)};
}

inline EssentialItinerary shift(EssentialItinerary e, std::size_t k) {
  detail::shift_seq(e.preperiod, e.period, k);
  return {std::move(e.preperiod), std::move(e.period)};
}

/// Same shift orbit: after canonicalization, primitive periods must be
/// rotations of each other.
inline bool equivalent(const EssentialItinerary& a, const EssentialItinerary& b) {
  if (a.period.size() != b.period.size()) return false;
  std::vector<Side> doubled = a.period;
  doubled.insert(doubled.end(), a.period.begin(), a.period.end());
  return std::search(doubled.begin(), doubled.end(), b.period.begin(),
                     b.period.end()) != doubled.end();
}

/// Subshift membership: every tract must hand off to a tract clinging to the
/// end it targets, cyclically through the period.
inline bool admissible(const ExternalAddress& a) {
  std::size_t total = a.symbol_count();
  for (std::size_t n = 0; n < total; ++n)
    if (tract_target(a.at(n)) != a.at(n + 1).side) return false;
  return true;
}

namespace detail {
inline std::strong_ordering reverse_order(std::strong_ordering c) {
  if (c == std::strong_ordering::less) return std::strong_ordering::greater;
  if (c == std::strong_ordering::greater) return std::strong_ordering::less;
  return c;
}
}  // namespace detail

/// Vertical order of tracts sharing a side. Toward infinity higher bands are
/// greater; toward zero the orientation reverses.
inline std::strong_ordering lex_compare_tracts(const LogTransform& L,
                                               const TractId& t,
                                               const TractId& u) {
  if (t.side != u.side)
    throw incomparable_error("lex_compare_tracts: tracts cling to different ends");
  long mt = long(t.band) + 2L * L.deg(t.side) * t.strip;
  long mu = long(u.band) + 2L * L.deg(u.side) * u.strip;
  std::strong_ordering c = mt <=> mu;
  return t.side == Side::inf ? c : detail::reverse_order(c);
}

inline std::strong_ordering lex_compare_addresses(const LogTransform& L,
                                                  const ExternalAddress& a,
                                                  const ExternalAddress& b) {
  std::size_t bound = a.preperiod.size() + b.preperiod.size() +
                      std::lcm(a.period.size(), b.period.size());
  for (std::size_t n = 0; n < bound; ++n) {
    const TractId& ta = a.at(n);
    const TractId& tb = b.at(n);
    if (!(ta == tb)) return lex_compare_tracts(L, ta, tb);
  }
  return std::strong_ordering::equal;
}

// A fundamental-domain label: the tract's side and band (strip forgotten)
// together with the index of the delta-strip holding the successor tract's
// center line. Strips of all later tracts are recoverable from these labels,
// so an address is pinned once the strip of its first tract is chosen.
struct FundamentalLabel {
  Side side = Side::inf;
  int band = 0;
  int image_strip = 0;
  friend bool operator==(const FundamentalLabel&, const FundamentalLabel&) = default;
};

struct FundamentalAddress {
  std::vector<FundamentalLabel> preperiod;
  std::vector<FundamentalLabel> period;
  friend bool operator==(const FundamentalAddress&, const FundamentalAddress&) = default;
};

namespace detail {
// index of the delta-strip containing the center line of tract t
inline int delta_strip_of_center(const LogTransform& L, const TractId& t) {
  return int(std::floor((L.band_center_im(t) - L.delta_line_im) /
                        (2.0 * std::numbers::pi)));
}
}  // namespace detail

inline FundamentalAddress tracts_to_fundamental(const LogTransform& L,
                                                const ExternalAddress& a) {
  if (!admissible(a))
    throw std::invalid_argument("tracts_to_fundamental: address is not admissible");
  auto label = [&](const TractId& cur, const TractId& next) {
    return FundamentalLabel{cur.side, cur.band, detail::delta_strip_of_center(L, next)};
  };
  FundamentalAddress out;
  std::size_t np = a.preperiod.size();
  for (std::size_t n = 0; n < np; ++n)
    out.preperiod.push_back(label(a.at(n), a.at(n + 1)));
  for (std::size_t n = 0; n < a.period.size(); ++n)
    out.period.push_back(label(a.at(np + n), a.at(np + (n + 1) % a.period.size())));
  return out;
}

/// Inverse of tracts_to_fundamental. Each label pins its successor's strip
/// absolutely; strip0 places the first tract. Throws if the labels are not
/// cyclically consistent or strip0 clashes with a purely periodic wrap.
inline ExternalAddress fundamental_to_tracts(const LogTransform& L,
                                             const FundamentalAddress& fa,
                                             int strip0) {
  if (fa.period.empty())
    throw std::invalid_argument("fundamental_to_tracts: period must be nonempty");
  std::vector<FundamentalLabel> all = fa.preperiod;
  all.insert(all.end(), fa.period.begin(), fa.period.end());
  std::size_t total = all.size();

  // strip_{n+1} = image_strip_n - (delta-strip of the successor's base band)
  auto successor_strip = [&](const FundamentalLabel& lab, Side nside, int nband) {
    TractId base{nside, nband, 0};
    return lab.image_strip - detail::delta_strip_of_center(L, base);
  };

  std::vector<TractId> tracts(total);
  tracts[0] = {all[0].side, all[0].band, strip0};
  for (std::size_t n = 0; n + 1 < total; ++n)
    tracts[n + 1] = {all[n + 1].side, all[n + 1].band,
                     successor_strip(all[n], all[n + 1].side, all[n + 1].band)};
  // cyclic wrap re-determines the first period entry; it must agree
  const FundamentalLabel& wrap_target = fa.period.front();
  int wrap_strip = successor_strip(all.back(), wrap_target.side, wrap_target.band);
  std::size_t first_period = fa.preperiod.size();
  if (wrap_strip != tracts[first_period].strip)
    throw std::invalid_argument(
        "fundamental_to_tracts: labels are not periodically consistent");

  std::vector<TractId> pre(tracts.begin(), tracts.begin() + long(first_period));
  std::vector<TractId> per(tracts.begin() + long(first_period), tracts.end());
  return {std::move(pre), std::move(per)};
}

// Wire syntax. A tract is "(side,band,strip)" with side "inf" or "0"; an
// address is "[t0,t1,...]([p0,p1,...])", preperiod then period. Example:
// [(inf,0,0)]([(inf,1,0),(0,0,0)]). Itineraries use bare sides in the same
// frame: [0,inf]([inf]). Parsers skip whitespace between tokens.

inline std::string format_tract(const TractId& t) {
  std::ostringstream os;
  os << '(' << side_name(t.side) << ',' << t.band << ',' << t.strip << ')';
  return os.str();
}

inline std::string format_address(const ExternalAddress& a) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < a.preperiod.size(); ++i)
    os << (i ? "," : "") << format_tract(a.preperiod[i]);
  os << "]([";
  for (std::size_t i = 0; i < a.period.size(); ++i)
    os << (i ? "," : "") << format_tract(a.period[i]);
  os << "])";
  return os.str();
}

inline std::string format_itinerary(const EssentialItinerary& e) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < e.preperiod.size(); ++i)
    os << (i ? "," : "") << side_name(e.preperiod[i]);
  os << "]([";
  for (std::size_t i = 0; i < e.period.size(); ++i)
    os << (i ? "," : "") << side_name(e.period[i]);
  os << "])";
  return os.str();
}

namespace detail {

class SymbolCursor {
 public:
  explicit SymbolCursor(const std::string& s) : s_(s) {}

  void expect(char c) {
    skip();
    if (pos_ >= s_.size() || s_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  char peek() {
    skip();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }
  Side side() {
    skip();
    if (s_.compare(pos_, 3, "inf") == 0) {
      pos_ += 3;
      return Side::inf;
    }
    if (pos_ < s_.size() && s_[pos_] == '0' &&
        (pos_ + 1 >= s_.size() || !std::isdigit((unsigned char)s_[pos_ + 1]))) {
      ++pos_;
      return Side::zero;
    }
    fail("expected side 'inf' or '0'");
  }
  int integer() {
    skip();
    std::size_t start = pos_;
    if (pos_ < s_.size() && (s_[pos_] == '-' || s_[pos_] == '+')) ++pos_;
    while (pos_ < s_.size() && std::isdigit((unsigned char)s_[pos_])) ++pos_;
    if (pos_ == start || (pos_ == start + 1 && !std::isdigit((unsigned char)s_[start])))
      fail("expected integer");
    return std::stoi(s_.substr(start, pos_ - start));
  }
  void finish() {
    skip();
    if (pos_ != s_.size()) fail("trailing characters");
  }
  [[noreturn]] void fail(const std::string& what) {
    throw std::invalid_argument("address syntax at offset " + std::to_string(pos_) +
                                ": " + what);
  }

 private:
  void skip() {
    while (pos_ < s_.size() && std::isspace((unsigned char)s_[pos_])) ++pos_;
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

inline TractId parse_tract_body(SymbolCursor& c) {
  c.expect('(');
  Side s = c.side();
  c.expect(',');
  int band = c.integer();
  c.expect(',');
  int strip = c.integer();
  c.expect(')');
  return {s, band, strip};
}

template <class T, class Elem>
std::vector<T> parse_bracket_list(SymbolCursor& c, Elem elem) {
  std::vector<T> out;
  c.expect('[');
  if (!c.accept(']')) {
    do {
      out.push_back(elem(c));
    } while (c.accept(','));
    c.expect(']');
  }
  return out;
}

}  // namespace detail

inline ExternalAddress parse_address(const std::string& text) {
  detail::SymbolCursor c(text);
  auto tract = [](detail::SymbolCursor& cc) { return detail::parse_tract_body(cc); };
  auto pre = detail::parse_bracket_list<TractId>(c, tract);
  c.expect('(');
  auto per = detail::parse_bracket_list<TractId>(c, tract);
  c.expect(')');
  c.finish();
  if (per.empty()) c.fail("period must contain at least one tract");
  return {std::move(pre), std::move(per)};
}

inline EssentialItinerary parse_itinerary(const std::string& text) {
  detail::SymbolCursor c(text);
  auto side = [](detail::SymbolCursor& cc) { return cc.side(); };
  auto pre = detail::parse_bracket_list<Side>(c, side);
  c.expect('(');
  auto per = detail::parse_bracket_list<Side>(c, side);
  c.expect(')');
  c.finish();
  if (per.empty()) c.fail("period must contain at least one side");
  return {std::move(pre), std::move(per)};
}

// Parses a single tract symbol "(side,band,strip)", the inverse of format_tract.
inline TractId parse_tract(const std::string& text) {
  detail::SymbolCursor c(text);
  TractId t = detail::parse_tract_body(c);
  c.finish();
  return t;
}

}  // namespace cstar
