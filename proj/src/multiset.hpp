#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <initializer_list>
#include <map>
#include <set>

namespace dtsi {

// Finite bag with positive multiplicities. Keys with count zero are never stored.
template <class T>
class Multiset {
 public:
  using Counts = std::map<T, std::size_t>;

  Multiset() = default;
  Multiset(std::initializer_list<T> xs) {
    for (const auto& x : xs) add(x);
  }

  void add(const T& x, std::size_t n = 1) {
    if (n) counts_[x] += n;
  }

  // Removes up to n copies; returns how many were removed.
  std::size_t remove(const T& x, std::size_t n = 1) {
    auto it = counts_.find(x);
    if (it == counts_.end()) return 0;
    std::size_t k = std::min(n, it->second);
    it->second -= k;
    if (it->second == 0) counts_.erase(it);
    return k;
  }

  std::size_t count(const T& x) const {
    auto it = counts_.find(x);
    return it == counts_.end() ? 0 : it->second;
  }
  bool contains(const T& x) const { return counts_.count(x) != 0; }
  bool empty() const { return counts_.empty(); }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [_, c] : counts_) n += c;
    return n;
  }

  std::set<T> support() const {
    std::set<T> s;
    for (const auto& [x, _] : counts_) s.insert(x);
    return s;
  }

  const Counts& counts() const { return counts_; }

  Multiset operator+(const Multiset& o) const {
    Multiset r = *this;
    for (const auto& [x, c] : o.counts_) r.add(x, c);
    return r;
  }

  Multiset operator-(const Multiset& o) const {
    Multiset r = *this;
    for (const auto& [x, c] : o.counts_) r.remove(x, c);
    return r;
  }

  bool subset_of(const Multiset& o) const {
    for (const auto& [x, c] : counts_)
      if (o.count(x) < c) return false;
    return true;
  }

  template <class F>
  auto map(F f) const {
    Multiset<std::decay_t<decltype(f(std::declval<const T&>()))>> r;
    for (const auto& [x, c] : counts_) r.add(f(x), c);
    return r;
  }

  auto begin() const { return counts_.begin(); }
  auto end() const { return counts_.end(); }

  friend bool operator==(const Multiset&, const Multiset&) = default;
  friend auto operator<=>(const Multiset& a, const Multiset& b) { return a.counts_ <=> b.counts_; }

 private:
  Counts counts_;
};

}  // namespace dtsi
