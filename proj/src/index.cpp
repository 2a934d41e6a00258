#include "awrb/index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <stdexcept>

namespace awrb {

bool TensorBasis::valid(const TensorIndex& t) const {
  if (t.dim != dim) return false;
  for (int i = 0; i < dim; ++i)
    if (!b[i].valid(t.c[i])) return false;
  return true;
}

IndexSet::IndexSet(std::vector<TensorIndex> v) : v_(std::move(v)) {
  std::sort(v_.begin(), v_.end());
  v_.erase(std::unique(v_.begin(), v_.end()), v_.end());
}

bool IndexSet::contains(const TensorIndex& t) const { return std::binary_search(v_.begin(), v_.end(), t); }

bool IndexSet::insert(const TensorIndex& t) {
  auto it = std::lower_bound(v_.begin(), v_.end(), t);
  if (it != v_.end() && *it == t) return false;
  v_.insert(it, t);
  return true;
}

bool IndexSet::subset_of(const IndexSet& o) const { return std::includes(o.v_.begin(), o.v_.end(), v_.begin(), v_.end()); }

IndexSet set_union(const IndexSet& a, const IndexSet& b) {
  IndexSet r;
  std::set_union(a.v_.begin(), a.v_.end(), b.v_.begin(), b.v_.end(), std::back_inserter(r.v_));
  return r;
}

IndexSet set_intersection(const IndexSet& a, const IndexSet& b) {
  IndexSet r;
  std::set_intersection(a.v_.begin(), a.v_.end(), b.v_.begin(), b.v_.end(), std::back_inserter(r.v_));
  return r;
}

// ---------------------------------------------------------------------------

namespace {
bool entry_less(const CoeffVector::Entry& a, const CoeffVector::Entry& b) { return a.first < b.first; }
}  // namespace

CoeffVector::CoeffVector(std::vector<Entry> e) {
  std::stable_sort(e.begin(), e.end(), entry_less);
  for (auto& x : e) {
    if (!e_.empty() && e_.back().first == x.first) e_.back().second += x.second;
    else e_.push_back(x);
  }
}

double CoeffVector::get(const TensorIndex& t) const {
  auto it = std::lower_bound(e_.begin(), e_.end(), Entry{t, 0.0}, entry_less);
  return (it != e_.end() && it->first == t) ? it->second : 0.0;
}

void CoeffVector::set(const TensorIndex& t, double v) {
  auto it = std::lower_bound(e_.begin(), e_.end(), Entry{t, 0.0}, entry_less);
  if (it != e_.end() && it->first == t) it->second = v;
  else e_.insert(it, {t, v});
}

void CoeffVector::add(const TensorIndex& t, double v) {
  auto it = std::lower_bound(e_.begin(), e_.end(), Entry{t, 0.0}, entry_less);
  if (it != e_.end() && it->first == t) it->second += v;
  else e_.insert(it, {t, v});
}

double CoeffVector::norm() const {
  double s = 0.0;
  for (auto& [t, v] : e_) s += v * v;
  return std::sqrt(s);
}

double CoeffVector::dot(const CoeffVector& o) const {
  double s = 0.0;
  auto a = e_.begin(), b = o.e_.begin();
  while (a != e_.end() && b != o.e_.end()) {
    if (a->first < b->first) ++a;
    else if (b->first < a->first) ++b;
    else s += (a++)->second * (b++)->second;
  }
  return s;
}

IndexSet CoeffVector::support() const {
  std::vector<TensorIndex> v;
  v.reserve(e_.size());
  for (auto& [t, x] : e_) v.push_back(t);
  return IndexSet(std::move(v));
}

CoeffVector CoeffVector::restricted(const IndexSet& s) const {
  CoeffVector r;
  for (auto& e : e_)
    if (s.contains(e.first)) r.e_.push_back(e);
  return r;
}

void CoeffVector::compact() {
  e_.erase(std::remove_if(e_.begin(), e_.end(), [](const Entry& e) { return e.second == 0.0; }), e_.end());
}

void CoeffVector::axpy(double a, const CoeffVector& x) {
  std::vector<Entry> out;
  out.reserve(e_.size() + x.e_.size());
  auto p = e_.cbegin();
  auto q = x.e_.cbegin();
  while (p != e_.end() || q != x.e_.end()) {
    if (q == x.e_.end() || (p != e_.end() && p->first < q->first)) out.push_back(*p++);
    else if (p == e_.end() || q->first < p->first) out.push_back({q->first, a * q->second}), ++q;
    else out.push_back({p->first, p->second + a * q->second}), ++p, ++q;
  }
  e_.swap(out);
}

void CoeffVector::scale(double a) {
  for (auto& e : e_) e.second *= a;
}

// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const TensorIndex& t) {
  j = nlohmann::json::array();
  for (int i = 0; i < t.dim; ++i) j.push_back({t.c[i].j, t.c[i].k, static_cast<int>(t.c[i].kind)});
}

void from_json(const nlohmann::json& j, TensorIndex& t) {
  t = TensorIndex();
  t.dim = static_cast<int>(j.size());
  if (t.dim < 1 || t.dim > 2) throw std::invalid_argument("tensor index: dimension must be 1 or 2");
  for (int i = 0; i < t.dim; ++i) t.c[i] = {j[i][0].get<int>(), j[i][1].get<int>(), static_cast<Kind>(j[i][2].get<int>())};
}

void to_json(nlohmann::json& j, const CoeffVector& v) {
  j = nlohmann::json::array();
  for (auto& [t, x] : v) j.push_back({{"index", t}, {"value", x}});
}

void from_json(const nlohmann::json& j, CoeffVector& v) {
  std::vector<CoeffVector::Entry> e;
  for (auto& r : j) e.push_back({r.at("index").get<TensorIndex>(), r.at("value").get<double>()});
  v = CoeffVector(std::move(e));
}

// ---------------------------------------------------------------------------

namespace {

// True if every part of `target` lies in the union of `cover`.
bool covered(const Support& target, std::vector<Interval> cover) {
  std::sort(cover.begin(), cover.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> merged;
  for (auto& iv : cover) {
    if (!merged.empty() && iv.lo <= merged.back().hi + 1e-14) merged.back().hi = std::max(merged.back().hi, iv.hi);
    else merged.push_back(iv);
  }
  for (auto& p : target.parts) {
    bool ok = false;
    for (auto& m : merged)
      if (m.lo <= p.lo + 1e-14 && p.hi <= m.hi + 1e-14) ok = true;
    if (!ok) return false;
  }
  return true;
}

}  // namespace

bool is_tree(const std::vector<WaveletIndex1D>& set, const UnivariateBasis& basis) {
  std::map<int, std::vector<WaveletIndex1D>> by_level;
  for (auto& i : set) {
    basis.check(i);
    by_level[i.j].push_back(i);
  }
  for (auto& [j, members] : by_level) {
    if (j == 0) continue;
    auto it = by_level.find(j - 1);
    if (it == by_level.end()) return false;
    for (auto& m : members) {
      Support s = basis.support(m);
      std::vector<Interval> cover;
      for (auto& p : it->second) {
        Support ps = basis.support(p);
        if (!ps.intersects_interior(s)) continue;
        for (auto& part : ps.parts) cover.push_back(part);
      }
      if (!covered(s, cover)) return false;
    }
  }
  return true;
}

namespace {

// Slices of a tensor set along direction `dir`: grouped by the other component.
std::map<WaveletIndex1D, std::vector<WaveletIndex1D>> slices(const IndexSet& set, int dir) {
  std::map<WaveletIndex1D, std::vector<WaveletIndex1D>> out;
  for (auto& t : set) out[t.dim == 1 ? WaveletIndex1D{} : t.c[1 - dir]].push_back(t.c[dir]);
  return out;
}

}  // namespace

bool is_multitree(const IndexSet& set, const TensorBasis& basis) {
  for (int d = 0; d < basis.dim; ++d)
    for (auto& [other, members] : slices(set, d))
      if (!is_tree(members, basis.b[d])) return false;
  return true;
}

IndexSet multitree_completion(const IndexSet& set, const TensorBasis& basis) {
  // Work from the largest total level downwards; parents have a strictly
  // smaller total level, so one ordered sweep reaches the closure.
  std::set<TensorIndex> all(set.begin(), set.end());
  auto cmp = [](const TensorIndex& a, const TensorIndex& b) {
    if (a.total_level() != b.total_level()) return a.total_level() > b.total_level();
    return a < b;
  };
  std::set<TensorIndex, decltype(cmp)> work(cmp);
  for (auto& t : set) {
    if (!basis.valid(t)) throw std::out_of_range("multitree_completion: invalid index");
    work.insert(t);
  }
  while (!work.empty()) {
    TensorIndex t = *work.begin();
    work.erase(work.begin());
    for (int d = 0; d < basis.dim; ++d) {
      for (auto& p : basis.b[d].parents(t.c[d])) {
        TensorIndex q = t;
        q.c[d] = p;
        if (all.insert(q).second) work.insert(q);
      }
    }
  }
  return IndexSet(std::vector<TensorIndex>(all.begin(), all.end()));
}

CoeffVector best_n_term(const CoeffVector& v, std::size_t N) {
  std::vector<std::size_t> order(v.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto& e = v.entries();
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(e[a].second) > std::abs(e[b].second); });
  order.resize(std::min(N, order.size()));
  std::vector<CoeffVector::Entry> keep;
  for (auto i : order) keep.push_back(e[i]);
  return CoeffVector(std::move(keep));
}

RateEstimate approx_rate_estimate(const CoeffVector& v) {
  std::vector<double> a;
  for (auto& [t, x] : v)
    if (x != 0.0) a.push_back(std::abs(x));
  if (a.size() < 16) throw std::invalid_argument("approx_rate_estimate: need at least 16 nonzero entries");
  std::sort(a.begin(), a.end(), std::greater<>());
  if (a.front() == a.back()) throw std::domain_error("approx_rate_estimate: undefined rate for equal magnitudes");
  const std::size_t n = a.size();
  // tail[N] = ||v - v_N||
  std::vector<double> tail(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) tail[i] = tail[i + 1] + a[i] * a[i];
  std::vector<double> lx, ly;
  for (std::size_t N = 1; N < n; N *= 2) {
    if (tail[N] <= 0.0) break;
    lx.push_back(std::log(static_cast<double>(N)));
    ly.push_back(0.5 * std::log(tail[N]));
  }
  RateEstimate r;
  if (lx.size() < 2) {
    r.s = std::numeric_limits<double>::infinity();
    r.super_algebraic = true;
    return r;
  }
  const double m = static_cast<double>(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) sx += lx[i], sy += ly[i], sxx += lx[i] * lx[i], sxy += lx[i] * ly[i];
  r.s = -(m * sxy - sx * sy) / (m * sxx - sx * sx);
  // Accelerating decay at the end of the range means no algebraic rate.
  const std::size_t k = lx.size() - 1;
  double last = -(ly[k] - ly[k - 1]) / (lx[k] - lx[k - 1]);
  if (last > 2.0 * std::max(r.s, 0.5)) {
    r.super_algebraic = true;
    r.s = std::numeric_limits<double>::infinity();
  }
  return r;
}

}  // namespace awrb
