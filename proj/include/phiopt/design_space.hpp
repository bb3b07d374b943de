#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace phiopt {

struct DesignSpaceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Closed interval [lo, hi]; lo == hi is a singleton.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool is_singleton() const { return lo == hi; }
  double length() const { return hi - lo; }
};

// Finite union of disjoint closed intervals and isolated points on the real
// line, kept sorted by left endpoint.
class DesignSpace {
 public:
  explicit DesignSpace(std::vector<Interval> intervals)
      : intervals_(std::move(intervals)) {
    if (intervals_.empty())
      throw DesignSpaceError("design space needs at least one interval");
    for (const Interval& iv : intervals_) {
      if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi))
        throw DesignSpaceError("design space endpoints must be finite");
      if (iv.lo > iv.hi)
        throw DesignSpaceError("interval has lo > hi");
    }
    std::sort(intervals_.begin(), intervals_.end(),
              [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    for (std::size_t i = 1; i < intervals_.size(); ++i)
      if (intervals_[i].lo <= intervals_[i - 1].hi)
        throw DesignSpaceError("design space intervals must be disjoint");
  }

  static DesignSpace interval(double lo, double hi) {
    return DesignSpace({Interval{lo, hi}});
  }

  const std::vector<Interval>& intervals() const { return intervals_; }

  // Number of proper intervals and of singletons.
  int proper_count() const {
    int n = 0;
    for (const Interval& iv : intervals_) n += !iv.is_singleton();
    return n;
  }
  int singleton_count() const {
    return static_cast<int>(intervals_.size()) - proper_count();
  }

  double min() const { return intervals_.front().lo; }
  double max() const { return intervals_.back().hi; }

  bool contains(double t, double tol = 0.0) const {
    for (const Interval& iv : intervals_)
      if (t >= iv.lo - tol && t <= iv.hi + tol) return true;
    return false;
  }

  double distance(double t) const {
    double d = std::numeric_limits<double>::infinity();
    for (const Interval& iv : intervals_) {
      double di = t < iv.lo ? iv.lo - t : (t > iv.hi ? t - iv.hi : 0.0);
      d = std::min(d, di);
    }
    return d;
  }

  // Nearest point of the space.
  double clamp(double t) const {
    double best = intervals_.front().lo;
    double bd = std::numeric_limits<double>::infinity();
    for (const Interval& iv : intervals_) {
      double c = std::min(std::max(t, iv.lo), iv.hi);
      double d = std::abs(c - t);
      if (d < bd) {
        bd = d;
        best = c;
      }
    }
    return best;
  }

  // Deterministic evaluation grid: n equispaced points per proper interval
  // (endpoints included) plus every singleton, sorted.
  std::vector<double> grid(int n_per_interval) const {
    if (n_per_interval < 2)
      throw DesignSpaceError("grid needs at least 2 points per interval");
    std::vector<double> g;
    for (const Interval& iv : intervals_) {
      if (iv.is_singleton()) {
        g.push_back(iv.lo);
        continue;
      }
      for (int i = 0; i < n_per_interval; ++i)
        g.push_back(iv.lo + (iv.hi - iv.lo) * i / (n_per_interval - 1.0));
    }
    std::sort(g.begin(), g.end());
    return g;
  }

 private:
  std::vector<Interval> intervals_;
};

}  // namespace phiopt
