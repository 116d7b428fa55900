#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <vector>

#include "bbmlab/errors.hpp"

namespace bbmlab {

// Finite atomic measure on the reals, stored as a sorted multiset of atom
// positions. Ties are kept as multiplicities.
class PointMeasure {
 public:
  PointMeasure() = default;
  explicit PointMeasure(std::vector<double> atoms) : atoms_(std::move(atoms)) {
    std::sort(atoms_.begin(), atoms_.end());
  }
  PointMeasure(std::initializer_list<double> atoms)
      : PointMeasure(std::vector<double>(atoms)) {}

  const std::vector<double>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  double max_atom() const {
    if (atoms_.empty()) throw input_error("max_atom of empty measure");
    return atoms_.back();
  }

  // Number of atoms in the closed interval [a, b]; b may be +infinity.
  std::size_t count_in(double a, double b) const {
    if (a > b) throw input_error("count_in: a > b");
    auto lo = std::lower_bound(atoms_.begin(), atoms_.end(), a);
    auto hi = std::upper_bound(atoms_.begin(), atoms_.end(), b);
    return static_cast<std::size_t>(hi - lo);
  }

  PointMeasure shifted(double c) const {
    std::vector<double> out(atoms_);
    for (double& a : out) a += c;
    return PointMeasure::from_sorted(std::move(out));
  }

  static PointMeasure superpose(const std::vector<PointMeasure>& parts) {
    std::vector<double> out;
    for (const auto& p : parts)
      out.insert(out.end(), p.atoms_.begin(), p.atoms_.end());
    return PointMeasure(std::move(out));
  }

  static PointMeasure from_sorted(std::vector<double> atoms) {
    PointMeasure m;
    m.atoms_ = std::move(atoms);
    return m;
  }

 private:
  std::vector<double> atoms_;
};

inline constexpr double kPlusInfinity = std::numeric_limits<double>::infinity();

}  // namespace bbmlab
