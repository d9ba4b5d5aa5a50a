#include "fewshot/common.hpp"

#include <cmath>

namespace fewshot {

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

std::vector<double> unit_normalized(std::span<const double> v) {
  const double n = l2_norm(v);
  if (n == 0.0) throw ValidationError("cannot normalize a zero-norm vector");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

}  // namespace fewshot
