#include "pvni/linalg.hpp"

#include <cmath>
#include <string>

#include "pvni/errors.hpp"

namespace pvni::linalg {

namespace {

constexpr std::size_t kPairwiseBlock = 8;

template <typename Term>
double pairwise(std::size_t lo, std::size_t hi, const Term& term) {
  if (hi - lo <= kPairwiseBlock) {
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += term(i);
    return acc;
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise(lo, mid, term) + pairwise(mid, hi, term);
}

void require_same_size(std::size_t a, std::size_t b) {
  if (a != b) {
    throw DimensionMismatch("lengths " + std::to_string(a) + " and " + std::to_string(b));
  }
}

}  // namespace

double pairwise_sum(std::span<const double> xs) {
  return pairwise(0, xs.size(), [&](std::size_t i) { return xs[i]; });
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size());
  return pairwise(0, a.size(), [&](std::size_t i) { return a[i] * b[i]; });
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

Vector subtract(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size());
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Vector scaled(std::span<const double> v, double s) {
  Vector out(v.begin(), v.end());
  for (double& x : out) x *= s;
  return out;
}

Vector mean_rows(std::span<const std::span<const double>> rows) {
  if (rows.empty()) throw DimensionMismatch("mean of zero rows");
  const std::size_t d = rows.front().size();
  for (const auto& r : rows) require_same_size(d, r.size());
  Vector out(d);
  const double n = static_cast<double>(rows.size());
  for (std::size_t j = 0; j < d; ++j) {
    out[j] = pairwise(0, rows.size(), [&](std::size_t i) { return rows[i][j]; }) / n;
  }
  return out;
}

}  // namespace pvni::linalg
