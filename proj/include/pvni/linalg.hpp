#pragma once

#include <span>

#include "pvni/types.hpp"

// Small dense-vector kernels over std::span. Reductions use pairwise
// summation so results do not depend on how callers batch their inputs.
namespace pvni::linalg {

double pairwise_sum(std::span<const double> xs);
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);

Vector subtract(std::span<const double> a, std::span<const double> b);
Vector scaled(std::span<const double> v, double s);

/// Componentwise mean of equal-length rows, reduced pairwise in the given order.
Vector mean_rows(std::span<const std::span<const double>> rows);

}  // namespace pvni::linalg
