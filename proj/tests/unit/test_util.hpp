#pragma once

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <vector>

#include "gibbslab/core.hpp"
#include "gibbslab/error.hpp"

namespace gibbslab::testing {

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

/// One row per sample.
inline Dataset data(std::initializer_list<std::initializer_list<double>> rows,
                    Role role = Role::Target) {
  std::vector<Vector> r;
  for (auto row : rows) r.push_back(vec(row));
  return Dataset::from_rows(r, role);
}

template <class F>
void expect_error(ErrorCode code, F&& f) {
  try {
    f();
    ADD_FAILURE() << "expected error " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

inline double rel_diff(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

}  // namespace gibbslab::testing
