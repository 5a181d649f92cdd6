#pragma once

// Independent reference computations used only by the tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "doa/common.hpp"
#include "doa/nn.hpp"

namespace doa::oracle {

struct Cpa {
  double t;  // seconds
  double d;  // meters
};

/// Closest approach of two constant-velocity points: t* = -(p.v)/|v|^2.
inline Cpa closed_form_cpa(const Vec2& p_rel, const Vec2& v_rel) {
  const double vv = v_rel.squaredNorm();
  const double t = vv > 0.0 ? -p_rel.dot(v_rel) / vv : 0.0;
  return {t, (p_rel + v_rel * t).norm()};
}

/// Central finite differences of a scalar loss w.r.t. every parameter entry.
inline std::vector<nn::Matrix> finite_difference(const std::vector<nn::Param*>& params,
                                                 const std::function<double()>& loss,
                                                 double h = 1e-6) {
  std::vector<nn::Matrix> out;
  for (nn::Param* p : params) {
    nn::Matrix g(p->value.rows(), p->value.cols());
    for (long i = 0; i < p->value.size(); ++i) {
      const double keep = p->value.data()[i];
      p->value.data()[i] = keep + h;
      const double up = loss();
      p->value.data()[i] = keep - h;
      const double down = loss();
      p->value.data()[i] = keep;
      g.data()[i] = (up - down) / (2.0 * h);
    }
    out.push_back(g);
  }
  return out;
}

/// max |a - b| / max(|a|, |b|, floor) over all entries.
inline double max_relative_error(const std::vector<nn::Matrix>& a, const std::vector<nn::Matrix>& b,
                                 double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    for (long i = 0; i < a[k].size(); ++i) {
      const double x = a[k].data()[i], y = b[k].data()[i];
      worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), floor}));
    }
  return worst;
}

}  // namespace doa::oracle
