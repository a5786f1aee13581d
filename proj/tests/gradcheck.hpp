#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ignet/autograd.hpp"

namespace testutil {

struct GradCheckResult {
  double max_rel = 0;
  std::string worst_param;
  ignet::index_t worst_index = -1;
  double analytic = 0, numeric = 0;
};

// Central finite differences against reverse-mode gradients.
// rel = |fd - an| / max(|fd|, |an|, floor); returns the worst element.
// make_loss must rebuild the graph from the given leaves' current values.
inline GradCheckResult grad_check(const std::vector<ignet::Value<double>>& params,
                                  const std::function<ignet::Value<double>()>& make_loss,
                                  double h = 1e-5, double floor = 1e-2) {
  using ignet::index_t;
  auto loss = make_loss();
  auto record = ignet::backward(loss, params);

  GradCheckResult res;
  for (const auto& p : params) {
    const ignet::Tensor<double>& analytic = record.at(p->name);
    for (index_t i = 0; i < p->value.numel(); ++i) {
      const double keep = p->value[i];
      p->value[i] = keep + h;
      const double f1 = make_loss()->value[0];
      p->value[i] = keep - h;
      const double f2 = make_loss()->value[0];
      p->value[i] = keep;
      const double fd = (f1 - f2) / (2 * h);
      const double an = analytic[i];
      const double denom = std::max({std::abs(fd), std::abs(an), floor});
      const double rel = std::abs(fd - an) / denom;
      if (rel > res.max_rel) {
        res.max_rel = rel;
        res.worst_param = p->name;
        res.worst_index = i;
        res.analytic = an;
        res.numeric = fd;
      }
    }
  }
  return res;
}

}  // namespace testutil
