#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "multilogue/tensor.hpp"

namespace multilogue {

struct GradReport {
  std::string op_name;
  double max_rel_err = 0.0;
  std::map<std::string, double> per_param_err;
  // False when two evaluations at the same point disagreed bitwise; the
  // comparison below is then unreliable.
  bool deterministic = true;
};

// Central-difference check of reverse-mode gradients. `f` must rebuild its
// computation from the current parameter values on every call and return a
// scalar loss; `params` are the grad-participating leaves to perturb.
// Relative error per element is |fd - bp| / max(|fd|, |bp|, 1e-8).
GradReport grad_check(const std::string& op_name, const std::function<Tensor()>& f,
                      const std::vector<std::pair<std::string, Tensor>>& params,
                      double epsilon = 1e-5);

}  // namespace multilogue
