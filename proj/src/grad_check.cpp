#include "multilogue/grad_check.hpp"

#include <cmath>
#include <cstring>

#include "multilogue/errors.hpp"

namespace multilogue {

GradReport grad_check(const std::string& op_name, const std::function<Tensor()>& f,
                      const std::vector<std::pair<std::string, Tensor>>& params, double epsilon) {
  if (epsilon <= 0.0) throw DomainError("grad_check: epsilon must be positive");

  GradReport report;
  report.op_name = op_name;

  for (auto& [name, param] : params) {
    Tensor p = param;
    p.zero_grad();
  }

  const Tensor loss = f();
  if (loss.rank() != 0) throw ContractError("grad_check: f must return a scalar");
  const double base = loss.item();
  {
    const double repeat = f().item();
    // Bitwise disagreement means f draws on hidden state; flag and continue.
    if (std::memcmp(&repeat, &base, sizeof(double)) != 0) report.deterministic = false;
  }
  backward(loss);

  // Snapshot analytic gradients before perturbation re-runs of f.
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, param] : params) {
    analytic.push_back(param.has_grad() ? param.grad()
                                        : std::vector<double>(param.size(), 0.0));
  }

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const auto& [name, param] = params[pi];
    Tensor p = param;
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p.values()[i];
      p.values_mut()[i] = saved + epsilon;
      const double up = f().item();
      p.values_mut()[i] = saved - epsilon;
      const double down = f().item();
      p.values_mut()[i] = saved;
      const double fd = (up - down) / (2.0 * epsilon);
      const double bp = analytic[pi][i];
      const double rel = std::abs(fd - bp) / std::max({std::abs(fd), std::abs(bp), 1e-8});
      worst = std::max(worst, rel);
    }
    report.per_param_err[name] = worst;
    report.max_rel_err = std::max(report.max_rel_err, worst);
  }
  return report;
}

}  // namespace multilogue
