#include "core/tensor.hpp"

namespace i2i {

GradCheckReport grad_check(
    const std::function<Tensor<double>(Tape<double>&, std::vector<Tensor<double>>&)>& fn,
    std::vector<Tensor<double>> params, double eps, double tol) {
  GradCheckReport report;
  report.tol = tol;

  Tape<double> tape;
  std::vector<Tensor<double>> leaves;
  leaves.reserve(params.size());
  for (auto& p : params) leaves.push_back(tape.leaf(p));
  Tensor<double> loss = fn(tape, leaves);
  require(loss.size() == 1, ErrorCode::InvalidArgument, "grad_check: fn must be scalar-valued");
  tape.backward(loss);

  std::vector<std::vector<double>> analytic;
  for (auto& l : leaves) analytic.push_back(tape.grad(l));

  for (size_t p = 0; p < params.size(); ++p) {
    for (std::int64_t i = 0; i < params[p].size(); ++i) {
      double saved = (*params[p].data)[i];
      auto eval = [&](double v) {
        (*params[p].data)[i] = v;
        Tape<double> t2;
        std::vector<Tensor<double>> l2;
        for (auto& q : params) l2.push_back(t2.leaf(q));
        return fn(t2, l2).item();
      };
      double fp = eval(saved + eps);
      double fm = eval(saved - eps);
      (*params[p].data)[i] = saved;
      double numeric = (fp - fm) / (2.0 * eps);
      double got = analytic[p][i];
      double rel = std::abs(got - numeric) / std::max({std::abs(got), std::abs(numeric), 1e-8});
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = "param " + std::to_string(p) + "[" + std::to_string(i) + "]: analytic " +
                       std::to_string(got) + " numeric " + std::to_string(numeric);
      }
    }
  }
  return report;
}

}  // namespace i2i
