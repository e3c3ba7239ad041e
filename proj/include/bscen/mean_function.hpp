#pragma once

#include <Eigen/Dense>

namespace bscen {

// Conditional mean F: R^k -> R^n. Implementations are immutable snapshots and
// safe to evaluate concurrently.
class MeanFunction {
 public:
  virtual ~MeanFunction() = default;

  virtual Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& x) const = 0;
  virtual Eigen::Index n() const = 0;
  virtual Eigen::Index k() const = 0;

  Eigen::VectorXd operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const { return predict(x); }
};

}  // namespace bscen
