#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include <json.hpp>

#include "d2cc/category.hpp"

namespace d2cc {

/// Per-sentence log probabilities: tag_logp is N x |C|; dep_logp is
/// N x (N+1) where column 0 is the root and column j is token j.
struct ScoreMatrices {
  std::vector<std::string> tokens;
  std::vector<Category> categories;
  Eigen::MatrixXd tag_logp;
  Eigen::MatrixXd dep_logp;

  int size() const { return static_cast<int>(tag_logp.rows()); }
  int category_index(const Category& c) const;  // -1 when absent

  /// Throws DataError naming the first row whose log-sum-exp is not 0 within tol,
  /// or on inconsistent shapes.
  void check(double tol = 1e-6) const;
};

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& row);

/// Score-matrix interchange format: {"tokens", "categories", "tag_logp", "dep_logp"}.
/// null entries stand for -inf.
ScoreMatrices score_matrices_from_json(const nlohmann::json& j);
nlohmann::json score_matrices_to_json(const ScoreMatrices& m);

}  // namespace d2cc
