#include "d2cc/scores.hpp"

#include <cmath>
#include <limits>

#include "d2cc/errors.hpp"

namespace d2cc {

namespace {

Eigen::MatrixXd read_matrix(const nlohmann::json& rows, const char* what) {
  if (!rows.is_array()) throw DataError(std::string(what) + " must be an array of rows");
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto m = n == 0 ? 0 : static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd out(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != m) {
      throw DataError(std::string(what) + " row " + std::to_string(i + 1) + " has the wrong length");
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto& v = row[static_cast<std::size_t>(j)];
      if (v.is_null()) {
        out(i, j) = -std::numeric_limits<double>::infinity();
      } else if (v.is_number()) {
        out(i, j) = v.get<double>();
      } else {
        throw DataError(std::string(what) + " row " + std::to_string(i + 1) + " has a non-numeric entry");
      }
    }
  }
  return out;
}

nlohmann::json write_matrix(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (std::isinf(m(i, j))) {
        row.push_back(nullptr);
      } else {
        row.push_back(m(i, j));
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& row) {
  double mx = row.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((row.array() - mx).exp().sum());
}

int ScoreMatrices::category_index(const Category& c) const {
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (categories[i] == c) return static_cast<int>(i);
  }
  return -1;
}

void ScoreMatrices::check(double tol) const {
  const auto n = tag_logp.rows();
  if (n == 0) throw DataError("score matrices are empty");
  if (tag_logp.cols() != static_cast<Eigen::Index>(categories.size())) {
    throw DataError("tag_logp has " + std::to_string(tag_logp.cols()) + " columns but there are " +
                    std::to_string(categories.size()) + " categories");
  }
  if (dep_logp.rows() != n || dep_logp.cols() != n + 1) {
    throw DataError("dep_logp must be N x (N+1)");
  }
  if (!tokens.empty() && static_cast<Eigen::Index>(tokens.size()) != n) {
    throw DataError("token count does not match the matrices");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(log_sum_exp(tag_logp.row(i).transpose())) > tol) {
      throw DataError("tag_logp row " + std::to_string(i + 1) + " is not normalized");
    }
    if (std::abs(log_sum_exp(dep_logp.row(i).transpose())) > tol) {
      throw DataError("dep_logp row " + std::to_string(i + 1) + " is not normalized");
    }
  }
}

ScoreMatrices score_matrices_from_json(const nlohmann::json& j) {
  ScoreMatrices m;
  try {
    if (j.contains("tokens")) m.tokens = j.at("tokens").get<std::vector<std::string>>();
    for (const auto& c : j.at("categories")) m.categories.push_back(parse_category(c.get<std::string>()));
    m.tag_logp = read_matrix(j.at("tag_logp"), "tag_logp");
    m.dep_logp = read_matrix(j.at("dep_logp"), "dep_logp");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed score matrices: ") + e.what());
  }
  return m;
}

nlohmann::json score_matrices_to_json(const ScoreMatrices& m) {
  nlohmann::json j;
  j["tokens"] = m.tokens;
  auto cats = nlohmann::json::array();
  for (const auto& c : m.categories) cats.push_back(c.str());
  j["categories"] = std::move(cats);
  j["tag_logp"] = write_matrix(m.tag_logp);
  j["dep_logp"] = write_matrix(m.dep_logp);
  return j;
}

}  // namespace d2cc
