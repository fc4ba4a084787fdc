#include "bap/lasso_adapter.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "bap/errors.hpp"

namespace bap {

void validate_lasso(const LassoProblem& p) {
  if (p.A.size() == 0) throw ContractViolation("lasso: A is empty");
  if (p.b.size() != p.A.rows()) {
    throw DimensionMismatch("lasso: b has length " + std::to_string(p.b.size()) +
                            " but A has " + std::to_string(p.A.rows()) + " rows");
  }
  if (!(p.lambda > 0.0)) {
    throw ContractViolation("lasso: lambda must be positive, got " + std::to_string(p.lambda));
  }
  for (int i = 0; i < p.cols(); ++i) {
    if (p.A.col(i).norm() == 0.0) {
      throw ContractViolation("lasso: column " + std::to_string(i + 1) +
                              " of A is zero; slabs require nonzero columns");
    }
  }
}

PolyhedralSet SlabSet::as_polyhedron() const {
  PolyhedralSet set;
  set.halfspaces.emplace_back(axis, half_width);
  set.halfspaces.emplace_back(-axis, half_width);
  return set;
}

SlabSet slab_for_column(const LassoProblem& p, int column) {
  const double col_norm = p.A.col(column).norm();
  SlabSet slab;
  slab.axis = p.A.col(column) / col_norm;
  slab.half_width = p.lambda / col_norm;
  return slab;
}

Instance to_dual_bap(const LassoProblem& p) {
  validate_lasso(p);
  Instance inst;
  inst.dim = p.rows();
  inst.d = p.b;
  inst.sets.reserve(p.cols());
  for (int i = 0; i < p.cols(); ++i) {
    inst.sets.push_back(slab_for_column(p, i).as_polyhedron());
  }
  return inst;
}

Eigen::VectorXd recover_x(const LassoProblem& p, const DualState& y) {
  const Instance inst = to_dual_bap(p);
  if (static_cast<int>(y.sets.size()) != inst.m()) {
    throw DimensionMismatch("recover_x: dual state has " + std::to_string(y.sets.size()) +
                            " sets, lasso has " + std::to_string(inst.m()) + " columns");
  }
  Eigen::VectorXd x(p.cols());
  for (int i = 0; i < p.cols(); ++i) {
    const Eigen::VectorXd y_i = y.dual_vector(inst, i);
    const Eigen::VectorXd axis = inst.sets[i].halfspaces[0].normal;
    const double along = y_i.dot(axis);
    const double transverse = (y_i - along * axis).norm();
    if (transverse > kRayTol * (1.0 + y_i.norm())) {
      throw ConsistencyError("recover_x: y_" + std::to_string(i + 1) +
                             " is not parallel to its slab axis (transverse norm " +
                             std::to_string(transverse) + ")");
    }
    x[i] = along / p.A.col(i).norm();
  }
  return x;
}

double lasso_objective(const LassoProblem& p, const Eigen::VectorXd& x) {
  if (x.size() != p.A.cols()) throw DimensionMismatch("lasso_objective: x length mismatch");
  return 0.5 * (p.A * x - p.b).squaredNorm() + p.lambda * x.lpNorm<1>();
}

namespace {

std::vector<std::vector<double>> read_csv_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open");
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // Skip blank lines (common as trailing newline artifacts).
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream fields(line);
    std::string field;
    while (std::getline(fields, field, ',')) {
      std::size_t consumed = 0;
      double value = 0.0;
      try {
        value = std::stod(field, &consumed);
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(line_number) +
                         ": cannot parse '" + field + "' as a number");
      }
      if (field.find_first_not_of(" \t", consumed) != std::string::npos) {
        throw ParseError(path + ":" + std::to_string(line_number) +
                         ": trailing characters in field '" + field + "'");
      }
      row.push_back(value);
    }
    if (row.empty()) {
      throw ParseError(path + ":" + std::to_string(line_number) + ": empty row");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(path + ":" + std::to_string(line_number) + ": expected " +
                       std::to_string(rows.front().size()) + " fields, got " +
                       std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path + ": no data rows");
  return rows;
}

}  // namespace

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  const auto rows = read_csv_rows(path);
  Eigen::MatrixXd a(rows.size(), rows.front().size());
  for (int r = 0; r < a.rows(); ++r) {
    for (int c = 0; c < a.cols(); ++c) a(r, c) = rows[r][c];
  }
  return a;
}

Eigen::VectorXd read_vector_csv(const std::string& path) {
  const Eigen::MatrixXd a = read_matrix_csv(path);
  if (a.cols() == 1) return a.col(0);
  if (a.rows() == 1) return a.row(0).transpose();
  throw ParseError(path + ": expected a single row or column, got " +
                   std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
}

}  // namespace bap
