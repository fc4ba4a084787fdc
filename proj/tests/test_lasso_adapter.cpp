#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>

#include "bap/dykstra_core.hpp"
#include "bap/errors.hpp"
#include "bap/lasso_adapter.hpp"
#include "bap/oracle.hpp"
#include "bap/qp_kernel.hpp"

using bap::DualState;
using bap::Instance;
using bap::lasso_objective;
using bap::lasso_reference;
using bap::LassoProblem;
using bap::LassoReference;
using bap::make_cyclic;
using bap::PolyhedralSet;
using bap::project_polyhedron;
using bap::QSelector;
using bap::read_matrix_csv;
using bap::read_vector_csv;
using bap::recover_x;
using bap::ShqpMode;
using bap::ShqpPolicy;
using bap::SlabSet;
using bap::slab_for_column;
using bap::solve;
using bap::SolveResult;
using bap::SolveStatus;
using bap::StoppingRule;
using bap::StopMode;
using bap::support_halfspace;
using bap::to_dual_bap;
using bap::TraceLevel;
using bap::validate_lasso;

namespace {

LassoProblem random_lasso(int rows, int cols, std::mt19937_64& rng, double lambda_scale = 0.3) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  LassoProblem p;
  p.A.resize(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) p.A(i, j) = gauss(rng);
  }
  p.b.resize(rows);
  for (int i = 0; i < rows; ++i) p.b[i] = gauss(rng);
  p.lambda = lambda_scale * (p.A.transpose() * p.b).cwiseAbs().maxCoeff();
  if (p.lambda <= 0.0) p.lambda = 0.1;
  return p;
}

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = std::string("/tmp/") + name;
  std::ofstream out(path);
  out << content;
  out.close();
  return path;
}

}  // namespace

TEST_CASE("validate_lasso rejects malformed problems") {
  LassoProblem p;
  p.A = Eigen::MatrixXd::Identity(2, 2);
  p.b = Eigen::Vector2d(1.0, 2.0);
  p.lambda = 1.0;
  validate_lasso(p);  // well-formed

  LassoProblem zero_col = p;
  zero_col.A.col(1).setZero();
  CHECK_THROWS_WITH_AS(validate_lasso(zero_col), doctest::Contains("column 2"),
                       bap::ContractViolation);

  LassoProblem bad_lambda = p;
  bad_lambda.lambda = 0.0;
  CHECK_THROWS_AS(validate_lasso(bad_lambda), bap::ContractViolation);

  LassoProblem bad_rows = p;
  bad_rows.b = Eigen::Vector3d(1.0, 2.0, 3.0);
  CHECK_THROWS_AS(validate_lasso(bad_rows), bap::ContractViolation);

  LassoProblem empty;
  empty.b = Eigen::VectorXd();
  empty.lambda = 1.0;
  CHECK_THROWS_AS(validate_lasso(empty), bap::ContractViolation);
}

TEST_CASE("slab geometry per column") {
  // Single column (1), b = (2), lambda = 1: slab |z| <= 1 inside R^1, d = 2.
  LassoProblem tiny;
  tiny.A = Eigen::MatrixXd::Constant(1, 1, 1.0);
  tiny.b = Eigen::VectorXd::Constant(1, 2.0);
  tiny.lambda = 1.0;
  const SlabSet slab = slab_for_column(tiny, 0);
  CHECK(slab.axis[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(slab.half_width == doctest::Approx(1.0).epsilon(1e-15));
  const Instance inst = to_dual_bap(tiny);
  CHECK(inst.d[0] == 2.0);
  CHECK(inst.m() == 1);

  // Column (3, 4)^T with lambda = 1: axis (0.6, 0.8), half width 1/5.
  LassoProblem scaled;
  scaled.A = Eigen::MatrixXd(2, 1);
  scaled.A << 3.0, 4.0;
  scaled.b = Eigen::Vector2d(0.0, 0.0);
  scaled.lambda = 1.0;
  const SlabSet col = slab_for_column(scaled, 0);
  CHECK(col.axis.isApprox(Eigen::Vector2d(0.6, 0.8), 1e-15));
  CHECK(col.half_width == doctest::Approx(0.2).epsilon(1e-15));

  // The 2-halfspace form is {<a,z> <= w, <-a,z> <= w} in that order.
  const PolyhedralSet poly = col.as_polyhedron();
  REQUIRE(poly.size() == 2);
  CHECK(poly.halfspaces[0].normal.isApprox(col.axis, 1e-15));
  CHECK(poly.halfspaces[1].normal.isApprox(Eigen::VectorXd(-col.axis), 1e-15));
  CHECK(poly.halfspaces[0].offset == col.half_width);
  CHECK(poly.halfspaces[1].offset == col.half_width);
}

TEST_CASE("slab projection agrees with the closed form") {
  // P_S(z) = z - sign(t) * max(0, |t| - w) * axis with t = <axis, z>.
  std::mt19937_64 rng(401);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd axis(3);
    for (int j = 0; j < 3; ++j) axis[j] = gauss(rng);
    axis.normalize();
    SlabSet slab;
    slab.axis = axis;
    slab.half_width = 0.25;
    Eigen::VectorXd z(3);
    for (int j = 0; j < 3; ++j) z[j] = 2.0 * gauss(rng);

    const double t = axis.dot(z);
    const Eigen::VectorXd closed =
        z - (t >= 0.0 ? 1.0 : -1.0) * std::max(0.0, std::abs(t) - slab.half_width) * axis;
    const Eigen::VectorXd via_qp = project_polyhedron(z, slab.as_polyhedron()).point;
    CHECK((via_qp - closed).norm() <= 1e-12);
  }
}

TEST_CASE("recover_x maps slab duals to coefficients") {
  // ||A_i|| = 5, lambda = 1: the ray y_i = x_i * axis with x_i = 2 has
  // delta*(y_i, S_i) = |x_i| * lambda / ||A_i|| = 0.4.
  LassoProblem p;
  p.A = Eigen::MatrixXd(2, 1);
  p.A << 3.0, 4.0;
  p.b = Eigen::Vector2d(1.0, 1.0);
  p.lambda = 1.0;
  const SlabSet slab = slab_for_column(p, 0);
  const Eigen::VectorXd y_i = 2.0 * slab.axis;
  const double support = support_halfspace(y_i, slab.as_polyhedron().halfspaces[0]);
  CHECK(support == doctest::Approx(0.4).epsilon(1e-12));

  const Instance inst = to_dual_bap(p);
  DualState y = DualState::zeros(inst);
  y.sets[0].base_lambda[0] = 10.0;  // y_0 = 10 * axis
  const Eigen::VectorXd x = recover_x(p, y);
  CHECK(x[0] == doctest::Approx(2.0).epsilon(1e-12));

  // Zero duals recover the zero coefficient vector.
  CHECK(recover_x(p, DualState::zeros(inst)).isZero(0.0));

  // Negative-axis multipliers encode negative coefficients.
  DualState neg = DualState::zeros(inst);
  neg.sets[0].base_lambda[1] = 10.0;  // y_0 = -10 * axis
  CHECK(recover_x(p, neg)[0] == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("recover_x rejects transverse dual components") {
  LassoProblem p;
  p.A = Eigen::MatrixXd(2, 1);
  p.A << 1.0, 0.0;
  p.b = Eigen::Vector2d(1.0, 1.0);
  p.lambda = 0.5;
  const Instance inst = to_dual_bap(p);
  DualState y = DualState::zeros(inst);
  // Inject a generated halfspace off the slab axis; its dual contribution
  // cannot come from projecting onto the slab.
  y.sets[0].generated.emplace_back(Eigen::Vector2d(0.0, 1.0), 0.3);
  y.sets[0].gen_lambda = Eigen::VectorXd::Constant(1, 1.0);
  CHECK_THROWS_AS(recover_x(p, y), bap::ConsistencyError);
}

TEST_CASE("lasso_objective closed form") {
  LassoProblem p;
  p.A = Eigen::MatrixXd::Identity(2, 2);
  p.b = Eigen::Vector2d(1.0, -2.0);
  p.lambda = 0.5;
  const Eigen::Vector2d x(0.5, -1.5);
  // residual = (0.5, -0.5), 1/2 * 0.5 + 0.5 * 2.0.
  CHECK(lasso_objective(p, x) == doctest::Approx(0.25 + 1.0).epsilon(1e-15));
}

TEST_CASE("solver matches the coordinate-descent reference") {
  std::mt19937_64 rng(402);
  for (int trial = 0; trial < 8; ++trial) {
    const int rows = 3 + static_cast<int>(rng() % 4);
    const int cols = 2 + static_cast<int>(rng() % 4);
    const LassoProblem p = random_lasso(rows, cols, rng);
    const LassoReference ref = lasso_reference(p, 1e-12);

    const Instance inst = to_dual_bap(p);
    const ShqpPolicy policy{ShqpMode::accumulate, QSelector::visited};
    const SolveResult result = solve(inst, make_cyclic(inst.m()), policy,
                                     StoppingRule{1e-12, 50'000, StopMode::primal_change},
                                     TraceLevel::off);
    CHECK(result.status == SolveStatus::converged);
    const Eigen::VectorXd x = recover_x(p, result.y);
    const double obj = lasso_objective(p, x);
    CHECK(obj <= ref.objective + 1e-8 * (1.0 + std::abs(ref.objective)));
    CHECK(obj >= ref.objective - 1e-8 * (1.0 + std::abs(ref.objective)));
  }
}

TEST_CASE("recover_x stays consistent mid-run under SHQP") {
  // Slab projections only ever generate +/- axis halfspaces, so recovery is
  // legal after every cycle, not just at the end.
  std::mt19937_64 rng(403);
  const LassoProblem p = random_lasso(4, 3, rng);
  const Instance inst = to_dual_bap(p);
  const ShqpPolicy policy{ShqpMode::accumulate, QSelector::visited};

  DualState y = DualState::zeros(inst);
  for (int cycle = 1; cycle <= 10; ++cycle) {
    auto [y_next, trace] = bap::run_cycle(inst, y, make_cyclic(inst.m()), policy, cycle);
    y = std::move(y_next);
    const Eigen::VectorXd x = recover_x(p, y);  // must not throw
    CHECK(x.allFinite());
  }
}

TEST_CASE("orthogonal columns make block SHQP a block-coordinate lasso step") {
  // With orthonormal columns the lasso separates per coordinate, and one
  // SHQP pass over all slabs lands on the exact solution.
  LassoProblem p;
  p.A = Eigen::MatrixXd::Identity(3, 3) * 2.0;  // orthogonal columns, norm 2
  p.b = Eigen::Vector3d(1.0, -0.5, 0.1);
  p.lambda = 0.3;

  // Closed form per coordinate: x_i = soft(A_i^T b, lambda) / ||A_i||^2.
  Eigen::Vector3d expected;
  for (int i = 0; i < 3; ++i) {
    const double corr = 2.0 * p.b[i];
    const double soft = std::copysign(std::max(0.0, std::abs(corr) - p.lambda), corr);
    expected[i] = soft / 4.0;
  }

  const Instance inst = to_dual_bap(p);
  const ShqpPolicy policy{ShqpMode::accumulate, QSelector::visited};
  const SolveResult result = solve(inst, make_cyclic(inst.m()), policy,
                                   StoppingRule{1e-12, 50, StopMode::primal_change},
                                   TraceLevel::off);
  const Eigen::VectorXd x = recover_x(p, result.y);
  CHECK((x - expected).norm() <= 1e-9);

  const LassoReference ref = lasso_reference(p, 1e-12);
  CHECK((ref.x - expected).norm() <= 1e-9);
}

TEST_CASE("csv matrix and vector readers") {
  const std::string mpath = write_temp("bap_test_matrix.csv", "1,2.5,3\n4,5,-6e-1\n");
  const Eigen::MatrixXd m = read_matrix_csv(mpath);
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 3);
  CHECK(m(0, 1) == 2.5);
  CHECK(m(1, 2) == -0.6);

  // Blank lines and trailing carriage returns are tolerated.
  const std::string mpath2 = write_temp("bap_test_matrix2.csv", "1,2\r\n\n3,4\r\n");
  const Eigen::MatrixXd m2 = read_matrix_csv(mpath2);
  REQUIRE(m2.rows() == 2);
  CHECK(m2(1, 0) == 3.0);

  // Vectors: single column or single row.
  const std::string vcol = write_temp("bap_test_vcol.csv", "1\n2\n3\n");
  const std::string vrow = write_temp("bap_test_vrow.csv", "1,2,3\n");
  CHECK(read_vector_csv(vcol).isApprox(Eigen::Vector3d(1, 2, 3), 0.0));
  CHECK(read_vector_csv(vrow).isApprox(Eigen::Vector3d(1, 2, 3), 0.0));

  const std::string bad_number = write_temp("bap_test_badnum.csv", "1,2\n3,oops\n");
  CHECK_THROWS_WITH_AS(read_matrix_csv(bad_number), doctest::Contains(":2:"), bap::ParseError);

  const std::string ragged = write_temp("bap_test_ragged.csv", "1,2\n3\n");
  CHECK_THROWS_AS(read_matrix_csv(ragged), bap::ParseError);

  const std::string square = write_temp("bap_test_square.csv", "1,2\n3,4\n");
  CHECK_THROWS_AS(read_vector_csv(square), bap::ParseError);

  CHECK_THROWS_AS(read_matrix_csv("/tmp/bap_test_missing_file.csv"), bap::ParseError);

  std::remove(mpath.c_str());
  std::remove(mpath2.c_str());
  std::remove(vcol.c_str());
  std::remove(vrow.c_str());
  std::remove(bad_number.c_str());
  std::remove(ragged.c_str());
  std::remove(square.c_str());
}
