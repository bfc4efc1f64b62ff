#pragma once

// Sequential quadratic programming for
//
//   minimize f(P)  subject to  g_i(P) >= 0
//
// with first derivatives only. The QP subproblem is reduced to a
// least-distance problem and solved by non-negative least squares.

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace dcad {

/// Objective value; writes the gradient into grad (already sized).
using ObjectiveFn = std::function<double(std::span<const double> P, Eigen::VectorXd& grad)>;
/// All constraint values g (k) and their Jacobian (k x m) in one call.
using ConstraintFn = std::function<void(std::span<const double> P, Eigen::VectorXd& g, Eigen::MatrixXd& J)>;
/// One scalar constraint: value, gradient written into grad.
using ScalarConstraintFn = std::function<double(std::span<const double> P, Eigen::VectorXd& grad)>;

ConstraintFn constraints_from_list(std::vector<ScalarConstraintFn> list);

struct IterationRecord {
    int iteration = 0;
    double objective = 0.0;
    double violation = 0.0;
    double step_norm = 0.0;
    double step_length = 0.0;
    double merit_before = 0.0;
    double merit_after = 0.0;
    double penalty = 0.0;
};

struct NLPProblem {
    ObjectiveFn objective;
    /// May be empty (unconstrained).
    ConstraintFn constraints;
    std::vector<double> P0;
    double tol = 1e-6;
    double feas_tol = 1e-8;
    int max_iter = 200;
    /// Called after each accepted step.
    std::function<void(const IterationRecord&)> trace;
};

enum class OptStatus { Converged, MaxIter, Infeasible, NumericFailure, Stalled };

const char* status_name(OptStatus s);

struct OptResult {
    std::vector<double> P;
    OptStatus status = OptStatus::MaxIter;
    int iterations = 0;
    double objective = 0.0;
    double max_violation = 0.0;
    double kkt_residual = 0.0;
    double wall_time = 0.0;
    /// Lagrange multipliers of the last QP, one per constraint.
    Eigen::VectorXd multipliers;
    std::string message;
};

OptResult minimize(const NLPProblem& problem);

struct KKTReport {
    /// ||grad f - J^T lambda||_inf
    double stationarity = 0.0;
    /// max(0, -g_i)
    double feasibility = 0.0;
    /// max |lambda_i g_i|
    double complementarity = 0.0;
    /// max(0, -lambda_i)
    double dual_feasibility = 0.0;
};

KKTReport check_kkt(const NLPProblem& problem, std::span<const double> P,
                    std::span<const double> multipliers);

/// min ||E u - f|| subject to u >= 0 (Lawson-Hanson). Returns false if the
/// iteration limit is hit.
bool nnls(const Eigen::MatrixXd& E, const Eigen::VectorXd& f, Eigen::VectorXd& u);

struct QPResult {
    Eigen::VectorXd d;
    Eigen::VectorXd lambda;
    bool ok = false;
    /// True when the linearized constraints were inconsistent and a slack
    /// variable was needed.
    bool elastic = false;
};

/// min 1/2 d^T B d + c^T d  subject to  A d + b >= 0, B positive definite.
QPResult solve_qp(const Eigen::MatrixXd& B, const Eigen::VectorXd& c, const Eigen::MatrixXd& A,
                  const Eigen::VectorXd& b);

} // namespace dcad
