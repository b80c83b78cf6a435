#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "dvhsmooth/common.hpp"
#include "dvhsmooth/objective.hpp"

namespace dvhsmooth {

enum class Termination { Converged, MaxIter, Stalled, SpuriousFixedPoint, SeamCrossed };

std::string_view to_string(Termination t) noexcept;

/// Iterate history. values, derivative_norms and iterates share one length;
/// step_sizes is one shorter with step_sizes[k] = |iterates[k+1] - iterates[k]|.
struct Trace {
    std::vector<Eigen::VectorXd> iterates;
    std::vector<double> values;
    std::vector<double> derivative_norms;
    std::vector<double> step_sizes;
    Termination termination = Termination::MaxIter;
    std::string message;

    // Indices k where the move from iterate k to k+1 crossed a seam (a
    // flagged point in 1-D, a sign change of a penalty argument otherwise).
    std::vector<std::size_t> seam_crossings;
    // BFGS only.
    std::vector<int> line_search_evals;
    int curvature_skips = 0;
    // Filled when a Lambda monitor is supplied.
    std::vector<double> lambda_distances;
    bool slowdown_flag = false;

    std::size_t size() const noexcept { return iterates.size(); }
};

struct NewtonOptions {
    double tol = 1e-13;  // on |F'|
    int max_iter = 100;
    Side convention = Side::Left;
    bool stop_on_seam = false;
    // With positive curvature the step is phi(s), halved while it would
    // raise F or leave the domain. With F'' <= 0 (where phi heads uphill)
    // the move is (1 + |s|) downhill, halved the same way. Off: pure phi.
    bool safeguard = true;
};

/// phi(s) = s - F'(s) / F''(s). At a flagged point F'' is taken from the
/// convention side; an infinite F'' gives a zero step. Throws
/// IllConditionedStep when |F''| < 1e-14 (1 + |F'|).
double newton1d_step(const Scalar1DObjective& obj, double sigma, Side convention = Side::Left);

Trace newton1d_run(const Scalar1DObjective& obj, double sigma0, const NewtonOptions& opts = {});

struct QuasiNewtonOptions {
    double grad_tol = 1e-6;
    int max_iter = 200;
    double fd_step = 1e-3;  // relative, used by callers that difference the objective
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    double curvature_skip_tol = 1e-10;
    int max_line_search = 30;
    double lambda_band = 0.05;  // slowdown flag radius around Lambda
    bool stop_on_seam = false;

    void validate() const;
};

/// Objective over R^m for bfgs_run. `value` may return +inf outside its
/// domain; the line search then backtracks. `seams` (optional) returns the
/// penalty arguments whose sign changes are reported as seam crossings.
/// `lambda_distance` (optional) is evaluated at every accepted iterate.
struct Problem {
    std::function<double(const Eigen::VectorXd&)> value;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
    std::function<std::vector<double>(const Eigen::VectorXd&)> seams;
    std::function<double(const Eigen::VectorXd&)> lambda_distance;
};

/// BFGS on the inverse Hessian, starting from I / |g0|, with a strong Wolfe
/// line search. Updates with y's <= curvature_skip_tol |y||s| are skipped.
/// A non-finite value or gradient at an accepted point throws NumericalDomain.
Trace bfgs_run(const Problem& problem, const Eigen::VectorXd& sigma0, const QuasiNewtonOptions& opts);

/// BFGS problem over the weights of an ObjectiveSpec (copied). The value is
/// +inf unless every weight is positive. EUD-only specs get the analytic
/// gradient; otherwise central differences with step fd_step * max(1, |w_j|),
/// switching to a forward difference when the backward point would not be
/// positive. Seams are the penalty arguments.
Problem objective_problem(const ObjectiveSpec& spec, double fd_step);

enum class ConvergenceRate { Quadratic, Superlinear, Linear, Sublinear, Stalled };

std::string_view to_string(ConvergenceRate r) noexcept;

/// Classifies the tail of the error sequence e_k = |x_k - limit| (limit
/// defaults to the last iterate). Errors at or below 1e-14 (1 + |limit|) are
/// treated as converged and dropped. With order estimates
/// p_k = log(e_{k+1}/e_k) / log(e_k/e_{k-1}) and ratios r_k = e_{k+1}/e_k,
/// the median of the last three of each decides:
///   stalled      termination stalled, or r >= 1 (no contraction)
///   quadratic    p >= 1.8
///   superlinear  p >= 1.2, or r <= 0.05
///   sublinear    r >= 0.95
///   linear       otherwise
/// Throws InsufficientData below 5 iterates or 3 usable errors.
ConvergenceRate convergence_classify(const Trace& trace,
                                     const std::optional<Eigen::VectorXd>& limit = std::nullopt);

/// Same classification from a raw error sequence.
ConvergenceRate classify_errors(std::span<const double> errors, double floor = 0.0);

}  // namespace dvhsmooth
