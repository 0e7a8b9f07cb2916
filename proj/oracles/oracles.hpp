#pragma once

// Reference computations that share no code path with the routines they check.

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <vector>

namespace wemp::oracles {

/// Adaptive Gauss-Kronrod (7/15) quadrature on [a, b].
double integrate(const std::function<double(double)>& f, double a, double b, double tolerance = 1e-12);

/// Mittag-Leffler E_alpha(z) by its power series, `terms` terms.
double mittag_leffler(double alpha, double z, int terms = 200);

/// Dense five-point Laplacian (scaled by 1, i.e. 4 on the diagonal) on the
/// (n-1)^2 interior nodes of an n x n grid, row-major node order.
Eigen::MatrixXd five_point_laplacian(int n);

/// Integral over the unit square of the squared hat function of grid node
/// (i, j) on the n x n right-triangle mesh, by edge-midpoint quadrature.
double hat_l2_squared(int n, int i, int j);

/// Discrete harmonic extension on an r x r box with the 5-point stencil.
/// `boundary(i, j)` supplies the values on the box edge; result is row-major.
Eigen::VectorXd five_point_harmonic(int r, const std::function<double(int, int)>& boundary);

/// History sum of the compressed scheme computed without recursion:
/// sum_j w_j int_0^{t_n} e^{-l_j (t_n + tau - s)} v(s) ds for the piecewise
/// linear interpolant of `values` (v at t_0..t_n) with step tau.
double direct_history(const std::vector<double>& weights, const std::vector<double>& rates, double tau,
                      const std::vector<double>& values);

/// Scalar compressed scheme for D^alpha u = -lambda u + f(t), using
/// `direct_history` at every step (quadratic cost).
std::vector<double> scalar_soe_solution(double alpha, const std::vector<double>& weights,
                                        const std::vector<double>& rates, double tau, int steps, double u0,
                                        double lambda, const std::function<double(double)>& source);

/// Runs every oracle check against the library and reports one line each.
bool run_all(std::ostream& report);

}  // namespace wemp::oracles
