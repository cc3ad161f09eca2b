#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <span>

namespace gradflow {

Eigen::MatrixXd sample_interior(int d, int n, std::uint64_t seed);  // d x n, coords in (0,pi)
Eigen::MatrixXd sample_boundary(int d, int n, std::uint64_t seed);  // one coord in {0,pi}

// Fixed Monte Carlo point cloud for Omega = (0,pi)^d and its boundary,
// with the measure factors needed for quadrature.
struct SampleSet {
  int d = 0;
  std::uint64_t seed = 0;
  Eigen::MatrixXd interior;  // d x N_i
  Eigen::MatrixXd boundary;  // d x N_b
  double vol_omega = 0.0;      // pi^d
  double area_boundary = 0.0;  // 2 d pi^(d-1)

  static SampleSet create(int d, int n_interior, int n_boundary, std::uint64_t seed);

  int n_interior() const { return static_cast<int>(interior.cols()); }
  int n_boundary() const { return static_cast<int>(boundary.cols()); }
  int n_total() const { return n_interior() + n_boundary(); }

  // vol(Omega) * mean(values): unbiased estimate of the Omega-integral.
  double mc_mean_interior(std::span<const double> values) const;
  double mc_mean_boundary(std::span<const double> values) const;

  void dump_csv(std::ostream& os) const;  // kind, x1..xd
};

inline double hypercube_volume(int d) {
  double v = 1.0;
  for (int i = 0; i < d; ++i) v *= std::numbers::pi;
  return v;
}

inline double hypercube_boundary_area(int d) {
  return d >= 1 ? 2.0 * d * hypercube_volume(d - 1) : 0.0;
}

}  // namespace gradflow
