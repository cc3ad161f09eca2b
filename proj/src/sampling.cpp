#include "gradflow/sampling.hpp"

#include <ostream>
#include <stdexcept>

#include "gradflow/rng.hpp"

namespace gradflow {

namespace {
constexpr double kPi = std::numbers::pi;
}

Eigen::MatrixXd sample_interior(int d, int n, std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("sample_interior: d must be >= 1");
  SplitMix64 rng(SplitMix64::derive(seed, 0x696e74ull));
  Eigen::MatrixXd pts(d, n);
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < d; ++r) pts(r, c) = kPi * rng.uniform();
  return pts;
}

Eigen::MatrixXd sample_boundary(int d, int n, std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("sample_boundary: d must be >= 1");
  SplitMix64 rng(SplitMix64::derive(seed, 0x626e64ull));
  Eigen::MatrixXd pts(d, n);
  for (int c = 0; c < n; ++c) {
    // the 2d faces have equal area, so choose one uniformly
    int face = static_cast<int>(rng.uniform() * 2.0 * d);
    if (face >= 2 * d) face = 2 * d - 1;
    const int axis = face / 2;
    const double val = (face % 2 == 0) ? 0.0 : kPi;
    for (int r = 0; r < d; ++r)
      pts(r, c) = (r == axis) ? val : kPi * rng.uniform();
  }
  return pts;
}

SampleSet SampleSet::create(int d, int n_interior, int n_boundary, std::uint64_t seed) {
  SampleSet s;
  s.d = d;
  s.seed = seed;
  s.interior = sample_interior(d, n_interior, seed);
  s.boundary = sample_boundary(d, n_boundary, seed);
  s.vol_omega = hypercube_volume(d);
  s.area_boundary = hypercube_boundary_area(d);
  return s;
}

double SampleSet::mc_mean_interior(std::span<const double> values) const {
  if (values.empty()) throw std::invalid_argument("mc_mean_interior: empty value list");
  if (static_cast<int>(values.size()) != n_interior())
    throw std::invalid_argument("mc_mean_interior: value count != N_i");
  double sum = 0.0;
  for (double v : values) sum += v;
  return vol_omega * sum / static_cast<double>(values.size());
}

double SampleSet::mc_mean_boundary(std::span<const double> values) const {
  if (values.empty()) throw std::invalid_argument("mc_mean_boundary: empty value list");
  if (static_cast<int>(values.size()) != n_boundary())
    throw std::invalid_argument("mc_mean_boundary: value count != N_b");
  double sum = 0.0;
  for (double v : values) sum += v;
  return area_boundary * sum / static_cast<double>(values.size());
}

void SampleSet::dump_csv(std::ostream& os) const {
  os << "kind";
  for (int r = 0; r < d; ++r) os << ",x" << (r + 1);
  os << "\n";
  auto rows = [&](const Eigen::MatrixXd& pts, const char* kind) {
    for (int c = 0; c < pts.cols(); ++c) {
      os << kind;
      for (int r = 0; r < d; ++r) os << "," << pts(r, c);
      os << "\n";
    }
  };
  rows(interior, "interior");
  rows(boundary, "boundary");
}

}  // namespace gradflow
