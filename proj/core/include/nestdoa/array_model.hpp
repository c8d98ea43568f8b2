#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "nestdoa/types.hpp"

namespace nestdoa {

/// Sensor offsets of a two-level nested array, in multiples of the inner spacing d:
/// an inner ULA {0, 1, ..., m1-1} followed by an outer ULA with spacing m1+1
/// whose k-th sensor (k = 1..m2) sits at k(m1+1) - 1.
std::vector<int> nested_positions(int m1, int m2);

/// Linear array geometry. Positions are integer multiples of `spacing`
/// (in wavelengths); the carrier wavelength is normalized to 1.
class ArrayGeometry {
 public:
  /// Two-level nested array with inner/outer sensor counts m1, m2.
  static ArrayGeometry nested(int m1, int m2, double spacing = 0.5);

  /// Arbitrary linear array. Positions must start at 0 and be strictly increasing.
  static ArrayGeometry from_positions(std::vector<int> positions, double spacing = 0.5);

  int size() const noexcept { return static_cast<int>(positions_.size()); }
  int m1() const noexcept { return m1_; }
  int m2() const noexcept { return m2_; }
  double spacing() const noexcept { return spacing_; }
  double wavelength() const noexcept { return 1.0; }
  std::span<const int> positions() const noexcept { return positions_; }

  /// True when the geometry was built by `nested`.
  bool is_nested() const noexcept { return m1_ > 0; }

  /// Sorted set of non-negative pairwise position differences (the coarray lags).
  std::vector<int> difference_coarray() const;

 private:
  ArrayGeometry(std::vector<int> positions, int m1, int m2, double spacing);

  std::vector<int> positions_;
  int m1_ = 0;
  int m2_ = 0;
  double spacing_ = 0.5;
};

/// Ground truth for one simulated data set.
struct Scenario {
  std::vector<double> doas_deg;  ///< source directions, degrees from broadside
  std::vector<double> powers;    ///< source variances (linear)
  double noise_var = 1.0;
  int snapshots = 1;
  std::uint64_t seed = 0;

  int num_sources() const noexcept { return static_cast<int>(doas_deg.size()); }

  /// Throws InvalidConfiguration / DomainError on a violated invariant.
  void validate() const;
};

/// M x T matrix of array outputs, one snapshot y(t) per column.
struct SnapshotMatrix {
  ComplexMatrix data;

  int sensors() const noexcept { return static_cast<int>(data.rows()); }
  int snapshots() const noexcept { return static_cast<int>(data.cols()); }
};

/// a_m(theta) = exp(j 2 pi (x_m d / lambda) sin theta), theta in degrees.
ComplexVector steering_vector(const ArrayGeometry& geometry, double theta_deg);

/// d a(theta) / d theta with theta in degrees (includes the pi/180 factor).
ComplexVector steering_derivative(const ArrayGeometry& geometry, double theta_deg);

/// Virtual-array dictionary: column n is conj(a(phi_n)) kron a(phi_n), so that
/// vec(a a^H) is a column under column-major vectorization.
ComplexMatrix virtual_dictionary(const ArrayGeometry& geometry, std::span<const double> grid_deg);

/// d/dphi [conj(a(phi)) kron a(phi)], degrees.
ComplexVector dictionary_column_derivative(const ArrayGeometry& geometry, double phi_deg);

/// Population covariance A diag(powers) A^H + noise_var I.
ComplexMatrix model_covariance(const ArrayGeometry& geometry, std::span<const double> doas_deg,
                               std::span<const double> powers, double noise_var);

/// y(t) = A(theta) s(t) + n(t) with independent circular complex Gaussian sources
/// and noise. Deterministic in `scenario.seed`.
SnapshotMatrix simulate_snapshots(const ArrayGeometry& geometry, const Scenario& scenario);

/// CSV snapshot file: first line "M,T", then M rows of 2T values "re,im,re,im,...".
/// Values are written with 17 significant digits so the round trip is exact.
void write_snapshots_csv(const SnapshotMatrix& snapshots, const std::filesystem::path& path);
SnapshotMatrix read_snapshots_csv(const std::filesystem::path& path);

}  // namespace nestdoa
