#include "nestdoa/array_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <system_error>

#include "nestdoa/error.hpp"
#include "nestdoa/random.hpp"

namespace nestdoa {

namespace {

void check_angle(double theta_deg) {
  if (!std::isfinite(theta_deg) || theta_deg < -90.0 || theta_deg > 90.0) {
    throw DomainError("angle " + std::to_string(theta_deg) + " deg outside [-90, 90]");
  }
}

// 2 pi x_m d / lambda for every sensor.
RealVector phase_slopes(const ArrayGeometry& geometry) {
  RealVector slopes(geometry.size());
  const auto positions = geometry.positions();
  for (int m = 0; m < geometry.size(); ++m) {
    slopes[m] = 2.0 * kPi * positions[m] * geometry.spacing() / geometry.wavelength();
  }
  return slopes;
}

ComplexVector kron(const ComplexVector& u, const ComplexVector& v) {
  const Eigen::Index m = v.size();
  ComplexVector out(u.size() * m);
  for (Eigen::Index i = 0; i < u.size(); ++i) out.segment(i * m, m) = u[i] * v;
  return out;
}

void append_double(std::string& out, double value) {
  char buffer[32];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value,
                                    std::chars_format::general, 17);
  out.append(buffer, result.ptr);
}

double parse_double(std::string_view text, const std::filesystem::path& path) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
  double value = 0.0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc{} || result.ptr != text.data() + text.size()) {
    throw InvalidInput(path.string() + ": malformed number '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

}  // namespace

std::vector<int> nested_positions(int m1, int m2) {
  if (m1 < 1 || m2 < 1) {
    throw InvalidConfiguration("nested array needs m1 >= 1 and m2 >= 1 (got " +
                               std::to_string(m1) + ", " + std::to_string(m2) + ")");
  }
  std::vector<int> positions;
  positions.reserve(static_cast<std::size_t>(m1 + m2));
  for (int i = 0; i < m1; ++i) positions.push_back(i);
  for (int k = 1; k <= m2; ++k) positions.push_back(k * (m1 + 1) - 1);
  return positions;
}

ArrayGeometry::ArrayGeometry(std::vector<int> positions, int m1, int m2, double spacing)
    : positions_(std::move(positions)), m1_(m1), m2_(m2), spacing_(spacing) {}

ArrayGeometry ArrayGeometry::nested(int m1, int m2, double spacing) {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) {
    throw InvalidConfiguration("element spacing must be positive");
  }
  return ArrayGeometry(nested_positions(m1, m2), m1, m2, spacing);
}

ArrayGeometry ArrayGeometry::from_positions(std::vector<int> positions, double spacing) {
  if (positions.empty() || positions.front() != 0) {
    throw InvalidConfiguration("sensor positions must be nonempty and start at 0");
  }
  if (std::adjacent_find(positions.begin(), positions.end(), std::greater_equal<>()) !=
      positions.end()) {
    throw InvalidConfiguration("sensor positions must be strictly increasing");
  }
  if (!(spacing > 0.0) || !std::isfinite(spacing)) {
    throw InvalidConfiguration("element spacing must be positive");
  }
  return ArrayGeometry(std::move(positions), 0, 0, spacing);
}

std::vector<int> ArrayGeometry::difference_coarray() const {
  std::set<int> lags;
  for (int a : positions_) {
    for (int b : positions_) {
      if (a >= b) lags.insert(a - b);
    }
  }
  return {lags.begin(), lags.end()};
}

void Scenario::validate() const {
  if (doas_deg.size() != powers.size()) {
    throw InvalidConfiguration("scenario has " + std::to_string(doas_deg.size()) + " DOAs but " +
                               std::to_string(powers.size()) + " powers");
  }
  for (double theta : doas_deg) check_angle(theta);
  for (double p : powers) {
    if (!(p > 0.0) || !std::isfinite(p)) throw InvalidConfiguration("source powers must be > 0");
  }
  if (!(noise_var > 0.0) || !std::isfinite(noise_var)) {
    throw InvalidConfiguration("noise variance must be > 0");
  }
  if (snapshots < 1) throw InvalidConfiguration("snapshot count must be >= 1");
  auto sorted = doas_deg;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw InvalidConfiguration("source DOAs must be pairwise distinct");
  }
}

ComplexVector steering_vector(const ArrayGeometry& geometry, double theta_deg) {
  check_angle(theta_deg);
  const double s = std::sin(theta_deg * kDegToRad);
  const RealVector slopes = phase_slopes(geometry);
  ComplexVector a(geometry.size());
  for (int m = 0; m < geometry.size(); ++m) a[m] = std::polar(1.0, slopes[m] * s);
  return a;
}

ComplexVector steering_derivative(const ArrayGeometry& geometry, double theta_deg) {
  const ComplexVector a = steering_vector(geometry, theta_deg);
  const double c = std::cos(theta_deg * kDegToRad) * kDegToRad;
  const RealVector slopes = phase_slopes(geometry);
  ComplexVector da(geometry.size());
  for (int m = 0; m < geometry.size(); ++m) da[m] = Complex(0.0, slopes[m] * c) * a[m];
  return da;
}

ComplexMatrix virtual_dictionary(const ArrayGeometry& geometry, std::span<const double> grid_deg) {
  if (grid_deg.empty()) throw InvalidConfiguration("dictionary grid is empty");
  const int m = geometry.size();
  ComplexMatrix dictionary(m * m, static_cast<Eigen::Index>(grid_deg.size()));
  for (std::size_t n = 0; n < grid_deg.size(); ++n) {
    const ComplexVector a = steering_vector(geometry, grid_deg[n]);
    dictionary.col(static_cast<Eigen::Index>(n)) = kron(a.conjugate(), a);
  }
  return dictionary;
}

ComplexVector dictionary_column_derivative(const ArrayGeometry& geometry, double phi_deg) {
  const ComplexVector a = steering_vector(geometry, phi_deg);
  const ComplexVector da = steering_derivative(geometry, phi_deg);
  return kron(da.conjugate(), a) + kron(a.conjugate(), da);
}

ComplexMatrix model_covariance(const ArrayGeometry& geometry, std::span<const double> doas_deg,
                               std::span<const double> powers, double noise_var) {
  if (doas_deg.size() != powers.size()) throw InvalidInput("DOA/power length mismatch");
  const int m = geometry.size();
  ComplexMatrix r = noise_var * ComplexMatrix::Identity(m, m);
  for (std::size_t k = 0; k < doas_deg.size(); ++k) {
    const ComplexVector a = steering_vector(geometry, doas_deg[k]);
    r.noalias() += powers[k] * a * a.adjoint();
  }
  return r;
}

SnapshotMatrix simulate_snapshots(const ArrayGeometry& geometry, const Scenario& scenario) {
  scenario.validate();
  const int m = geometry.size();
  const int k_sources = scenario.num_sources();
  const int t_count = scenario.snapshots;

  ComplexMatrix steering(m, k_sources);
  for (int k = 0; k < k_sources; ++k) steering.col(k) = steering_vector(geometry, scenario.doas_deg[k]);

  // Sources first, then noise, both in column-major (snapshot-major) order.
  Rng rng(scenario.seed);
  ComplexMatrix sources(k_sources, t_count);
  for (int t = 0; t < t_count; ++t) {
    for (int k = 0; k < k_sources; ++k) sources(k, t) = ComplexGaussian(scenario.powers[k])(rng);
  }
  const ComplexGaussian noise(scenario.noise_var);
  SnapshotMatrix out;
  out.data.resize(m, t_count);
  for (int t = 0; t < t_count; ++t) {
    for (int i = 0; i < m; ++i) out.data(i, t) = noise(rng);
  }
  if (k_sources > 0) out.data.noalias() += steering * sources;
  return out;
}

void write_snapshots_csv(const SnapshotMatrix& snapshots, const std::filesystem::path& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw InvalidInput("cannot open '" + path.string() + "' for writing");
  std::string line = std::to_string(snapshots.sensors()) + "," + std::to_string(snapshots.snapshots()) + "\n";
  file << line;
  for (int i = 0; i < snapshots.sensors(); ++i) {
    line.clear();
    for (int t = 0; t < snapshots.snapshots(); ++t) {
      if (t > 0) line.push_back(',');
      append_double(line, snapshots.data(i, t).real());
      line.push_back(',');
      append_double(line, snapshots.data(i, t).imag());
    }
    line.push_back('\n');
    file << line;
  }
  if (!file) throw InvalidInput("write to '" + path.string() + "' failed");
}

SnapshotMatrix read_snapshots_csv(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) throw InvalidInput("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(file, line)) throw InvalidInput(path.string() + ": missing header");
  const auto header = split_commas(line);
  if (header.size() != 2) throw InvalidInput(path.string() + ": header must be 'M,T'");
  const double m_value = parse_double(header[0], path);
  const double t_value = parse_double(header[1], path);
  if (m_value < 1 || t_value < 1 || m_value != std::floor(m_value) || t_value != std::floor(t_value)) {
    throw InvalidInput(path.string() + ": invalid dimensions in header");
  }
  const auto m = static_cast<Eigen::Index>(m_value);
  const auto t_count = static_cast<Eigen::Index>(t_value);
  SnapshotMatrix out;
  out.data.resize(m, t_count);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!std::getline(file, line)) throw InvalidInput(path.string() + ": expected " + std::to_string(m) + " rows");
    const auto fields = split_commas(line);
    if (static_cast<Eigen::Index>(fields.size()) != 2 * t_count) {
      throw InvalidInput(path.string() + ": row " + std::to_string(i + 1) + " has " +
                         std::to_string(fields.size()) + " values, expected " + std::to_string(2 * t_count));
    }
    for (Eigen::Index t = 0; t < t_count; ++t) {
      out.data(i, t) = Complex(parse_double(fields[2 * t], path), parse_double(fields[2 * t + 1], path));
    }
  }
  return out;
}

}  // namespace nestdoa
