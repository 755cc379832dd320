#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "brim/types.hpp"

namespace brim {

// Frequency-shift sampling of every spectrum in a cube, in GHz.
class FreqAxis {
 public:
  FreqAxis() = default;
  // Throws ParameterError unless values are strictly increasing with >= 8 points.
  explicit FreqAxis(std::vector<double> values);

  static FreqAxis linspace(double lo, double hi, std::size_t n);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double front() const { return values_.front(); }
  double back() const { return values_.back(); }
  double step() const { return (back() - front()) / static_cast<double>(size() - 1); }
  const std::vector<double>& values() const { return values_; }
  std::span<const double> span() const { return values_; }

  bool operator==(const FreqAxis&) const = default;

 private:
  std::vector<double> values_;
};

using Metadata = std::map<std::string, std::string>;

// An nx-by-ny grid of spectra. Pixel (x, y) is data row y*nx + x.
class HyperCube {
 public:
  HyperCube() = default;
  HyperCube(std::size_t nx, std::size_t ny, FreqAxis axis, Matrix data, Metadata meta = {});

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t pixels() const { return nx_ * ny_; }
  std::size_t channels() const { return axis_.size(); }
  const FreqAxis& axis() const { return axis_; }
  const Matrix& data() const { return data_; }
  const Metadata& meta() const { return meta_; }

  std::size_t index(std::size_t x, std::size_t y) const { return y * nx_ + x; }
  std::span<const double> row(std::size_t i) const {
    return {data_.row(static_cast<Eigen::Index>(i)).data(), channels()};
  }

  HyperCube with_data(Matrix data) const { return {nx_, ny_, axis_, std::move(data), meta_}; }
  HyperCube with_meta(Metadata meta) const { return {nx_, ny_, axis_, data_, std::move(meta)}; }

  bool operator==(const HyperCube& other) const;

 private:
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  FreqAxis axis_;
  Matrix data_;
  Metadata meta_;
};

// Per-pixel integer labels; -1 means outlier / unassigned.
struct LabelMap {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<int> labels;

  LabelMap() = default;
  LabelMap(std::size_t nx_, std::size_t ny_, std::vector<int> labels_);

  int at(std::size_t x, std::size_t y) const { return labels[y * nx + x]; }
  bool operator==(const LabelMap&) const = default;
};

// Per-pixel scalar image (shift, width, R^2, abundance) in the same pixel order.
struct FloatGrid {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<double> values;

  FloatGrid() = default;
  FloatGrid(std::size_t nx_, std::size_t ny_, std::vector<double> values_);

  double at(std::size_t x, std::size_t y) const { return values[y * nx + x]; }
  bool operator==(const FloatGrid&) const = default;
};

HyperCube load_cube(const std::filesystem::path& path);
void save_cube(const HyperCube& cube, const std::filesystem::path& path);

// Copy of the spectrum at (x, y). Throws std::out_of_range.
std::vector<double> get_spectrum(const HyperCube& cube, std::size_t x, std::size_t y);

LabelMap load_labels(const std::filesystem::path& path);
void save_labels(const LabelMap& labels, const std::filesystem::path& path);

FloatGrid load_grid(const std::filesystem::path& path);
void save_grid(const FloatGrid& grid, const std::filesystem::path& path);

// Shortest decimal form that survives the text round trip used by all formats.
std::string format_value(double v);

}  // namespace brim
