#include "brim/hsdata.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "brim/error.hpp"

namespace brim {
namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_double(std::string_view tok, const std::string& path, long line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError(path, line, "invalid number '" + std::string(tok) + "'");
  if (!std::isfinite(v)) throw ParseError(path, line, "non-finite value");
  return v;
}

long parse_long(std::string_view tok, const std::string& path, long line) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError(path, line, "invalid integer '" + std::string(tok) + "'");
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return in;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// Reads the "<magic> <nx> <ny>" header shared by LBL1 and MAP1.
std::pair<std::size_t, std::size_t> grid_header(std::istream& in, const std::string& magic,
                                                const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path, 1, "empty file");
  auto toks = split_ws(line);
  if (toks.size() != 3 || toks[0] != magic) throw ParseError(path, 1, "expected '" + magic + " <nx> <ny>'");
  const long nx = parse_long(toks[1], path, 1);
  const long ny = parse_long(toks[2], path, 1);
  if (nx <= 0 || ny <= 0) throw ParseError(path, 1, "dimensions must be positive");
  return {static_cast<std::size_t>(nx), static_cast<std::size_t>(ny)};
}

}  // namespace

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

FreqAxis::FreqAxis(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() < 8) throw ParameterError("frequency axis needs at least 8 points");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) throw ParameterError("frequency axis contains a non-finite value");
    if (i > 0 && !(values_[i] > values_[i - 1]))
      throw ParameterError("frequency axis must be strictly increasing");
  }
}

FreqAxis FreqAxis::linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = n > 1 ? lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1) : lo;
  return FreqAxis(std::move(v));
}

HyperCube::HyperCube(std::size_t nx, std::size_t ny, FreqAxis axis, Matrix data, Metadata meta)
    : nx_(nx), ny_(ny), axis_(std::move(axis)), data_(std::move(data)), meta_(std::move(meta)) {
  if (nx_ == 0 || ny_ == 0) throw ParameterError("cube dimensions must be positive");
  if (static_cast<std::size_t>(data_.rows()) != nx_ * ny_)
    throw ParameterError("cube data must have nx*ny rows");
  if (static_cast<std::size_t>(data_.cols()) != axis_.size())
    throw ParameterError("cube data must have one column per axis point");
  if (!data_.allFinite()) throw ParameterError("cube data contains non-finite values");
}

bool HyperCube::operator==(const HyperCube& other) const {
  return nx_ == other.nx_ && ny_ == other.ny_ && axis_ == other.axis_ && meta_ == other.meta_ &&
         data_ == other.data_;
}

LabelMap::LabelMap(std::size_t nx_, std::size_t ny_, std::vector<int> labels_)
    : nx(nx_), ny(ny_), labels(std::move(labels_)) {
  if (labels.size() != nx * ny) throw ParameterError("label count must equal nx*ny");
  for (int l : labels)
    if (l < -1) throw ParameterError("labels must be >= -1");
}

FloatGrid::FloatGrid(std::size_t nx_, std::size_t ny_, std::vector<double> values_)
    : nx(nx_), ny(ny_), values(std::move(values_)) {
  if (values.size() != nx * ny) throw ParameterError("grid value count must equal nx*ny");
}

HyperCube load_cube(const std::filesystem::path& path) {
  const std::string name = path.string();
  auto in = open_in(path);
  std::string line;
  long lineno = 0;

  if (!std::getline(in, line)) throw ParseError(name, 1, "empty file");
  ++lineno;
  auto head = split_ws(line);
  if (head.size() != 4 || head[0] != "HSC1") throw ParseError(name, lineno, "expected 'HSC1 <nx> <ny> <ns>'");
  const long nx = parse_long(head[1], name, lineno);
  const long ny = parse_long(head[2], name, lineno);
  const long ns = parse_long(head[3], name, lineno);
  if (nx <= 0 || ny <= 0 || ns <= 0) throw ParseError(name, lineno, "dimensions must be positive");

  if (!std::getline(in, line)) throw ParseError(name, 2, "missing frequency axis");
  ++lineno;
  auto axis_toks = split_ws(line);
  if (static_cast<long>(axis_toks.size()) != ns)
    throw ParseError(name, lineno, "axis has " + std::to_string(axis_toks.size()) + " values, header says " +
                                       std::to_string(ns));
  std::vector<double> axis(static_cast<std::size_t>(ns));
  for (long k = 0; k < ns; ++k) axis[k] = parse_double(axis_toks[k], name, lineno);
  FreqAxis faxis;
  try {
    faxis = FreqAxis(std::move(axis));
  } catch (const ParameterError& e) {
    throw ParseError(name, lineno, e.what());
  }

  Metadata meta;
  Matrix data(nx * ny, ns);
  long row = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line[0] == '#') {
      std::string_view body(line);
      body.remove_prefix(1);
      while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
      while (!body.empty() && body.back() == '\r') body.remove_suffix(1);
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) throw ParseError(name, lineno, "metadata line must be '# key=value'");
      meta[std::string(body.substr(0, eq))] = std::string(body.substr(eq + 1));
      continue;
    }
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (row >= nx * ny) throw ParseError(name, lineno, "more spectra than nx*ny");
    if (static_cast<long>(toks.size()) != ns)
      throw ParseError(name, lineno, "row has " + std::to_string(toks.size()) + " values, expected " +
                                         std::to_string(ns));
    for (long k = 0; k < ns; ++k) data(row, k) = parse_double(toks[k], name, lineno);
    ++row;
  }
  if (row != nx * ny)
    throw ParseError(name, lineno, "found " + std::to_string(row) + " spectra, expected " + std::to_string(nx * ny));
  return HyperCube(nx, ny, std::move(faxis), std::move(data), std::move(meta));
}

void save_cube(const HyperCube& cube, const std::filesystem::path& path) {
  if (cube.pixels() == 0 || cube.channels() == 0) throw ParameterError("refusing to write an empty cube");
  auto out = open_out(path);
  out << "HSC1 " << cube.nx() << ' ' << cube.ny() << ' ' << cube.channels() << '\n';
  for (std::size_t k = 0; k < cube.channels(); ++k) out << (k ? " " : "") << format_value(cube.axis()[k]);
  out << '\n';
  for (const auto& [key, value] : cube.meta()) out << "# " << key << '=' << value << '\n';
  std::string buf;
  for (std::size_t i = 0; i < cube.pixels(); ++i) {
    buf.clear();
    auto spec = cube.row(i);
    for (std::size_t k = 0; k < spec.size(); ++k) {
      if (k) buf.push_back(' ');
      buf += format_value(spec[k]);
    }
    buf.push_back('\n');
    out << buf;
  }
  finish(out, path);
}

std::vector<double> get_spectrum(const HyperCube& cube, std::size_t x, std::size_t y) {
  if (x >= cube.nx() || y >= cube.ny())
    throw std::out_of_range("pixel (" + std::to_string(x) + ", " + std::to_string(y) + ") outside " +
                            std::to_string(cube.nx()) + "x" + std::to_string(cube.ny()) + " cube");
  auto s = cube.row(cube.index(x, y));
  return {s.begin(), s.end()};
}

LabelMap load_labels(const std::filesystem::path& path) {
  const std::string name = path.string();
  auto in = open_in(path);
  auto [nx, ny] = grid_header(in, "LBL1", name);
  std::vector<int> labels;
  labels.reserve(nx * ny);
  std::string line;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    for (auto tok : split_ws(line)) {
      const long v = parse_long(tok, name, lineno);
      if (v < -1) throw ParseError(name, lineno, "labels must be >= -1");
      labels.push_back(static_cast<int>(v));
    }
  }
  if (labels.size() != nx * ny) throw ParseError(name, lineno, "label count does not match nx*ny");
  return LabelMap(nx, ny, std::move(labels));
}

void save_labels(const LabelMap& labels, const std::filesystem::path& path) {
  if (labels.labels.size() != labels.nx * labels.ny || labels.labels.empty())
    throw ParameterError("label map dimensions are inconsistent");
  auto out = open_out(path);
  out << "LBL1 " << labels.nx << ' ' << labels.ny << '\n';
  for (std::size_t y = 0; y < labels.ny; ++y) {
    for (std::size_t x = 0; x < labels.nx; ++x) out << (x ? " " : "") << labels.at(x, y);
    out << '\n';
  }
  finish(out, path);
}

FloatGrid load_grid(const std::filesystem::path& path) {
  const std::string name = path.string();
  auto in = open_in(path);
  auto [nx, ny] = grid_header(in, "MAP1", name);
  std::vector<double> values;
  values.reserve(nx * ny);
  std::string line;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    for (auto tok : split_ws(line)) {
      if (tok == "nan") {
        values.push_back(std::nan(""));
        continue;
      }
      values.push_back(parse_double(tok, name, lineno));
    }
  }
  if (values.size() != nx * ny) throw ParseError(name, lineno, "value count does not match nx*ny");
  return FloatGrid(nx, ny, std::move(values));
}

void save_grid(const FloatGrid& grid, const std::filesystem::path& path) {
  if (grid.values.size() != grid.nx * grid.ny || grid.values.empty())
    throw ParameterError("grid dimensions are inconsistent");
  auto out = open_out(path);
  out << "MAP1 " << grid.nx << ' ' << grid.ny << '\n';
  for (std::size_t y = 0; y < grid.ny; ++y) {
    for (std::size_t x = 0; x < grid.nx; ++x) out << (x ? " " : "") << format_value(grid.at(x, y));
    out << '\n';
  }
  finish(out, path);
}

}  // namespace brim
