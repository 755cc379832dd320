#include "brim/serialize.hpp"

#include <fstream>

#include "brim/error.hpp"

namespace brim {

Json matrix_to_json(const Matrix& m) {
  Json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["data"] = std::vector<double>(m.data(), m.data() + m.size());
  return j;
}

Matrix matrix_from_json(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size())
    throw ParameterError("matrix json: data length does not match rows x cols");
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

Json to_json(const Decomposition& dec) {
  Json j;
  j["method"] = dec.method == Decomposition::Method::PCA ? "pca" : "vca";
  j["dims"] = {{"pixels", dec.scores.rows()}, {"channels", dec.loadings.rows()}, {"components", dec.loadings.cols()}};
  j["loadings"] = matrix_to_json(dec.loadings);
  j["scores"] = matrix_to_json(dec.scores);
  j["mean"] = std::vector<double>(dec.mean_spectrum.data(), dec.mean_spectrum.data() + dec.mean_spectrum.size());
  j["explained"] = dec.explained;
  j["eigenvalues"] = dec.eigenvalues;
  j["pure_pixel_indices"] = dec.pure_pixel_indices;
  j["seed"] = dec.seed;
  return j;
}

Decomposition decomposition_from_json(const Json& j) {
  try {
    Decomposition dec;
    const auto method = j.at("method").get<std::string>();
    if (method != "pca" && method != "vca") throw ParameterError("decomposition json: unknown method " + method);
    dec.method = method == "pca" ? Decomposition::Method::PCA : Decomposition::Method::VCA;
    dec.loadings = matrix_from_json(j.at("loadings"));
    dec.scores = matrix_from_json(j.at("scores"));
    const auto mean = j.at("mean").get<std::vector<double>>();
    dec.mean_spectrum = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    dec.explained = j.value("explained", std::vector<double>{});
    dec.eigenvalues = j.value("eigenvalues", std::vector<double>{});
    dec.pure_pixel_indices = j.value("pure_pixel_indices", std::vector<std::size_t>{});
    dec.seed = j.value("seed", std::uint64_t{0});
    if (dec.scores.cols() != dec.loadings.cols() || dec.mean_spectrum.size() != dec.loadings.rows())
      throw ParameterError("decomposition json: inconsistent dimensions");
    return dec;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("decomposition json: ") + e.what());
  }
}

Json to_json(const LdaModel& model) {
  Json j;
  j["directions"] = matrix_to_json(model.directions);
  j["projected_means"] = matrix_to_json(model.projected_means);
  j["labels"] = model.class_labels;
  j["ridge"] = model.regularization;
  return j;
}

LdaModel lda_from_json(const Json& j) {
  try {
    LdaModel m;
    m.directions = matrix_from_json(j.at("directions"));
    m.projected_means = matrix_from_json(j.at("projected_means"));
    m.class_labels = j.at("labels").get<std::vector<int>>();
    m.regularization = j.at("ridge").get<double>();
    if (m.projected_means.rows() != static_cast<Eigen::Index>(m.class_labels.size()) ||
        m.projected_means.cols() != m.directions.cols())
      throw ParameterError("lda json: inconsistent dimensions");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("lda json: ") + e.what());
  }
}

Json cluster_sidecar(const ClusterResult& result, const DistanceMetric& metric, const Json& parameters,
                     std::uint64_t seed) {
  Json j;
  switch (result.method) {
    case ClusterResult::Method::HCA:
      j["method"] = "hca";
      break;
    case ClusterResult::Method::KCA:
      j["method"] = "kmeans";
      break;
    case ClusterResult::Method::APRIORI:
      j["method"] = "apriori";
      break;
  }
  j["metric"] = metric.name();
  if (metric.kind == DistanceMetric::Kind::Minkowski) j["minkowski_order"] = metric.order;
  if (metric.kind == DistanceMetric::Kind::Mahalanobis) j["mahalanobis_ridge"] = metric.ridge;
  j["parameters"] = parameters;
  j["seed"] = seed;
  j["clusters"] = result.clusters;
  j["mean_spectra"] = matrix_to_json(result.mean_spectra);
  if (result.method == ClusterResult::Method::KCA) {
    j["inertia"] = result.inertia;
    j["centroids"] = matrix_to_json(result.centroids);
  }
  return j;
}

Json truth_to_json(const SynthTruth& truth) {
  Json j;
  Json ems = Json::array();
  for (const auto& e : truth.endmembers)
    ems.push_back({{"name", e.name}, {"shift", e.shift}, {"width", e.width}, {"amplitude", e.amplitude}});
  j["endmembers"] = ems;
  j["abundances"] = matrix_to_json(truth.abundances);
  std::vector<std::size_t> stray;
  for (std::size_t i = 0; i < truth.stray.size(); ++i)
    if (truth.stray[i]) stray.push_back(i);
  j["stray_pixels"] = stray;
  return j;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

void write_json(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace brim
