#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "brim/classify.hpp"
#include "brim/cluster.hpp"
#include "brim/decompose.hpp"
#include "brim/synth.hpp"

namespace brim {

using Json = nlohmann::ordered_json;

// Matrices are stored row-major as {"rows", "cols", "data"}.
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

Json to_json(const Decomposition& dec);
Decomposition decomposition_from_json(const Json& j);

Json to_json(const LdaModel& model);
LdaModel lda_from_json(const Json& j);

// Sidecar written next to a cluster label map.
Json cluster_sidecar(const ClusterResult& result, const DistanceMetric& metric, const Json& parameters,
                     std::uint64_t seed);
Json truth_to_json(const SynthTruth& truth);

// Throws IoError / ParseError.
Json read_json(const std::filesystem::path& path);
void write_json(const Json& j, const std::filesystem::path& path);

}  // namespace brim
