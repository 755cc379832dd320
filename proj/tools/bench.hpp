#pragma once

#include <cstdint>
#include <string>

#include "brim/serialize.hpp"

namespace brim::cli {

struct BenchConfig {
  std::string preset = "phantom";
  std::uint64_t seed = 0;
  int runs = 5;
  int p = 4;
  int clusters = 8;
  int k = 8;
};

// Times fit_cube, pca, vca, hca (distances included) and kmeans on one
// synthetic cube. Report fields are listed in docs/manifest.md.
Json run_bench(const BenchConfig& cfg);

}  // namespace brim::cli
