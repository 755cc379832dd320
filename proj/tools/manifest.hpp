#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "brim/serialize.hpp"

namespace brim::cli {

// Lower-case hex SHA-256 of a file's bytes. Throws IoError.
std::string sha256_file(const std::filesystem::path& path);

// Accumulates everything a run manifest records. Only time spent inside
// `timed` sections counts towards wall_time_s, so file I/O is excluded.
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> argv);

  void set_param(const std::string& key, Json value) { params_[key] = std::move(value); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void set_threads(unsigned threads) { threads_ = threads; }
  void add_input(const std::filesystem::path& p) { inputs_.push_back(p); }
  void add_output(const std::filesystem::path& p) { outputs_.push_back(p); }
  void note(const std::string& key, Json value) { notes_[key] = std::move(value); }

  template <typename Fn>
  auto timed(Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    struct Stop {
      RunManifest* self;
      std::chrono::steady_clock::time_point t0;
      ~Stop() { self->wall_s_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
    } stop{this, t0};
    return fn();
  }

  double wall_time_s() const { return wall_s_; }
  Json to_json() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  std::vector<std::string> argv_;
  Json params_ = Json::object();
  Json notes_ = Json::object();
  std::uint64_t seed_ = 0;
  unsigned threads_ = 1;
  std::vector<std::filesystem::path> inputs_;
  std::vector<std::filesystem::path> outputs_;
  double wall_s_ = 0.0;
};

}  // namespace brim::cli
