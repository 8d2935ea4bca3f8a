#pragma once

#include "config.hpp"

#include <string>
#include <vector>

namespace c2st::cli {

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major
};

struct SamplePair {
  Matrix x;
  Matrix y;
};

// n rows from each side of the configured data: the analytic pair, or a seeded
// subsample of the two IDX class filters. `purpose` separates independent draws.
SamplePair generate_dataset(const RunConfig& cfg, std::size_t n, const std::string& purpose);

Matrix read_samples(const std::string& path);
std::string samples_csv(const Matrix& m);

struct Artifact {
  std::string name;
  std::string content;
};

std::vector<std::string> command_names();
// Runs one subcommand and returns its artifacts, the effective config included.
std::vector<Artifact> run_command(const std::string& command, const RunConfig& cfg);

}  // namespace c2st::cli
