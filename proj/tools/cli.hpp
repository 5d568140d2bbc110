#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace balgraph::cli {

using json = nlohmann::json;

/// Every accepted key with its default value.
json default_config();

/// Copies `overlay` into `base`. Keys missing from `base` and values of the
/// wrong type are rejected with their dotted path.
void merge_checked(json& base, const json& overlay, const std::string& path = "");

/// Applies "a.b.c=value"; the value is read as JSON, or as a plain string
/// when it does not parse.
void apply_override(json& config, const std::string& assignment);

struct BenchConfig {
  std::vector<int> ladder{256, 512, 1024, 2048};
  std::vector<int> krylov{32};
  int full_max = 256;   // also run m = n up to this size
  int exact_max = 512;  // error column only up to this size
  int repeats = 5;
  int degree = 4;       // average node degree of the random graphs
  double omega_fraction = 0.1;
  double alpha = 10.0;
  std::uint64_t seed = 1;
};

struct BenchRow {
  int n = 0;
  int m = 0;
  long edges = 0;
  double err_inf = -1.0;  // negative when the exact filter was skipped
  double wall_ms = 0.0;   // median over repeats
};

std::vector<BenchRow> lanczos_bench(const BenchConfig& config);
std::string bench_csv(const std::vector<BenchRow>& rows);

/// Runs one command line (without the program name). Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace balgraph::cli
