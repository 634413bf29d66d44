#pragma once

// Config-driven batch commands: verify | solve | converge.
//
// Exit codes: 0 success, 2 configuration error, 3 verification failure,
// 4 numerical failure.

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sonine::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitVerify = 3;
inline constexpr int kExitNumerical = 4;

struct RunConfig {
  // [kernel]
  std::string alpha;  // expression text (a preset is resolved at parse time)
  double horizon = 1.0;
  std::optional<std::string> normalization;  // plain | gamma
  // [weight]
  std::string w = "1";
  // [forcing]
  bool has_forcing = false;
  std::optional<std::string> f;
  std::optional<std::string> exact;
  std::optional<std::string> u0;
  double c = 0.0;
  bool manufactured = false;
  // [mesh]
  int N = 64;
  std::optional<double> grading;
  std::optional<bool> uniform;
  // [quadrature]
  int jacobi_n = 32;
  int panel_levels = 40;
  int panel_nodes = 16;
  // [tolerances]
  double tol_csc = 1e-12;
  double tol_continuity = 1e-4;
  double tol_solver = 1e-2;
  // [output]
  std::optional<std::string> directory;
  bool write_csv = true;
  // [solver]
  std::string strategy = "second-kind";  // second-kind | first-kind-g
  // [pde]
  int M = 32;
  // [verify]
  int grid_points = 17;
  int licm_order = 4;
  int licm_points = 64;
};

// Throws ConfigError (with line numbers) or ParseError for bad expressions.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sonine::cli
