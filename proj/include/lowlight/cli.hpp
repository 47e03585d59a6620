#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "lowlight/dataset.hpp"
#include "lowlight/estimate.hpp"
#include "lowlight/eval.hpp"

namespace lowlight::cli {

enum class Command { synthesize, degrade, enhance, evaluate, pr_export, gradcheck, consensus, split };

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kIo = 2,
  kValidation = 3,
  kGradcheckFailed = 4,
};

inline constexpr double kGradcheckTolerance = 1e-4;

struct RunConfig {
  Command command = Command::enhance;

  std::filesystem::path input;
  std::filesystem::path output;
  std::filesystem::path light;         // --a: atmospheric light PNG to read
  std::filesystem::path transmission;  // --t: transmission PNG to read
  std::filesystem::path light_out;     // --a-out
  std::filesystem::path transmission_out;  // --t-out
  std::filesystem::path sidecar;
  std::filesystem::path list;
  std::filesystem::path saliency;
  std::filesystem::path gt;
  std::filesystem::path report;
  std::filesystem::path csv;
  std::filesystem::path mask_dir;

  double alpha = kDefaultAlpha;
  std::uint64_t seed = 0;
  double t_min = kDefaultTMin;
  double omega = kDefaultOmega;
  int radius = static_cast<int>(kDefaultDarkRadius);
  int t_radius = 8;
  int n_thresholds = kDefaultThresholds;
  double beta_sq = kDefaultBetaSq;
  double top_fraction = kDefaultTopFraction;
  bool refine = true;
  RefineConfig refine_cfg;

  double train_fraction = 457.0 / 577.0;
  double consensus_threshold = kDefaultConsensusThreshold;

  int channels = 4;
  int size = 4;
  int instances = 1;

  unsigned jobs = 1;

  /// Throws DomainError on out-of-range numeric settings.
  void validate() const;
};

/// Thrown for missing or conflicting arguments (exit code 1).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dispatches one command. Exceptions are mapped to exit codes; messages go to `err`.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

std::optional<Command> parse_command(std::string_view name);
std::string_view command_name(Command c);

/// Report JSON: mae, max_f_beta, beta_sq, n_images, curve [[threshold, precision, recall], ...], per_image.
std::string report_to_json(const EvalReport& report);

/// CSV with header `threshold,precision,recall`, six decimals per value.
std::string curve_to_csv(const PRCurve& curve);

}  // namespace lowlight::cli
