#ifndef PACSAC_HARNESS_HPP
#define PACSAC_HARNESS_HPP

#include "pacsac/agents.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace pacsac::harness {

struct RunConfig {
  std::string env = "pendulum";
  agents::Algorithm algo = agents::Algorithm::kPac4Sac;
  agents::TrainingConfig training;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path out_dir = "runs";
  /// Seeds trained concurrently.
  std::size_t jobs = 1;
  bool write_checkpoints = true;
  /// Print one line per finished episode to stderr.
  bool verbose = false;

  /// Throws std::invalid_argument on an empty seed list, unknown env or bad
  /// training field.
  void validate() const;
};

/// Reads a JSON object whose keys mirror the CLI flags (env, algo, steps,
/// seeds, R, xi, alpha, tau, lr, batch, buffer, out, ...). Missing keys keep
/// the defaults of `base`; unknown keys throw.
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

struct EpisodeLog {
  std::uint64_t seed = 0;
  std::size_t episode = 0;
  std::size_t env_step = 0;
  double reward = 0.0;
  std::size_t length = 0;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<EpisodeLog> episodes;
  double auc = 0.0;
  double highest = 0.0;
  double seconds = 0.0;
};

struct MetricsReport {
  std::string algo;
  std::string env;
  std::vector<SeedResult> per_seed;
  double auc_mean = 0.0;
  double auc_sd = 0.0;
  double highest_mean = 0.0;
  double highest_sd = 0.0;
};

/// Mean and highest episode reward. Throws ContractError with no episodes.
std::pair<double, double> episode_metrics(const std::vector<EpisodeLog>& episodes);
/// Mean and sample standard deviation (n - 1); sd is 0 for a single value.
std::pair<double, double> mean_sd(const std::vector<double>& values);
MetricsReport aggregate(const std::string& algo, const std::string& env, std::vector<SeedResult> seeds);

/// Trailing-window mean; the first entries average what is available.
std::vector<double> trailing_mean(const std::vector<double>& values, std::size_t window = 10);

/// Trains one seed without touching the disk.
SeedResult train_seed(const RunConfig& config, std::uint64_t seed);

/// Trains every seed and writes
///   DIR/seed_<s>/episodes.csv, DIR/seed_<s>/checkpoint.bin,
///   DIR/episodes.csv (all seeds), DIR/curves.csv, DIR/metrics.json.
MetricsReport run_training(const RunConfig& config);

struct AblationRow {
  std::string label;
  agents::LossTerms terms;
  MetricsReport metrics;
};

/// The three loss-term rows: fit, fit + complexity, fit + complexity + correction.
std::vector<std::pair<std::string, agents::LossTerms>> default_ablation_rows();

/// One run_training per row in DIR/<label>/, plus DIR/ablation.csv.
std::vector<AblationRow> run_ablation(const RunConfig& config,
                                      const std::vector<std::pair<std::string, agents::LossTerms>>& rows);

struct SweepRow {
  std::size_t samples = 0;
  MetricsReport metrics;
  double seconds = 0.0;
};

/// One run_training per R in DIR/R_<k>/, plus DIR/sweep_r.csv and a combined
/// DIR/curves.csv.
std::vector<SweepRow> run_shooting_sweep(const RunConfig& config, const std::vector<std::size_t>& sample_counts);

void write_episodes_csv(const std::filesystem::path& path, const std::vector<EpisodeLog>& episodes);
std::vector<EpisodeLog> read_episodes_csv(const std::filesystem::path& path);
void write_metrics_json(const std::filesystem::path& path, const MetricsReport& report);

// --- verify --------------------------------------------------------------

struct CheckOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyOptions {
  std::uint64_t seed = 0;
  std::size_t lemma_instances = 500;
  std::size_t improvement_instances = 100;
  std::size_t improvement_trials = 20;
  std::size_t gradient_instances = 20;
  /// Failing instances are written here as JSON when non-empty.
  std::filesystem::path counterexample_dir;
};

std::vector<CheckOutcome> run_verify(const VerifyOptions& options = {});

// --- plot ----------------------------------------------------------------

/// Renders an SVG of trailing-mean reward against env_step from an episodes
/// or curves CSV. Lines are keyed by the "group" column when present, then by
/// seed.
void plot_learning_curves(const std::filesystem::path& csv, const std::filesystem::path& svg,
                          const std::string& title = "");

}  // namespace pacsac::harness

#endif  // PACSAC_HARNESS_HPP
