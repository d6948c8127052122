#include "pacsac/harness.hpp"

#include <CLI11.hpp>

#include <iomanip>
#include <iostream>
#include <optional>

namespace {

using pacsac::harness::RunConfig;

// Flags shared by train, ablate and sweep-r. Each is applied only when given,
// so a --config file supplies the rest.
struct RunFlags {
  std::string config;
  std::optional<std::string> env, algo, out;
  std::optional<std::size_t> steps, warmup, R, batch, buffer, jobs, hidden;
  std::optional<double> xi, alpha, gamma, tau, lr, prior_std;
  std::vector<std::uint64_t> seeds;
  bool verbose = false;
  bool no_checkpoint = false;

  void attach(CLI::App& app) {
    app.add_option("--config", config, "JSON config; flags override its values")->check(CLI::ExistingFile);
    app.add_option("--env", env, "pendulum or cartpole-swingup");
    app.add_option("--algo", algo, "pac4sac or sac");
    app.add_option("--steps", steps, "environment steps per seed");
    app.add_option("--warmup", warmup, "uniform-action steps before updates");
    app.add_option("--seeds", seeds, "comma-separated seeds")->delimiter(',');
    app.add_option("--R", R, "actor samples per action search");
    app.add_option("--xi", xi, "overestimation-correction coefficient");
    app.add_option("--alpha", alpha, "entropy coefficient");
    app.add_option("--gamma", gamma, "discount");
    app.add_option("--tau", tau, "Polyak rate");
    app.add_option("--lr", lr, "learning rate");
    app.add_option("--batch", batch, "minibatch size");
    app.add_option("--buffer", buffer, "replay capacity");
    app.add_option("--hidden", hidden, "hidden width");
    app.add_option("--prior-std", prior_std, "critic prior standard deviation");
    app.add_option("--out", out, "output directory");
    app.add_option("--jobs", jobs, "seeds trained in parallel");
    app.add_flag("--verbose", verbose, "log every finished episode");
    app.add_flag("--no-checkpoint", no_checkpoint, "skip checkpoint files");
  }

  RunConfig resolve() const {
    RunConfig c;
    if (!config.empty()) c = pacsac::harness::load_run_config(config, c);
    auto& t = c.training;
    if (env) c.env = *env;
    if (algo) c.algo = pacsac::agents::parse_algorithm(*algo);
    if (out) c.out_dir = *out;
    if (steps) t.total_steps = *steps;
    if (warmup) t.warmup_steps = *warmup;
    if (!seeds.empty()) c.seeds = seeds;
    if (R) t.search_samples = *R;
    if (xi) t.xi = *xi;
    if (alpha) t.alpha = *alpha;
    if (gamma) t.gamma = *gamma;
    if (tau) t.tau = *tau;
    if (lr) t.learning_rate = *lr;
    if (batch) t.batch_size = *batch;
    if (buffer) t.buffer_capacity = *buffer;
    if (hidden) t.hidden_width = *hidden;
    if (prior_std) t.prior_std = *prior_std;
    if (jobs) c.jobs = *jobs;
    c.verbose = verbose;
    c.write_checkpoints = !no_checkpoint;
    c.validate();
    return c;
  }
};

void print_metrics(const std::string& label, const pacsac::harness::MetricsReport& m) {
  std::cout << std::fixed << std::setprecision(2) << label << "  AUC " << m.auc_mean << " +- " << m.auc_sd
            << "  highest " << m.highest_mean << " +- " << m.highest_sd << "  (" << m.per_seed.size() << " seeds)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PAC4SAC and SAC training, verification and plotting"};
  app.require_subcommand(1);

  RunFlags train_flags, ablate_flags, sweep_flags;
  auto* train = app.add_subcommand("train", "train one algorithm on one environment over several seeds");
  train_flags.attach(*train);

  auto* ablate = app.add_subcommand("ablate", "critic loss-term ablation (pac4sac)");
  ablate_flags.attach(*ablate);

  auto* sweep = app.add_subcommand("sweep-r", "action-search sample-count sweep (pac4sac)");
  sweep_flags.attach(*sweep);
  std::vector<std::size_t> r_list{1, 8, 64};
  sweep->add_option("--R-list", r_list, "comma-separated R values")->delimiter(',');

  auto* verify = app.add_subcommand("verify", "gradient checks and finite-MDP property suites");
  pacsac::harness::VerifyOptions vopt;
  std::string counterexamples;
  verify->add_option("--seed", vopt.seed, "seed for random instances");
  verify->add_option("--lemma-instances", vopt.lemma_instances);
  verify->add_option("--improvement-instances", vopt.improvement_instances);
  verify->add_option("--trials", vopt.improvement_trials, "Monte-Carlo trials per search policy");
  verify->add_option("--counterexamples", counterexamples, "directory for failing instances (JSON)");

  auto* plot = app.add_subcommand("plot", "SVG learning curves from an episodes or curves CSV");
  std::string plot_in, plot_out, plot_title;
  plot->add_option("--in", plot_in, "CSV file")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", plot_out, "SVG file")->required();
  plot->add_option("--title", plot_title);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const RunConfig c = train_flags.resolve();
      auto m = pacsac::harness::run_training(c);
      print_metrics(m.algo + " on " + m.env, m);
      std::cout << "wrote " << (c.out_dir / "metrics.json").string() << '\n';
    } else if (*ablate) {
      RunConfig c = ablate_flags.resolve();
      for (const auto& row : pacsac::harness::run_ablation(c, pacsac::harness::default_ablation_rows())) {
        print_metrics(row.label, row.metrics);
      }
      std::cout << "wrote " << (c.out_dir / "ablation.csv").string() << '\n';
    } else if (*sweep) {
      RunConfig c = sweep_flags.resolve();
      for (const auto& row : pacsac::harness::run_shooting_sweep(c, r_list)) {
        print_metrics("R=" + std::to_string(row.samples), row.metrics);
      }
      std::cout << "wrote " << (c.out_dir / "sweep_r.csv").string() << '\n';
    } else if (*verify) {
      vopt.counterexample_dir = counterexamples;
      bool ok = true;
      for (const auto& c : pacsac::harness::run_verify(vopt)) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << " [" << std::fixed
                  << std::setprecision(1) << c.seconds << " s]\n";
        ok = ok && c.passed;
      }
      return ok ? 0 : 1;
    } else if (*plot) {
      pacsac::harness::plot_learning_curves(plot_in, plot_out, plot_title);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
