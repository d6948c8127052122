#include "pacsac/harness.hpp"

#include "pacsac/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace pacsac::harness {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

std::string terms_label(const agents::LossTerms& t) {
  std::string s = "fit";
  if (t.complexity) s += "+complexity";
  if (t.correction) s += "+correction";
  return s;
}

double elapsed(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

std::mutex log_mutex;

}  // namespace

void RunConfig::validate() const {
  if (seeds.empty()) throw std::invalid_argument("RunConfig: seed list is empty");
  const auto names = envs::environment_names();
  if (std::find(names.begin(), names.end(), env) == names.end()) {
    throw std::invalid_argument("RunConfig: unknown environment '" + env + "'");
  }
  if (jobs == 0) throw std::invalid_argument("RunConfig: jobs must be at least 1");
  training.validate();
}

RunConfig load_run_config(const fs::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  const nlohmann::json j = nlohmann::json::parse(in);
  if (!j.is_object()) throw std::invalid_argument(path.string() + ": expected a JSON object");
  auto& t = base.training;
  for (const auto& [key, v] : j.items()) {
    if (key == "env") base.env = v.get<std::string>();
    else if (key == "algo") base.algo = agents::parse_algorithm(v.get<std::string>());
    else if (key == "steps") t.total_steps = v.get<std::size_t>();
    else if (key == "warmup") t.warmup_steps = v.get<std::size_t>();
    else if (key == "seeds") base.seeds = v.get<std::vector<std::uint64_t>>();
    else if (key == "R") t.search_samples = v.get<std::size_t>();
    else if (key == "xi") t.xi = v.get<double>();
    else if (key == "alpha") t.alpha = v.get<double>();
    else if (key == "gamma") t.gamma = v.get<double>();
    else if (key == "tau") t.tau = v.get<double>();
    else if (key == "lr") t.learning_rate = v.get<double>();
    else if (key == "batch") t.batch_size = v.get<std::size_t>();
    else if (key == "buffer") t.buffer_capacity = v.get<std::size_t>();
    else if (key == "prior_std") t.prior_std = v.get<double>();
    else if (key == "init_log_std") t.init_log_std = v.get<double>();
    else if (key == "hidden") t.hidden_width = v.get<std::size_t>();
    else if (key == "layer_norm_affine") t.layer_norm_affine = v.get<bool>();
    else if (key == "actor_entropy") t.actor_entropy_term = v.get<bool>();
    else if (key == "complexity") t.terms.complexity = v.get<bool>();
    else if (key == "correction") t.terms.correction = v.get<bool>();
    else if (key == "out") base.out_dir = v.get<std::string>();
    else if (key == "jobs") base.jobs = v.get<std::size_t>();
    else throw std::invalid_argument(path.string() + ": unknown key '" + key + "'");
  }
  return base;
}

std::pair<double, double> episode_metrics(const std::vector<EpisodeLog>& episodes) {
  if (episodes.empty()) throw ContractError("episode_metrics: no finished episodes");
  double total = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& e : episodes) {
    total += e.reward;
    best = std::max(best, e.reward);
  }
  return {total / static_cast<double>(episodes.size()), best};
}

std::pair<double, double> mean_sd(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(values.size());
  const double m = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() == 1) return {m, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return {m, std::sqrt(ss / (n - 1.0))};
}

MetricsReport aggregate(const std::string& algo, const std::string& env, std::vector<SeedResult> seeds) {
  MetricsReport r;
  r.algo = algo;
  r.env = env;
  r.per_seed = std::move(seeds);
  std::vector<double> aucs;
  std::vector<double> highs;
  for (const auto& s : r.per_seed) {
    aucs.push_back(s.auc);
    highs.push_back(s.highest);
  }
  std::tie(r.auc_mean, r.auc_sd) = mean_sd(aucs);
  std::tie(r.highest_mean, r.highest_sd) = mean_sd(highs);
  return r;
}

std::vector<double> trailing_mean(const std::vector<double>& values, std::size_t window) {
  if (window == 0) throw ContractError("trailing_mean: window must be positive");
  std::vector<double> out(values.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    acc += values[i];
    if (i >= window) acc -= values[i - window];
    out[i] = acc / static_cast<double>(std::min(window, i + 1));
  }
  return out;
}

namespace {

SeedResult train_one(const RunConfig& config, std::uint64_t seed, const fs::path* checkpoint) {
  const auto start = std::chrono::steady_clock::now();
  auto env = envs::make_environment(config.env);
  agents::TrainingConfig tc = config.training;
  tc.seed = seed;
  auto agent = agents::make_agent(config.algo, env->spec(), tc);

  SeedResult result;
  result.seed = seed;
  for (std::size_t step = 0; step < tc.total_steps; ++step) {
    const agents::StepReport rep = agent->train_step(*env);
    if (!rep.episode_done) continue;
    result.episodes.push_back({seed, result.episodes.size(), rep.env_step, rep.episode_reward, rep.episode_length});
    if (config.verbose) {
      std::lock_guard lock(log_mutex);
      std::cerr << agents::to_string(config.algo) << " seed " << seed << " episode " << result.episodes.size()
                << " step " << rep.env_step << " reward " << rep.episode_reward << '\n';
    }
  }
  if (!result.episodes.empty()) std::tie(result.auc, result.highest) = episode_metrics(result.episodes);
  if (checkpoint != nullptr) nets::write_checkpoint(*checkpoint, agent->parameters());
  result.seconds = elapsed(start);
  return result;
}

}  // namespace

SeedResult train_seed(const RunConfig& config, std::uint64_t seed) {
  config.validate();
  return train_one(config, seed, nullptr);
}

namespace {

std::vector<SeedResult> train_all(const RunConfig& config) {
  std::vector<SeedResult> results(config.seeds.size());
  std::vector<std::exception_ptr> errors(config.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      const auto seed = config.seeds[i];
      try {
        const fs::path ckpt = config.out_dir / ("seed_" + std::to_string(seed)) / "checkpoint.bin";
        if (config.write_checkpoints) fs::create_directories(ckpt.parent_path());
        results[i] = train_one(config, seed, config.write_checkpoints ? &ckpt : nullptr);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::min(config.jobs, config.seeds.size());
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < n; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

void write_curves(std::ostream& out, const std::string& group, const SeedResult& s) {
  std::vector<double> raw;
  for (const auto& e : s.episodes) raw.push_back(e.reward);
  const auto smooth = trailing_mean(raw);
  for (std::size_t i = 0; i < s.episodes.size(); ++i) {
    const auto& e = s.episodes[i];
    out << group << ',' << e.seed << ',' << e.episode << ',' << e.env_step << ',' << num(e.reward) << ','
        << num(smooth[i]) << '\n';
  }
}

constexpr const char* kCurvesHeader = "group,seed,episode,env_step,reward,smoothed\n";

}  // namespace

void write_episodes_csv(const fs::path& path, const std::vector<EpisodeLog>& episodes) {
  auto out = open_out(path);
  out << "seed,episode,env_step,reward,length\n";
  for (const auto& e : episodes) {
    out << e.seed << ',' << e.episode << ',' << e.env_step << ',' << num(e.reward) << ',' << e.length << '\n';
  }
}

std::vector<EpisodeLog> read_episodes_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "seed,episode,env_step,reward,length") throw std::runtime_error(path.string() + ": unexpected header");
  std::vector<EpisodeLog> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    EpisodeLog e;
    char c1, c2, c3, c4;
    row >> e.seed >> c1 >> e.episode >> c2 >> e.env_step >> c3 >> e.reward >> c4 >> e.length;
    if (!row || c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',') {
      throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
    }
    out.push_back(e);
  }
  return out;
}

void write_metrics_json(const fs::path& path, const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["algo"] = report.algo;
  j["env"] = report.env;
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (const auto& s : report.per_seed) {
    per[std::to_string(s.seed)] = {{"auc", s.auc}, {"highest", s.highest}, {"episodes", s.episodes.size()}};
  }
  j["per_seed"] = per;
  j["aggregate"] = {{"auc_mean", report.auc_mean},
                    {"auc_sd", report.auc_sd},
                    {"highest_mean", report.highest_mean},
                    {"highest_sd", report.highest_sd}};
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

MetricsReport run_training(const RunConfig& config) {
  config.validate();
  fs::create_directories(config.out_dir);
  auto results = train_all(config);

  std::vector<EpisodeLog> all;
  auto curves = open_out(config.out_dir / "curves.csv");
  curves << kCurvesHeader;
  for (const auto& s : results) {
    write_episodes_csv(config.out_dir / ("seed_" + std::to_string(s.seed)) / "episodes.csv", s.episodes);
    all.insert(all.end(), s.episodes.begin(), s.episodes.end());
    write_curves(curves, "seed_" + std::to_string(s.seed), s);
  }
  write_episodes_csv(config.out_dir / "episodes.csv", all);
  MetricsReport report = aggregate(agents::to_string(config.algo), config.env, std::move(results));
  write_metrics_json(config.out_dir / "metrics.json", report);
  return report;
}

std::vector<std::pair<std::string, agents::LossTerms>> default_ablation_rows() {
  std::vector<std::pair<std::string, agents::LossTerms>> rows;
  for (auto [complexity, correction] : {std::pair{false, false}, std::pair{true, false}, std::pair{true, true}}) {
    agents::LossTerms t;
    t.complexity = complexity;
    t.correction = correction;
    rows.emplace_back(terms_label(t), t);
  }
  return rows;
}

std::vector<AblationRow> run_ablation(const RunConfig& config,
                                      const std::vector<std::pair<std::string, agents::LossTerms>>& rows) {
  if (config.algo != agents::Algorithm::kPac4Sac) throw std::invalid_argument("ablation applies to pac4sac only");
  std::vector<AblationRow> out;
  for (const auto& [label, terms] : rows) {
    if (!terms.data_fit) throw std::invalid_argument("ablation row '" + label + "' disables the data-fit term");
    RunConfig rc = config;
    rc.training.terms = terms;
    rc.out_dir = config.out_dir / label;
    out.push_back({label, terms, run_training(rc)});
  }
  auto csv = open_out(config.out_dir / "ablation.csv");
  csv << "terms,data_fit,complexity,correction,seeds,auc_mean,auc_sd,highest_mean,highest_sd\n";
  for (const auto& r : out) {
    csv << r.label << ',' << r.terms.data_fit << ',' << r.terms.complexity << ',' << r.terms.correction << ','
        << r.metrics.per_seed.size() << ',' << num(r.metrics.auc_mean) << ',' << num(r.metrics.auc_sd) << ','
        << num(r.metrics.highest_mean) << ',' << num(r.metrics.highest_sd) << '\n';
  }
  return out;
}

std::vector<SweepRow> run_shooting_sweep(const RunConfig& config, const std::vector<std::size_t>& sample_counts) {
  if (config.algo != agents::Algorithm::kPac4Sac) throw std::invalid_argument("R sweep applies to pac4sac only");
  std::vector<SweepRow> out;
  auto curves = open_out(config.out_dir / "curves.csv");
  curves << kCurvesHeader;
  for (std::size_t r : sample_counts) {
    if (r == 0) throw std::invalid_argument("R sweep: every R must be at least 1");
    RunConfig rc = config;
    rc.training.search_samples = r;
    rc.out_dir = config.out_dir / ("R_" + std::to_string(r));
    const auto start = std::chrono::steady_clock::now();
    SweepRow row{r, run_training(rc), 0.0};
    row.seconds = elapsed(start);
    for (const auto& s : row.metrics.per_seed) write_curves(curves, "R_" + std::to_string(r), s);
    out.push_back(std::move(row));
  }
  auto csv = open_out(config.out_dir / "sweep_r.csv");
  csv << "R,seeds,auc_mean,auc_sd,highest_mean,highest_sd,wall_seconds\n";
  for (const auto& r : out) {
    csv << r.samples << ',' << r.metrics.per_seed.size() << ',' << num(r.metrics.auc_mean) << ','
        << num(r.metrics.auc_sd) << ',' << num(r.metrics.highest_mean) << ',' << num(r.metrics.highest_sd) << ','
        << num(r.seconds) << '\n';
  }
  return out;
}

}  // namespace pacsac::harness
