#include "vsop3d/cli/harness.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "vsop3d/io/checkpoint.hpp"

namespace vsop3d {

namespace fs = std::filesystem;

std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::kPending: return "pending";
    case RunStatus::kRunning: return "running";
    case RunStatus::kDone: return "done";
    case RunStatus::kFailed: return "failed";
  }
  return "pending";
}

RunStatus parse_run_status(const std::string& text) {
  for (RunStatus s : {RunStatus::kPending, RunStatus::kRunning, RunStatus::kDone, RunStatus::kFailed}) {
    if (to_string(s) == text) return s;
  }
  throw HarnessError("unknown run status '" + text + "'");
}

namespace {

std::string run_stem(const std::string& env, std::uint64_t seed) { return env + "_seed" + std::to_string(seed); }

RunEntry make_entry(const std::string& env, std::uint64_t seed) {
  RunEntry r;
  r.env = env;
  r.seed = seed;
  return r;
}

void log_line(const LogFn& log, const std::string& line) {
  if (log) log(line);
}

std::string join_path(const std::string& dir, const std::string& rel) { return (fs::path(dir) / rel).string(); }

}  // namespace

std::string RunEntry::metrics_path() const { return "metrics/" + run_stem(env, seed) + ".csv"; }
std::string RunEntry::updates_path() const { return "updates/" + run_stem(env, seed) + ".json"; }
std::string RunEntry::checkpoint_path() const { return "checkpoints/" + run_stem(env, seed) + ".ckpt"; }

nlohmann::ordered_json Manifest::to_json() const {
  nlohmann::ordered_json j;
  j["artifact_version"] = artifact_version;
  j["config_hash"] = config_hash;
  j["label"] = label;
  j["config"] = config;
  j["runs"] = nlohmann::ordered_json::array();
  for (const auto& r : runs) {
    nlohmann::ordered_json e;
    e["env"] = r.env;
    e["seed"] = r.seed;
    e["status"] = to_string(r.status);
    e["steps"] = r.steps;
    e["updates"] = r.updates;
    e["final_score"] = r.final_score ? nlohmann::ordered_json(*r.final_score) : nlohmann::ordered_json();
    if (!r.error.empty()) e["error"] = r.error;
    j["runs"].push_back(e);
  }
  j["files"] = files;
  return j;
}

Manifest Manifest::from_json(const nlohmann::ordered_json& j) {
  Manifest m;
  m.artifact_version = j.at("artifact_version").get<int>();
  if (m.artifact_version != kArtifactVersion) {
    throw HarnessError("unsupported artifact_version " + std::to_string(m.artifact_version));
  }
  m.config_hash = j.at("config_hash").get<std::string>();
  m.label = j.at("label").get<std::string>();
  m.config = j.at("config");
  for (const auto& e : j.at("runs")) {
    RunEntry r;
    r.env = e.at("env").get<std::string>();
    r.seed = e.at("seed").get<std::uint64_t>();
    r.status = parse_run_status(e.at("status").get<std::string>());
    r.steps = e.at("steps").get<std::int64_t>();
    r.updates = e.at("updates").get<std::int64_t>();
    if (!e.at("final_score").is_null()) r.final_score = e.at("final_score").get<double>();
    r.error = e.value("error", std::string());
    m.runs.push_back(std::move(r));
  }
  m.files = j.at("files").get<std::vector<std::string>>();
  return m;
}

Manifest Manifest::load(const std::string& run_dir) {
  const std::string path = join_path(run_dir, "manifest.json");
  if (!fs::exists(path)) throw HarnessError("no manifest.json in '" + run_dir + "'");
  try {
    return from_json(nlohmann::ordered_json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw HarnessError("malformed manifest '" + path + "': " + e.what());
  }
}

RunEntry* Manifest::find(const std::string& env, std::uint64_t seed) {
  for (auto& r : runs) {
    if (r.env == env && r.seed == seed) return &r;
  }
  return nullptr;
}

nlohmann::ordered_json portable_config_json(const RunConfig& config) {
  auto j = to_json(config);
  j.erase("output_dir");
  j.erase("workers");
  return j;
}

double test_final_score(const std::vector<MetricRow>& rows, std::int64_t window, WindowUnit unit) {
  std::vector<double> values;
  if (unit == WindowUnit::kEpisodes) {
    for (const auto& r : rows) {
      if (r.split == Split::kTest) values.push_back(r.normalized_return);
    }
  } else {
    // Rows of one evaluation round share a step and appear contiguously.
    std::int64_t current = -1;
    double sum = 0.0;
    std::int64_t count = 0;
    for (const auto& r : rows) {
      if (r.split != Split::kTest) continue;
      if (r.step != current && count > 0) {
        values.push_back(sum / static_cast<double>(count));
        sum = 0.0;
        count = 0;
      }
      current = r.step;
      sum += r.normalized_return;
      ++count;
    }
    if (count > 0) values.push_back(sum / static_cast<double>(count));
  }
  if (values.empty()) throw HarnessError("no test-split records to score");
  return final_score(values, window);
}

namespace {

std::vector<MetricRow> to_rows(const std::vector<EpisodeRecord>& timeline, std::uint64_t seed) {
  std::vector<MetricRow> rows;
  rows.reserve(timeline.size());
  for (const auto& e : timeline) rows.push_back({e.step, e.split, e.env, seed, e.episodic_return, e.normalized_return});
  return rows;
}

// Files a manifest accounts for: fixed entries plus whatever each run has
// produced so far.
std::vector<std::string> inventory(const std::string& dir, const std::vector<RunEntry>& runs) {
  std::vector<std::string> files{"config.json", "manifest.json"};
  for (const auto& r : runs) {
    for (const auto& rel : {r.metrics_path(), r.updates_path(), r.checkpoint_path()}) {
      if (fs::exists(join_path(dir, rel))) files.push_back(rel);
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

class ManifestWriter {
 public:
  ManifestWriter(std::string dir, Manifest manifest) : dir_(std::move(dir)), manifest_(std::move(manifest)) {}

  void update(const std::string& env, std::uint64_t seed, const std::function<void(RunEntry&)>& fn) {
    std::lock_guard<std::mutex> lock(mu_);
    fn(*manifest_.find(env, seed));
    flush_locked();
  }
  void flush() {
    std::lock_guard<std::mutex> lock(mu_);
    flush_locked();
  }
  Manifest snapshot() {
    std::lock_guard<std::mutex> lock(mu_);
    return manifest_;
  }

 private:
  void flush_locked() {
    manifest_.files = inventory(dir_, manifest_.runs);
    write_file(join_path(dir_, "manifest.json"), manifest_.to_json().dump(2) + "\n");
  }

  std::string dir_;
  Manifest manifest_;
  std::mutex mu_;
};

struct Job {
  std::string env;
  std::uint64_t seed;
};

void train_one(const RunConfig& config, const Job& job, bool resume, const std::string& dir, ManifestWriter& writer,
               const LogFn& log) {
  const RunEntry paths = make_entry(job.env, job.seed);
  const std::string ckpt_path = join_path(dir, paths.checkpoint_path());
  Trainer trainer(config.hyperparams, config.train_options(job.env, job.seed));
  if (resume && fs::exists(ckpt_path)) {
    trainer.restore(Checkpoint::load(ckpt_path));
    log_line(log, "resumed " + run_stem(job.env, job.seed) + " at step " + std::to_string(trainer.global_step()));
  } else if (fs::exists(ckpt_path)) {
    fs::remove(ckpt_path);
  }
  writer.update(job.env, job.seed, [](RunEntry& r) {
    r.status = RunStatus::kRunning;
    r.final_score.reset();
    r.error.clear();
  });
  const std::int64_t interval = config.checkpoint_interval;
  trainer.run([&](const Trainer& t) {
    if (interval > 0 && !t.finished() && t.updates_done() % interval == 0) {
      write_file(ckpt_path, t.checkpoint().encode());
      writer.update(job.env, job.seed, [&](RunEntry& r) {
        r.steps = t.global_step();
        r.updates = t.updates_done();
      });
    }
  });
  write_file(join_path(dir, paths.metrics_path()), metrics_csv(trainer.timeline(), job.seed));
  write_file(join_path(dir, paths.updates_path()), update_stats_json(trainer.updates()));
  write_file(ckpt_path, trainer.checkpoint().encode());
  const double score =
      test_final_score(to_rows(trainer.timeline(), job.seed), config.final_window, config.window_unit);
  writer.update(job.env, job.seed, [&](RunEntry& r) {
    r.status = RunStatus::kDone;
    r.steps = trainer.global_step();
    r.updates = trainer.updates_done();
    r.final_score = score;
  });
  log_line(log, "done " + run_stem(job.env, job.seed) + " final_score " + format_double(score));
}

}  // namespace

Manifest cmd_train(const RunConfig& config, const TrainCommandOptions& options) {
  const std::string dir = config.output_dir;
  if (dir.empty()) throw HarnessError("output_dir is empty");
  for (const char* sub : {"metrics", "updates", "checkpoints"}) fs::create_directories(fs::path(dir) / sub);

  Manifest manifest;
  manifest.config_hash = config_hash(config);
  manifest.label = config.hyperparams.name;
  manifest.config = portable_config_json(config);
  std::optional<Manifest> previous;
  if (fs::exists(join_path(dir, "manifest.json"))) {
    previous = Manifest::load(dir);
    if (previous->config_hash != manifest.config_hash) {
      throw HarnessError("output directory '" + dir + "' holds runs for config " + previous->config_hash +
                         ", not " + manifest.config_hash);
    }
  }

  std::vector<Job> jobs;
  for (const auto& env : config.envs) {
    for (std::uint64_t seed : config.seeds) {
      RunEntry entry = make_entry(env, seed);
      RunEntry* old = previous ? previous->find(env, seed) : nullptr;
      const bool outputs_present = fs::exists(join_path(dir, entry.metrics_path())) &&
                                   fs::exists(join_path(dir, entry.updates_path())) &&
                                   fs::exists(join_path(dir, entry.checkpoint_path()));
      if (old != nullptr && old->status == RunStatus::kDone && outputs_present) {
        entry = *old;
        log_line(options.log, "skip " + run_stem(env, seed) + " (already done)");
      } else {
        jobs.push_back({env, seed});
      }
      manifest.runs.push_back(entry);
    }
  }

  write_file(join_path(dir, "config.json"), manifest.config.dump(2) + "\n");
  ManifestWriter writer(dir, manifest);
  writer.flush();

  std::atomic<std::size_t> next{0};
  std::mutex log_mu;
  const LogFn log = [&](const std::string& line) {
    std::lock_guard<std::mutex> lock(log_mu);
    log_line(options.log, line);
  };
  auto worker = [&]() {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      log("start " + run_stem(job.env, job.seed));
      try {
        train_one(config, job, options.resume, dir, writer, log);
      } catch (const std::exception& e) {
        writer.update(job.env, job.seed, [&](RunEntry& r) {
          r.status = RunStatus::kFailed;
          r.error = e.what();
        });
        log("failed " + run_stem(job.env, job.seed) + ": " + e.what());
      }
    }
  };
  const auto workers = static_cast<std::size_t>(std::max<std::int64_t>(1, config.workers));
  if (workers == 1 || jobs.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, jobs.size()); ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return writer.snapshot();
}

AggregateResult cmd_aggregate(const std::vector<std::string>& run_dirs, const AggregateOptions& options) {
  if (run_dirs.empty()) throw HarnessError("no run directories given");
  AggregateResult result;
  std::vector<std::string> reference_envs;
  std::string reference_dir;
  for (const auto& dir : run_dirs) {
    const Manifest manifest = Manifest::load(dir);
    const RunConfig config = run_config_from_json(manifest.config);
    std::vector<std::string> envs = config.envs;
    std::sort(envs.begin(), envs.end());
    if (reference_dir.empty()) {
      reference_envs = envs;
      reference_dir = dir;
    } else if (envs != reference_envs) {
      std::ostringstream msg;
      msg << "environment sets differ: '" << reference_dir << "' has " << nlohmann::json(reference_envs).dump()
          << ", '" << dir << "' has " << nlohmann::json(envs).dump();
      throw HarnessError(msg.str());
    }
    for (const auto& a : result.agents) {
      if (a.label == manifest.label) throw HarnessError("two run directories share the label '" + a.label + "'");
    }
    AgentReport agent;
    agent.label = manifest.label;
    agent.matrix.seed_ids = config.seeds;
    agent.matrix.env_names = reference_envs;
    agent.matrix.scores.assign(config.seeds.size() * reference_envs.size(), 0.0);
    const std::int64_t window = options.window > 0 ? options.window : config.final_window;
    for (std::size_t s = 0; s < config.seeds.size(); ++s) {
      for (std::size_t e = 0; e < reference_envs.size(); ++e) {
        const RunEntry entry = make_entry(reference_envs[e], config.seeds[s]);
        bool done = false;
        for (const auto& r : manifest.runs) {
          if (r.env == entry.env && r.seed == entry.seed) done = r.status == RunStatus::kDone;
        }
        if (!done) throw HarnessError("run " + run_stem(entry.env, entry.seed) + " in '" + dir + "' is not done");
        const auto csv = parse_metrics_csv(read_file(join_path(dir, entry.metrics_path())));
        if (csv.skipped_rows > 0) {
          result.skipped_rows += csv.skipped_rows;
          log_line(options.log, "warning: skipped " + std::to_string(csv.skipped_rows) + " malformed row(s) in " +
                                    join_path(dir, entry.metrics_path()));
        }
        agent.matrix.scores[s * reference_envs.size() + e] = test_final_score(csv.rows, window, config.window_unit);
      }
    }
    agent.metrics = aggregate_with_ci(agent.matrix, options.resamples, options.confidence,
                                      Rng(options.seed).split(agent.label), options.mode);
    result.agents.push_back(std::move(agent));
  }
  result.report = metrics_report(result.agents, options.baseline);
  result.report["bootstrap"] = {{"resamples", options.resamples},
                                {"confidence", options.confidence},
                                {"seed", options.seed},
                                {"mode", options.mode == BootstrapMode::kStratified ? "stratified" : "joint"}};
  result.report["warnings"] = {{"skipped_csv_rows", result.skipped_rows}};
  result.svg = render_svg(result.agents);
  if (!options.output_dir.empty()) {
    fs::create_directories(options.output_dir);
    write_file(join_path(options.output_dir, "report.json"), result.report.dump(2) + "\n");
    write_file(join_path(options.output_dir, "figure.svg"), result.svg);
    nlohmann::ordered_json manifest;
    manifest["artifact_version"] = kArtifactVersion;
    manifest["kind"] = "aggregate";
    manifest["inputs"] = run_dirs;
    manifest["files"] = {"figure.svg", "manifest.json", "report.json"};
    write_file(join_path(options.output_dir, "manifest.json"), manifest.dump(2) + "\n");
  }
  return result;
}

namespace {

const std::vector<std::pair<std::string, std::string>>& ablation_pairs() {
  static const std::vector<std::pair<std::string, std::string>> pairs{
      {"ppo", "ppo3d"}, {"vsop", "vsop3d"}, {"ppo", "vsop"}, {"ppo3d", "vsop3d"}};
  return pairs;
}

}  // namespace

nlohmann::ordered_json cmd_ablation_ppo3d(const RunConfig& config, const AblationOptions& options) {
  const std::int64_t budget = options.budget < 0 ? config.total_steps : options.budget;
  nlohmann::ordered_json report;
  report["budget"] = budget;
  report["envs"] = config.envs;
  report["seeds"] = config.seeds;
  report["agents"] = nlohmann::ordered_json::object();
  report["pairs"] = nlohmann::ordered_json::array();

  if (budget > 0) {
    std::map<std::string, std::map<std::string, std::map<std::uint64_t, double>>> scores;
    for (const auto& name : options.agents) {
      RunConfig run = config;
      run.preset = name;
      run.hyperparams = preset(name);
      run.total_steps = budget;
      run.output_dir = join_path(config.output_dir, name);
      log_line(options.log, "ablation: training " + name);
      const Manifest m = cmd_train(run, {options.resume, options.log});
      nlohmann::ordered_json per_env = nlohmann::ordered_json::object();
      for (const auto& r : m.runs) {
        if (r.status != RunStatus::kDone || !r.final_score) {
          throw HarnessError("ablation run " + name + "/" + run_stem(r.env, r.seed) + " did not finish: " + r.error);
        }
        scores[name][r.env][r.seed] = *r.final_score;
        per_env[r.env][std::to_string(r.seed)] = *r.final_score;
      }
      report["agents"][name] = per_env;
    }
    for (const auto& [base, other] : ablation_pairs()) {
      if (!scores.count(base) || !scores.count(other)) continue;
      nlohmann::ordered_json pair;
      pair["baseline"] = base;
      pair["agent"] = other;
      pair["envs"] = nlohmann::ordered_json::object();
      for (const auto& env : config.envs) {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        std::int64_t wins = 0;
        for (std::uint64_t seed : config.seeds) {
          const double delta = scores[other][env][seed] - scores[base][env][seed];
          const char* sign = delta > 0.0 ? "+" : (delta < 0.0 ? "-" : "0");
          wins += delta > 0.0;
          rows.push_back({{"seed", seed}, {"delta", delta}, {"sign", sign}});
        }
        pair["envs"][env] = {{"deltas", rows}, {"wins", wins}, {"seeds", config.seeds.size()}};
      }
      report["pairs"].push_back(pair);
    }
  }

  fs::create_directories(config.output_dir);
  write_file(join_path(config.output_dir, "ablation.json"), report.dump(2) + "\n");
  write_file(join_path(config.output_dir, "ablation_signs.txt"), sign_table(report));
  nlohmann::ordered_json manifest;
  manifest["artifact_version"] = kArtifactVersion;
  manifest["kind"] = "ablation";
  manifest["run_dirs"] = budget > 0 ? nlohmann::ordered_json(options.agents) : nlohmann::ordered_json::array();
  manifest["files"] = {"ablation.json", "ablation_signs.txt", "manifest.json"};
  write_file(join_path(config.output_dir, "manifest.json"), manifest.dump(2) + "\n");
  return report;
}

std::string sign_table(const nlohmann::ordered_json& ablation) {
  std::ostringstream out;
  const auto seeds = ablation.at("seeds").get<std::vector<std::uint64_t>>();
  out << "comparison        env              ";
  for (auto s : seeds) out << " s" << s;
  out << "  wins\n";
  for (const auto& pair : ablation.at("pairs")) {
    const std::string name = pair.at("agent").get<std::string>() + " - " + pair.at("baseline").get<std::string>();
    for (const auto& [env, row] : pair.at("envs").items()) {
      char head[64];
      std::snprintf(head, sizeof(head), "%-17s %-17s", name.c_str(), env.c_str());
      out << head;
      for (const auto& d : row.at("deltas")) {
        const std::string label = " s" + std::to_string(d.at("seed").get<std::uint64_t>());
        out << std::string(label.size() - 1, ' ') << d.at("sign").get<std::string>();
      }
      out << "  " << row.at("wins").get<std::int64_t>() << "/" << row.at("seeds").get<std::int64_t>() << "\n";
    }
  }
  return out.str();
}

std::string cmd_plot(const std::string& report_path, const std::string& svg_path) {
  nlohmann::ordered_json report;
  try {
    report = nlohmann::ordered_json::parse(read_file(report_path));
  } catch (const nlohmann::json::exception& e) {
    throw HarnessError("malformed report '" + report_path + "': " + e.what());
  }
  const std::string svg = render_svg(agent_reports_from_json(report));
  if (!svg_path.empty()) write_file(svg_path, svg);
  return svg;
}

}  // namespace vsop3d
