// Command-line entry point: train, aggregate, selfcheck, ablate, plot.

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vsop3d/cli/config.hpp"
#include "vsop3d/cli/harness.hpp"
#include "vsop3d/cli/selfcheck.hpp"

namespace {

using nlohmann::ordered_json;

int fail(const std::string& kind, const std::string& message, const std::vector<std::string>& problems = {}) {
  ordered_json err;
  err["error"] = kind;
  err["message"] = message;
  if (!problems.empty()) err["problems"] = problems;
  std::cerr << err.dump() << "\n";
  return 1;
}

struct ConfigFlags {
  std::string config_path;
  std::string preset;
  std::vector<std::string> sets;
  std::string seeds;
  std::string output;
  bool resume = false;
  std::int64_t workers = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "YAML run configuration")->required()->check(CLI::ExistingFile);
    cmd->add_option("--preset", preset, "Agent preset (ppo, ppo3d, vsop, vsop3d, vsop3d_plus)");
    cmd->add_option("--set", sets, "Override a config field, e.g. --set total_steps=20000 (repeatable)");
    cmd->add_option("--seeds", seeds, "Comma-separated seed list");
    cmd->add_option("--output", output, "Output directory");
    cmd->add_flag("--resume", resume, "Continue unfinished runs from their checkpoints");
    cmd->add_option("--workers", workers, "Parallel runs");
  }

  vsop3d::RunConfig load() const {
    std::map<std::string, std::string> overrides;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw CLI::ValidationError("--set", "expected key=value, got '" + s + "'");
      overrides[s.substr(0, eq)] = s.substr(eq + 1);
    }
    if (!preset.empty()) overrides["preset"] = preset;
    if (!seeds.empty()) overrides["seeds"] = "[" + seeds + "]";
    if (!output.empty()) overrides["output_dir"] = output;
    if (workers > 0) overrides["workers"] = std::to_string(workers);
    return vsop3d::load_run_config(config_path, overrides);
  }
};

void stderr_log(const std::string& line) { std::cerr << line << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale frame-stacking and 3D-convolution RL experiments"};
  app.require_subcommand(1);

  ConfigFlags train_flags;
  auto* train = app.add_subcommand("train", "Train every (env, seed) pair of a config");
  train_flags.attach(train);

  std::vector<std::string> run_dirs;
  vsop3d::AggregateOptions agg;
  bool joint = false;
  auto* aggregate = app.add_subcommand("aggregate", "Aggregate metrics and figure from run directories");
  aggregate->add_option("run_dirs", run_dirs, "Completed run directories")->required();
  aggregate->add_option("--output", agg.output_dir, "Directory for report.json and figure.svg")->required();
  aggregate->add_option("--window", agg.window, "Final-score window (default: from each run's config)");
  aggregate->add_option("--resamples", agg.resamples, "Bootstrap resamples")->check(CLI::Range(100, 10000000));
  aggregate->add_option("--confidence", agg.confidence, "Interval confidence")->check(CLI::Range(0.0, 1.0));
  aggregate->add_option("--seed", agg.seed, "Bootstrap seed");
  aggregate->add_flag("--joint", joint, "Resample whole seed rows instead of seeds within each environment");
  aggregate->add_option("--baseline", agg.baseline, "Label that comparisons are made against");

  std::string selfcheck_out;
  auto* selfcheck = app.add_subcommand("selfcheck", "Run the fast oracle suites");
  selfcheck->add_option("--output", selfcheck_out, "Also write the JSON report here");

  ConfigFlags ablate_flags;
  std::int64_t budget = -1;
  auto* ablate = app.add_subcommand("ablate", "PPO / PPO-3D / VSOP / VSOP-3D paired comparison");
  ablate_flags.attach(ablate);
  ablate->add_option("--budget", budget, "Environment steps per run (default: total_steps)");

  std::string report_path, svg_path;
  auto* plot = app.add_subcommand("plot", "Render figure.svg from a report.json");
  plot->add_option("--report", report_path, "report.json from aggregate")->required()->check(CLI::ExistingFile);
  plot->add_option("--output", svg_path, "SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    if (*train) {
      const auto config = train_flags.load();
      const auto manifest = vsop3d::cmd_train(config, {train_flags.resume, stderr_log});
      std::int64_t failed = 0;
      for (const auto& r : manifest.runs) failed += r.status != vsop3d::RunStatus::kDone;
      std::cout << config.output_dir << "\n";
      if (failed > 0) return fail("train", std::to_string(failed) + " run(s) failed; see manifest.json");
    } else if (*aggregate) {
      agg.mode = joint ? vsop3d::BootstrapMode::kJoint : vsop3d::BootstrapMode::kStratified;
      agg.log = stderr_log;
      const auto result = vsop3d::cmd_aggregate(run_dirs, agg);
      std::cout << result.report.dump(2) << "\n";
    } else if (*selfcheck) {
      const auto report = vsop3d::run_selfcheck();
      const std::string text = report.to_json().dump(2) + "\n";
      if (!selfcheck_out.empty()) vsop3d::write_file(selfcheck_out, text);
      std::cout << text;
      if (!report.passed) {
        std::vector<std::string> problems;
        for (const auto& c : report.checks) {
          if (!c.passed) problems.push_back(c.op + ": " + c.detail);
        }
        return fail("selfcheck", "self-check failed", problems);
      }
    } else if (*ablate) {
      const auto config = ablate_flags.load();
      vsop3d::AblationOptions opts;
      opts.budget = budget;
      opts.resume = ablate_flags.resume;
      opts.log = stderr_log;
      const auto report = vsop3d::cmd_ablation_ppo3d(config, opts);
      std::cout << vsop3d::sign_table(report);
    } else if (*plot) {
      vsop3d::cmd_plot(report_path, svg_path);
      std::cout << svg_path << "\n";
    }
  } catch (const vsop3d::ConfigValidationError& e) {
    return fail("config", e.what(), e.problems());
  } catch (const std::exception& e) {
    return fail("runtime", e.what());
  }
  return 0;
}
