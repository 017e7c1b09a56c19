// wheezelab CLI: prepare / run / audit / all over a single experiment config.
// Exit code 0 on success; nonzero with a JSON error summary on stderr.
#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "wheezelab/experiment/config.hpp"
#include "wheezelab/experiment/pipeline.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::string mode;
  std::string family;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::string out;
};

wheezelab::ExperimentConfig resolve_config(const Overrides& o) {
  auto cfg = wheezelab::load_experiment_config(o.config_path);
  if (!o.mode.empty()) cfg.modes = {wheezelab::duration_mode_from_string(o.mode)};
  if (!o.family.empty()) cfg.families = {wheezelab::model_family_from_string(o.family)};
  if (o.seed) cfg.base_seed = *o.seed;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (!o.out.empty()) cfg.output_dir = o.out;
  return cfg;
}

void add_common_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "experiment config file")->required();
  cmd->add_option("--mode", o.mode, "restrict to one event mode (fd|vd)");
  cmd->add_option("--family", o.family,
                  "restrict to one model family (baseline|lda|svm_linear|svm_rbf|boost|cnn)");
  cmd->add_option("--seed", o.seed, "override events.base_seed");
  cmd->add_option("--jobs", o.jobs, "worker threads (0 = all cores)");
  cmd->add_option("--out", o.out, "override output.dir");
}

int run_prepare(const wheezelab::ExperimentConfig& cfg) {
  const auto result = wheezelab::cmd_prepare(cfg);
  std::cout << "prepared " << result.recordings << " recordings, "
            << result.wheeze_events << " wheeze events";
  for (const auto& [mode, count] : result.random_events) {
    std::cout << ", " << count << " random events (" << mode << ")";
  }
  std::cout << "\n";
  if (!result.warnings.empty()) {
    std::cout << result.warnings.size() << " warnings (see prepare_warnings.txt)\n";
  }
  return 0;
}

int run_run(const wheezelab::ExperimentConfig& cfg) {
  const auto summary = wheezelab::cmd_run(cfg);
  std::cout << "runs completed: " << summary.completed << ", skipped (already done): "
            << summary.skipped << ", failed: " << summary.failures.size() << "\n";
  if (!summary.failures.empty()) {
    nlohmann::json err = {{"error", "partial run failure"},
                          {"failed_runs", summary.failures}};
    std::cerr << err.dump(2) << "\n";
    return 2;
  }
  return 0;
}

int run_audit(const wheezelab::ExperimentConfig& cfg) {
  const auto result = wheezelab::cmd_audit(cfg);
  std::cout << "report written to " << result.report_json.string() << "\n";
  if (result.report.contains("mcc_gap_fd_minus_vd")) {
    for (const auto& [family, gap] : result.report["mcc_gap_fd_minus_vd"].items()) {
      std::cout << "  mcc gap (fd - vd) " << family << ": " << gap.get<double>() << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wheeze-vs-random event classification experiments"};
  app.require_subcommand(1);

  Overrides o;
  auto* prepare = app.add_subcommand("prepare", "generate events and extract features");
  auto* run = app.add_subcommand("run", "search, train and evaluate all configured runs");
  auto* audit = app.add_subcommand("audit", "aggregate the bias report from finished runs");
  auto* all = app.add_subcommand("all", "prepare, run and audit in sequence");
  for (auto* cmd : {prepare, run, audit, all}) add_common_flags(cmd, o);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve_config(o);
    if (prepare->parsed()) return run_prepare(cfg);
    if (run->parsed()) return run_run(cfg);
    if (audit->parsed()) return run_audit(cfg);
    const int rc_prepare = run_prepare(cfg);
    if (rc_prepare != 0) return rc_prepare;
    const int rc_run = run_run(cfg);
    if (rc_run != 0) return rc_run;
    return run_audit(cfg);
  } catch (const std::exception& e) {
    nlohmann::json err = {{"error", e.what()}};
    std::cerr << err.dump(2) << "\n";
    return 1;
  }
}
