// adapterlab synth|train-la|train-ta|eval|report|check

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adapterlab/adapterlab.h"

namespace {

struct SessionDeleter {
  void operator()(adapterlab_session* s) const { adapterlab_session_free(s); }
};

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
  auto* opt = cmd->add_option("--config", c.config, "Experiment config (JSON)");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Override the config seed");
  cmd->add_option("--set", c.sets, "Override a scalar config field: dotted.key=value")->take_all();
  cmd->add_option("--jobs", c.jobs, "Worker processes for independent units")->check(CLI::PositiveNumber);
  cmd->add_flag("-q,--quiet", c.quiet, "No progress lines");
}

int fail(adapterlab_session* s, int status) {
  std::fprintf(stderr, "adapterlab: %s: %s\n", adapterlab_status_name(status), adapterlab_last_error(s));
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adapter experiments: synthetic corpora, language and task adapters, evaluation"};
  app.set_version_flag("--version", std::string(adapterlab_version()));
  app.require_subcommand(1);

  Common common;
  std::string out_dir;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic multilingual corpus");
  add_common(synth, common, false);
  synth->add_option("--out", out_dir, "Output directory")->required();

  auto* train_la = app.add_subcommand("train-la", "Train one language adapter per unlabeled corpus");
  add_common(train_la, common, true);

  auto* train_ta = app.add_subcommand("train-ta", "Train one task adapter per regime");
  add_common(train_ta, common, true);

  std::string track = "A";
  bool allow_source = false;
  auto* eval = app.add_subcommand("eval", "Score task adapters on test sets");
  add_common(eval, common, true);
  eval->add_option("--track", track, "A: in-language; C: held-out target languages")
      ->check(CLI::IsMember({"A", "C", "a", "c"}));
  eval->add_flag("--allow-source", allow_source, "Also score languages that trained the task adapter (Track C)");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Render reports.jsonl as a language by regime table");
  report->add_option("dir,--dir", report_dir, "Directory holding reports.jsonl")->required();

  auto* check = app.add_subcommand("check", "Validate a config and print it fully resolved");
  add_common(check, common, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Usage errors are configuration errors.
    const int code = app.exit(e);
    return code == 0 ? 0 : ADAPTERLAB_ERR_CONFIG;
  }

  std::unique_ptr<adapterlab_session, SessionDeleter> owner(adapterlab_session_new());
  adapterlab_session* s = owner.get();
  if (!s) return ADAPTERLAB_ERR_INTERNAL;

  CLI::App* used = app.get_subcommands().front();
  if (used != report && used->count("--seed")) adapterlab_set_seed(s, common.seed);
  adapterlab_set_jobs(s, common.jobs);
  adapterlab_set_progress(s, !common.quiet);
  for (const auto& a : common.sets) {
    if (int st = adapterlab_add_override(s, a.c_str())) return fail(s, st);
  }

  int st = ADAPTERLAB_OK;
  if (used == synth) {
    st = adapterlab_synth(s, common.config.empty() ? nullptr : common.config.c_str(), out_dir.c_str());
  } else if (used == train_la) {
    st = adapterlab_train_la(s, common.config.c_str());
  } else if (used == train_ta) {
    st = adapterlab_train_ta(s, common.config.c_str());
  } else if (used == eval) {
    adapterlab_set_allow_source(s, allow_source);
    const bool c = track == "C" || track == "c";
    st = adapterlab_eval(s, common.config.c_str(), c ? ADAPTERLAB_TRACK_C : ADAPTERLAB_TRACK_A);
    if (st == ADAPTERLAB_OK) {
      const std::string dir = adapterlab_last_output(s);
      st = adapterlab_report(s, dir.c_str());
      if (st == ADAPTERLAB_OK) std::printf("%s\nreports in %s\n", adapterlab_last_output(s), dir.c_str());
    }
  } else if (used == report) {
    st = adapterlab_report(s, report_dir.c_str());
    if (st == ADAPTERLAB_OK) std::fputs(adapterlab_last_output(s), stdout);
  } else if (used == check) {
    st = adapterlab_check_config(s, common.config.c_str());
    if (st == ADAPTERLAB_OK) std::fputs(adapterlab_last_output(s), stdout);
  }
  return st == ADAPTERLAB_OK ? 0 : fail(s, st);
}
