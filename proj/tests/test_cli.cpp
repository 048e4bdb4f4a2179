#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "support/temp_dir.hpp"

using adapterlab::testing::read_file;
using adapterlab::testing::TempDir;
using adapterlab::testing::write_file;
namespace fs = std::filesystem;

namespace {

const std::string kSmall =
    " -q --set model.d_model=16 model.ffn_dim=16 model.n_layers=1 bottleneck.dimension=4 train.max_steps=8"
    " la_train.max_steps=8";

// Exit status of `adapterlab <args>`, output to `log`.
int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(ADAPTERLAB_CLI) + " " + args + " > '" + log.string() + "' 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

}  // namespace

TEST_CASE("command-line pipeline, guards and exit codes") {
  TempDir tmp;
  const fs::path log = tmp.path() / "log.txt";
  const std::string d = (tmp.path() / "data").string();
  write_file(tmp.path() / "spec.json",
             R"({"seed": 2, "families": [{"name": "north", "stem_count": 40}, {"name": "south", "stem_count": 40}],
                 "unlabeled_sentences": 60, "train_size": 40, "dev_size": 10, "test_size": 30})");
  const std::string spec = (tmp.path() / "spec.json").string();
  REQUIRE(run("synth --config " + spec + " --out " + d, log) == 0);
  const std::string cfg = " --config " + d + "/experiment.json";

  CHECK(run("train-la" + cfg + kSmall + " --jobs 2", log) == 0);
  CHECK(run("train-ta" + cfg + kSmall, log) == 0);
  CHECK(run("eval" + cfg + kSmall, log) == 0);
  const std::string table = read_file(log);
  CHECK(table.find("language  SOURCE_LA_TA  TASK_ONLY") != std::string::npos);
  CHECK(run("report " + d + "/runs/eval/track_a", log) == 0);
  CHECK(read_file(log) == read_file(fs::path(d) / "runs/eval/track_a/table.txt"));

  SUBCASE("protocol guards") {
    CHECK(run("train-ta" + cfg + kSmall + " data_paths.nob.train=nob/dev.csv", log) == 2);
    CHECK(read_file(log).find("development set") != std::string::npos);
    CHECK(run("train-la" + cfg + kSmall + " data_paths.soa.unlabeled=soa/dev.csv", log) == 2);

    // Track C on noa, which trained every task adapter here.
    std::string text = read_file(fs::path(d) / "experiment.json");
    text.replace(text.find("\"targets\": []"), 13, "\"targets\": [\"noa\"]");
    write_file(fs::path(d) / "experiment_c.json", text);
    const std::string cc = " --config " + d + "/experiment_c.json";
    CHECK(run("eval" + cc + kSmall + " --track C", log) == 2);
    CHECK(read_file(log).find("--allow-source") != std::string::npos);
    CHECK(run("eval" + cc + kSmall + " --track C --allow-source", log) == 0);
  }
  SUBCASE("exit codes by failure class") {
    CHECK(run("train-la", log) == 2);                          // usage
    CHECK(run("train-la --config /nonexistent.json", log) == 2);  // usage
    CHECK(run("synth --out " + (tmp.path() / "spec.json/x").string(), log) == 2);
    CHECK(run("report " + tmp.path().string(), log) == 3);
    fs::remove(fs::path(d) / "nob" / "test.csv");
    CHECK(run("eval" + cfg + kSmall, log) == 3);
    CHECK(run("eval" + cfg + kSmall + " model.n_heads=4", log) == 4);
    CHECK(run("check" + cfg + " --set targets=noa", log) == 2);  // lists are not scalar fields
    CHECK(run("--version", log) == 0);
  }
  SUBCASE("seed override") {
    CHECK(run("check" + cfg + " --seed 42", log) == 0);
    CHECK(read_file(log).find("\"seed\": 42") != std::string::npos);
  }
}
