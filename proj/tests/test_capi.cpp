#include <cstring>
#include <filesystem>
#include <string>

#include "adapterlab/adapterlab.h"
#include "doctest.h"
#include "support/temp_dir.hpp"

using adapterlab::testing::read_file;
using adapterlab::testing::TempDir;
using adapterlab::testing::write_file;
namespace fs = std::filesystem;

namespace {

struct Session {
  adapterlab_session* s = adapterlab_session_new();
  ~Session() { adapterlab_session_free(s); }
};

const char* kSpec =
    R"({"seed": 5, "families": [{"name": "north", "stem_count": 40}, {"name": "south", "stem_count": 40}],
        "unlabeled_sentences": 60, "train_size": 40, "dev_size": 10, "test_size": 30})";

void small(adapterlab_session* s) {
  for (const char* o : {"model.d_model=16", "model.ffn_dim=16", "model.n_layers=1", "bottleneck.dimension=4",
                        "train.max_steps=8", "la_train.max_steps=8"}) {
    REQUIRE(adapterlab_add_override(s, o) == ADAPTERLAB_OK);
  }
}

}  // namespace

TEST_CASE("status names and null handles") {
  CHECK(std::string(adapterlab_status_name(ADAPTERLAB_ERR_CHECKPOINT)) == "checkpoint error");
  CHECK(std::strlen(adapterlab_version()) > 0);
  CHECK(adapterlab_train_la(nullptr, "x") == ADAPTERLAB_ERR_INTERNAL);
  CHECK(adapterlab_adapter_param_count(nullptr) == 0);
  adapterlab_session_free(nullptr);
  adapterlab_adapter_free(nullptr);
  Session s;
  CHECK(adapterlab_set_jobs(s.s, 0) == ADAPTERLAB_ERR_CONFIG);
  CHECK(std::string(adapterlab_last_error(s.s)).find("jobs") != std::string::npos);
  CHECK(adapterlab_set_jobs(s.s, 2) == ADAPTERLAB_OK);
  CHECK(std::string(adapterlab_last_error(s.s)).empty());
  CHECK(adapterlab_train_la(s.s, nullptr) == ADAPTERLAB_ERR_CONFIG);
  CHECK(adapterlab_eval(s.s, "x.json", static_cast<adapterlab_track>(7)) == ADAPTERLAB_ERR_CONFIG);
}

TEST_CASE("pipeline through the C interface") {
  TempDir tmp;
  Session s;
  write_file(tmp.path() / "spec.json", kSpec);
  const std::string data = (tmp.path() / "data").string();
  REQUIRE(adapterlab_synth(s.s, (tmp.path() / "spec.json").c_str(), data.c_str()) == ADAPTERLAB_OK);
  const std::string config = data + "/experiment.json";
  small(s.s);
  REQUIRE(adapterlab_check_config(s.s, config.c_str()) == ADAPTERLAB_OK);
  CHECK(std::string(adapterlab_last_output(s.s)).find("\"d_model\": 16") != std::string::npos);

  CHECK(adapterlab_train_ta(s.s, config.c_str()) == ADAPTERLAB_ERR_CONFIG);  // no language adapters yet
  REQUIRE(adapterlab_train_la(s.s, config.c_str()) == ADAPTERLAB_OK);
  REQUIRE(adapterlab_train_ta(s.s, config.c_str()) == ADAPTERLAB_OK);
  REQUIRE(adapterlab_eval(s.s, config.c_str(), ADAPTERLAB_TRACK_A) == ADAPTERLAB_OK);
  const std::string dir = adapterlab_last_output(s.s);
  CHECK(fs::exists(fs::path(dir) / "reports.jsonl"));
  REQUIRE(adapterlab_report(s.s, dir.c_str()) == ADAPTERLAB_OK);
  CHECK(std::string(adapterlab_last_output(s.s)).rfind("language  SOURCE_LA_TA  TASK_ONLY", 0) == 0);
  CHECK(adapterlab_eval(s.s, config.c_str(), ADAPTERLAB_TRACK_C) == ADAPTERLAB_ERR_CONFIG);  // no targets

  SUBCASE("adapter and model handles") {
    adapterlab_adapter* la = nullptr;
    REQUIRE(adapterlab_adapter_load(s.s, (data + "/runs/la/noa").c_str(), &la) == ADAPTERLAB_OK);
    CHECK(std::string(adapterlab_adapter_tag(la)) == "noa");
    CHECK(std::string(adapterlab_adapter_role(la)) == "language");
    CHECK(adapterlab_adapter_bottleneck(la) == 4);
    CHECK(adapterlab_adapter_param_count(la) == 2 * 16 * 4 + 4 + 16);  // one layer

    adapterlab_model* m = nullptr;
    REQUIRE(adapterlab_model_load(s.s, (data + "/runs/base/model").c_str(), &m) == ADAPTERLAB_OK);
    CHECK(adapterlab_model_d_model(m) == 16);
    CHECK(adapterlab_model_base_params(m) > 0);
    CHECK(adapterlab_model_check_adapter(s.s, m, la) == ADAPTERLAB_OK);

    const std::string copy = (tmp.path() / "copy").string();
    REQUIRE(adapterlab_adapter_save(s.s, la, copy.c_str()) == ADAPTERLAB_OK);
    CHECK(read_file(fs::path(copy) / "weights.bin") == read_file(fs::path(data) / "runs/la/noa/weights.bin"));

    // An adapter from a differently shaped model is refused.
    Session other;
    REQUIRE(adapterlab_add_override(other.s, "model.d_model=8") == ADAPTERLAB_OK);
    REQUIRE(adapterlab_add_override(other.s, "model.ffn_dim=8") == ADAPTERLAB_OK);
    REQUIRE(adapterlab_add_override(other.s, "bottleneck.dimension=2") == ADAPTERLAB_OK);
    REQUIRE(adapterlab_add_override(other.s, "la_train.max_steps=2") == ADAPTERLAB_OK);
    REQUIRE(adapterlab_add_override(other.s, "output_dir=other") == ADAPTERLAB_OK);
    REQUIRE(adapterlab_train_la(other.s, config.c_str()) == ADAPTERLAB_OK);
    adapterlab_adapter* small_la = nullptr;
    REQUIRE(adapterlab_adapter_load(s.s, (data + "/other/la/noa").c_str(), &small_la) == ADAPTERLAB_OK);
    CHECK(adapterlab_model_check_adapter(s.s, m, small_la) == ADAPTERLAB_ERR_CHECKPOINT);
    CHECK(std::strlen(adapterlab_last_error(s.s)) > 0);

    CHECK(adapterlab_adapter_load(s.s, (tmp.path() / "missing").c_str(), &la) == ADAPTERLAB_ERR_CHECKPOINT);
    adapterlab_adapter_free(small_la);
    adapterlab_adapter_free(la);
    adapterlab_model_free(m);
  }
}
