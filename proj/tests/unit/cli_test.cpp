#include <gtest/gtest.h>

#include "sdg/core/sample.hpp"
#include "sdg/core/text.hpp"
#include "test_support.hpp"

using namespace sdg;
using sdg::testing::ProcessResult;

namespace {

const std::map<std::string, std::string> kMockEnv{{"SDG_MOCK_LLM", "1"}};

ProcessResult sdg_cli(const std::vector<std::string>& args, std::map<std::string, std::string> env = kMockEnv) {
  std::vector<std::string> argv{sdg::testing::tool_path().string(), "-q"};
  argv.insert(argv.end(), args.begin(), args.end());
  return sdg::testing::run_process(argv, env);
}

std::string write_json(const fs::path& p, const json& j) { return sdg::testing::write_text(p, j.dump(2)); }

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(sdg_cli({}).exit_code, 1);
  EXPECT_EQ(sdg_cli({"frobnicate"}).exit_code, 1);
  EXPECT_EQ(sdg_cli({"--help"}).exit_code, 0);
}

TEST(Cli, ValidateReportsEveryIssue) {
  sdg::testing::TempDir dir;
  auto good = write_json(dir / "good.json", sdg::testing::local_config_json(dir / "out", 5));
  auto r = sdg_cli({"validate", good});
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(r.out, "ok\n");

  auto cfg = sdg::testing::local_config_json(dir / "out", 5);
  cfg["task"]["colour"] = "blue";
  cfg["parallel"]["n_workers"] = "many";
  auto bad = sdg_cli({"validate", write_json(dir / "bad.json", cfg)});
  EXPECT_EQ(bad.exit_code, 1);
  EXPECT_NE(bad.err.find("task.colour"), std::string::npos);
  EXPECT_NE(bad.err.find("parallel.n_workers"), std::string::npos);
  EXPECT_EQ(sdg_cli({"validate", (dir / "missing.yaml").string()}).exit_code, 1);
  EXPECT_EQ(sdg_cli({"generate", (dir / "missing.yaml").string()}).exit_code, 1);
}

TEST(Cli, GenerateLocalWritesDataAndSummary) {
  sdg::testing::TempDir dir;
  auto cfg = write_json(dir / "local.json", sdg::testing::local_config_json(dir / "out", 20));
  auto r = sdg_cli({"generate", cfg});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  auto summary = json::parse(r.out);
  EXPECT_EQ(summary["produced"], 20);
  const auto first = text::read_file(dir / "out" / "data.jsonl");
  EXPECT_EQ(read_jsonl(dir / "out" / "data.jsonl").size(), 20u);

  // A rerun resumes from the checkpoints and reproduces the bytes.
  ASSERT_EQ(sdg_cli({"generate", cfg}).exit_code, 0);
  EXPECT_EQ(text::read_file(dir / "out" / "data.jsonl"), first);
}

TEST(Cli, RuntimeFailureExitsTwoAndNamesTheStep) {
  sdg::testing::TempDir dir;
  auto rules = sdg::testing::write_text(
      dir / "rules.json", R"([{"name": "teacher-down", "pattern": "^ping$", "model": "mock-teacher", "fail": "transport"}])");
  auto cfg = write_json(dir / "distill.json", sdg::testing::distill_config_json(dir / "out", 5));
  auto env = kMockEnv;
  env["SDG_MOCK_RULES"] = rules;
  auto r = sdg_cli({"generate", cfg}, env);
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("prepare"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("TeacherUnreachable"), std::string::npos) << r.err;
}

TEST(Cli, TrainWithNoOpTrainer) {
  sdg::testing::TempDir dir;
  sdg::testing::write_text(dir / "learnable.jsonl",
                      "{\"input\":\"q1\",\"output\":\"a1\",\"metadata\":{\"source\":\"local\",\"task_id\":\"t\"}}\n"
                      "{\"input\":\"q2\",\"output\":\"a2\",\"metadata\":{\"source\":\"local\",\"task_id\":\"t\"}}\n");
  json train{{"train",
              {{"method", "sft"},
               {"data", (dir / "learnable.jsonl").string()},
               {"output_dir", (dir / "export").string()},
               {"trainer_cmd", "true {data}"}}}};
  auto ok = sdg_cli({"train", write_json(dir / "train.json", train)});
  ASSERT_EQ(ok.exit_code, 0) << ok.err;
  EXPECT_EQ(json::parse(ok.out)["count"], 2);
  EXPECT_TRUE(fs::exists(dir / "export" / "train.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "export" / "manifest.json"));

  train["train"]["trainer_cmd"] = "echo failing; exit 4 # {data}";
  auto fail = sdg_cli({"train", write_json(dir / "train2.json", train)});
  EXPECT_EQ(fail.exit_code, 2);
  EXPECT_NE(fail.err.find("status 4"), std::string::npos) << fail.err;

  train["train"]["trainer_cmd"] = "true";
  EXPECT_EQ(sdg_cli({"train", write_json(dir / "train3.json", train)}).exit_code, 1);
}

TEST(Cli, EvalAggregatesEqualScriptedMeans) {
  sdg::testing::TempDir dir;
  const std::vector<std::pair<std::string, int>> items{{"ITEM-A", 5}, {"ITEM-B", 2}, {"ITEM-C", 4}};
  json rules = json::array();
  std::string data;
  for (const auto& [tag, score] : items) {
    rules.push_back({{"pattern", "Evaluate the candidate response[\\s\\S]*" + tag},
                     {"response", "ok <score>" + std::to_string(score) + "</score>"}});
    data += json{{"input", "Question " + tag}, {"output", "ref"}, {"metadata", {{"source", "local"}, {"task_id", "t"}}}}
                .dump() +
            "\n";
  }
  sdg::testing::write_text(dir / "eval.jsonl", data);
  auto env = kMockEnv;
  env["SDG_MOCK_RULES"] = write_json(dir / "rules.json", rules);
  json eval{{"eval",
             {{"dataset", (dir / "eval.jsonl").string()},
              {"model", {{"base_url", "http://mock.local/v1"}, {"model", "student"}}},
              {"judge", {{"base_url", "http://mock.local/v1"}, {"model", "judge"}}},
              {"output_dir", (dir / "eval").string()}}}};
  auto r = sdg_cli({"eval", write_json(dir / "eval.json", eval)}, env);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  auto report = json::parse(text::read_file(dir / "eval" / "eval_report.json"));
  const double expected = ((5 - 1) / 4.0 + (2 - 1) / 4.0 + (4 - 1) / 4.0) / 3.0;
  EXPECT_EQ(report["items"], 3);
  EXPECT_EQ(report["metrics"]["answer_correctness"]["aggregate"].get<double>(), expected);
  EXPECT_EQ(report["metrics"]["format_compliance"]["aggregate"].get<double>(), expected);
}
