#include <gtest/gtest.h>

#include <fstream>

#include "sdg/core/text.hpp"
#include "sdg/error.hpp"
#include "sdg/parallel/ledger.hpp"
#include "test_support.hpp"

using namespace sdg::parallel;

namespace {

LedgerHeader header(std::size_t count = 5) { return {make_run_id("job", "step", count), count, "job", "step"}; }

sdg::Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const sdg::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected sdg::Error";
  return sdg::Errc::NotFound;
}

void append_raw(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::app | std::ios::binary);
  out << s;
}

}  // namespace

TEST(Ledger, RunIdBindsJobStepAndCount) {
  EXPECT_EQ(make_run_id("j", "s", 3), make_run_id("j", "s", 3));
  EXPECT_NE(make_run_id("j", "s", 3), make_run_id("j", "s", 4));
  EXPECT_NE(make_run_id("j", "s", 3), make_run_id("j", "t", 3));
  EXPECT_NE(make_run_id("j", "s", 3), make_run_id("k", "s", 3));
  EXPECT_EQ(ledger_path("/cp", "abc"), fs::path("/cp/abc.ledger.jsonl"));
}

TEST(Ledger, AppendAndRead) {
  sdg::testing::TempDir dir;
  const auto p = dir / "l.jsonl";
  {
    CheckpointLedger l(p, header(), 1);
    l.append({0, EntryStatus::Done, 1, {{"v", 0}}, {}});
    l.append({3, EntryStatus::Failed, 3, nullptr, "boom"});
  }
  auto c = read_ledger(p);
  EXPECT_EQ(c.header.run_id, header().run_id);
  EXPECT_EQ(c.header.count, 5u);
  ASSERT_EQ(c.entries.size(), 2u);
  EXPECT_EQ(c.entries.at(0).result, (sdg::json{{"v", 0}}));
  EXPECT_EQ(c.entries.at(3).status, EntryStatus::Failed);
  EXPECT_EQ(c.entries.at(3).error, "boom");
  EXPECT_FALSE(c.torn_tail);
}

TEST(Ledger, ResumeKeepsDoneDropsFailed) {
  sdg::testing::TempDir dir;
  const auto p = dir / "l.jsonl";
  {
    CheckpointLedger l(p, header(), 20);
    l.append({1, EntryStatus::Done, 1, 11, {}});
    l.append({2, EntryStatus::Failed, 3, nullptr, "x"});
  }
  CheckpointLedger again(p, header(), 20);
  ASSERT_EQ(again.resumed().size(), 1u);
  EXPECT_EQ(again.resumed().at(1).result, 11);
  // Compaction removed the failed record so it can be re-appended once.
  again.append({2, EntryStatus::Done, 1, 22, {}});
  again.sync();
  auto c = read_ledger(p);
  EXPECT_EQ(c.entries.size(), 2u);
  EXPECT_EQ(c.entries.at(2).result, 22);
}

TEST(Ledger, TornTailIsIgnoredAndRepaired) {
  sdg::testing::TempDir dir;
  const auto p = dir / "l.jsonl";
  {
    CheckpointLedger l(p, header(), 20);
    l.append({0, EntryStatus::Done, 1, "a", {}});
  }
  append_raw(p, R"({"type":"entry","index":1,"status":"do)");
  auto c = read_ledger(p);
  EXPECT_TRUE(c.torn_tail);
  EXPECT_EQ(c.entries.size(), 1u);
  CheckpointLedger resumed(p, header(), 20);
  EXPECT_EQ(resumed.resumed().size(), 1u);
  EXPECT_FALSE(read_ledger(p).torn_tail);
}

TEST(Ledger, CorruptionIsRejected) {
  sdg::testing::TempDir dir;
  auto fresh = [&](const std::string& name) {
    const auto p = dir / name;
    CheckpointLedger l(p, header(), 20);
    return p;
  };
  auto garbage = fresh("g.jsonl");
  append_raw(garbage, "not json\n");
  EXPECT_EQ(code_of([&] { read_ledger(garbage); }), sdg::Errc::CheckpointCorrupt);

  auto dup = fresh("d.jsonl");
  append_raw(dup, R"({"type":"entry","index":1,"status":"done","attempts":1,"result":1})" "\n");
  append_raw(dup, R"({"type":"entry","index":1,"status":"done","attempts":1,"result":1})" "\n");
  EXPECT_EQ(code_of([&] { read_ledger(dup); }), sdg::Errc::CheckpointCorrupt);

  auto range = fresh("r.jsonl");
  append_raw(range, R"({"type":"entry","index":5,"status":"done","attempts":1,"result":1})" "\n");
  EXPECT_EQ(code_of([&] { read_ledger(range); }), sdg::Errc::CheckpointCorrupt);
  EXPECT_EQ(code_of([&] { CheckpointLedger l(range, header(), 20); }), sdg::Errc::CheckpointCorrupt);
}

TEST(Ledger, MismatchedHeaderRefusesToResume) {
  sdg::testing::TempDir dir;
  const auto p = dir / "l.jsonl";
  { CheckpointLedger l(p, header(5), 20); }
  EXPECT_EQ(code_of([&] { CheckpointLedger l(p, header(6), 20); }), sdg::Errc::RunIdMismatch);
}

TEST(Ledger, FlushIntervalFromEnvironment) {
  ::setenv("SDG_FLUSH_INTERVAL", "7", 1);
  EXPECT_EQ(default_flush_interval(), 7u);
  ::setenv("SDG_FLUSH_INTERVAL", "nonsense", 1);
  EXPECT_EQ(default_flush_interval(), 20u);
  ::unsetenv("SDG_FLUSH_INTERVAL");
  EXPECT_EQ(default_flush_interval(), 20u);
}
