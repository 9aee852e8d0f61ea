#include <gtest/gtest.h>

#include <sstream>

#include "probo/cli.hpp"
#include "support/test_support.hpp"

using namespace probo;
using namespace probo::cli;
using namespace probo::testing;

namespace {

const std::string kProponent = "0000-0002-1825-0097";

struct Workspace {
  TempDir dir;
  Paths paths{dir.file("probo.chain.jsonl"), dir.file("probo.bank.json")};
  std::ostringstream out, err;

  int init(InitOptions opts, Timestamp now = 1000) {
    reset();
    return cmd_init(paths, Clock{now}, opts, out, err);
  }
  int init_default() {
    InitOptions o;
    o.nodes = {kProponent, "v1", "v2", "v3", "v4"};
    o.equal = 100;
    return init(o);
  }
  int submit(const std::string& descriptor, std::optional<Probos> deposit = {}, Timestamp now = 1010) {
    reset();
    return cmd_submit(paths, Clock{now}, descriptor, data_path("box1.outputs.json"), deposit, out, err);
  }
  int verify(const std::string& verifier, const std::string& outputs, Timestamp now = 1020,
             const std::string& id = "sclc-ct-rnaseq-001") {
    reset();
    return cmd_verify(paths, Clock{now}, id, verifier, outputs, out, err);
  }
  int tick(Timestamp now) {
    reset();
    return cmd_tick(paths, now, out, err);
  }
  int inspect(InspectSelector sel = {}) {
    reset();
    return cmd_inspect(paths, sel, out, err);
  }
  int rank(ReputationWeights w = {}, bool institutions = false) {
    reset();
    return cmd_rank(paths, w, institutions, out, err);
  }
  void reset() {
    out.str("");
    err.str("");
  }
  BankState bank() const { return read_json_file(paths.bank).get<BankState>(); }
  Chain chain() const { return load_chain(paths.chain); }
  std::string snapshot() const {
    return read_text(paths.chain) + "\x1f" + read_text(paths.bank) + "\x1f" + read_text(paths.pending());
  }
  std::string write(const std::string& name, const Json& j) const {
    const std::string path = dir.file(name);
    std::ofstream(path) << j.dump(2);
    return path;
  }
};

const std::string kMatch = data_path("box1.verifier-match.json");
const std::string kMismatch = data_path("box1.verifier-mismatch.json");
const std::string kDescriptor = data_path("box1.descriptor.json");

}  // namespace

TEST(CmdInit, EqualAllocation) {
  Workspace w;
  InitOptions o;
  o.nodes = {"a", "b", "c"};
  o.equal = 100;
  ASSERT_EQ(w.init(o), kOk) << w.err.str();
  EXPECT_EQ(w.chain().size(), 1u);
  EXPECT_EQ(w.out.str(), "genesis " + w.chain().tip().block_hash.hex() + "\n");
  const BankState bank = w.bank();
  EXPECT_EQ(bank.accounts().size(), 3u);
  for (const char* id : {"a", "b", "c"}) EXPECT_EQ(bank.balance(id), 100);
}

TEST(CmdInit, RefusesToOverwriteAndBadAllocation) {
  Workspace w;
  ASSERT_EQ(w.init_default(), kOk);
  const std::string before = w.snapshot();
  EXPECT_EQ(w.init_default(), kEnvFailure);
  EXPECT_EQ(w.snapshot(), before);

  Workspace neg;
  InitOptions o;
  o.nodes = {"a"};
  o.equal = -5;
  EXPECT_EQ(neg.init(o), kEnvFailure);
  EXPECT_FALSE(std::filesystem::exists(neg.paths.chain));

  InitOptions forced;
  forced.nodes = {"x", "y"};
  forced.equal = 7;
  forced.force = true;
  EXPECT_EQ(w.init(forced), kOk);
  EXPECT_EQ(w.bank().total_supply(), 14);
}

TEST(CmdInit, ConfigFileAndOverrides) {
  Workspace w;
  const std::string cfg =
      w.write("net.json", Json{{"economics", {{"min_deposit", 20}, {"verifier_reward", 4},
                                              {"genesis_allocation", {{"a", 50}, {"b", 10}}}}},
                               {"quorum", {{"min_reports", 2}, {"accept_threshold", "1/2"}}},
                               {"horizon_hours", 24}});
  InitOptions o;
  o.config_file = cfg;
  o.verifier_reward = 6;
  ASSERT_EQ(w.init(o), kOk) << w.err.str();
  const GenesisConfig g = w.chain().genesis_config();
  EXPECT_EQ(g.economics.min_deposit, 20);
  EXPECT_EQ(g.economics.verifier_reward, 6);
  EXPECT_EQ(g.quorum.min_reports, 2);
  EXPECT_EQ(g.quorum.accept_threshold, (Rational{1, 2}));
  EXPECT_EQ(g.horizon_hours, 24);
  EXPECT_EQ(w.bank().balance("a"), 50);
  EXPECT_EQ(w.bank().balance("b"), 10);
}

TEST(CmdSubmit, Box1FixtureIsPending) {
  Workspace w;
  ASSERT_EQ(w.init_default(), kOk);
  ASSERT_EQ(w.submit(kDescriptor, 10), kOk) << w.err.str();
  EXPECT_NE(w.out.str().find("request_id sclc-ct-rnaseq-001\n"), std::string::npos);
  EXPECT_NE(w.out.str().find("commitment " + commit_outputs(box1_outputs()).hex()), std::string::npos);
  EXPECT_EQ(w.bank().balance(kProponent), 90);
  const Json pending = read_json_file(w.paths.pending());
  EXPECT_TRUE(pending.at("requests").contains("sclc-ct-rnaseq-001"));
}

TEST(CmdSubmit, ViolationsAndDepositErrorsLeaveFilesUntouched) {
  Workspace w;
  ASSERT_EQ(w.init_default(), kOk);
  const std::string before = w.snapshot();

  Json bad = read_json_file(kDescriptor);
  bad["data_metadata"]["artifacts"][0].erase("content_hash");
  bad["data_metadata"]["artifacts"][2].erase("content_hash");
  EXPECT_EQ(w.submit(w.write("bad.json", bad)), kDomainFailure);
  EXPECT_EQ(w.err.str(), "data_metadata[0]: missing content hash\ndata_metadata[2]: missing content hash\n");
  EXPECT_EQ(w.snapshot(), before);

  EXPECT_EQ(w.submit(kDescriptor, 5), kDomainFailure);
  EXPECT_NE(w.err.str().find("deposit below minimum"), std::string::npos);
  EXPECT_EQ(w.submit(kDescriptor, 500), kDomainFailure);
  EXPECT_NE(w.err.str().find("insufficient funds"), std::string::npos);
  EXPECT_EQ(w.snapshot(), before);

  EXPECT_EQ(w.submit(w.dir.file("missing.json")), kEnvFailure);
  EXPECT_EQ(w.snapshot(), before);
}

TEST(CmdVerify, ThirdMatchAccepts) {
  Workspace w;
  ASSERT_EQ(w.init_default(), kOk);
  ASSERT_EQ(w.submit(kDescriptor, 10), kOk);
  ASSERT_EQ(w.verify("v1", kMatch), kOk);
  EXPECT_EQ(w.out.str(), "Match\n");
  ASSERT_EQ(w.verify("v2", kMatch), kOk);
  ASSERT_EQ(w.verify("v3", kMatch), kOk);
  EXPECT_TRUE(w.out.str().starts_with("Match\nAccepted\nblock 1 "));
  const Chain chain = w.chain();
  ASSERT_EQ(chain.size(), 2u);
  EXPECT_TRUE(std::holds_alternative<AcceptanceRecord>(chain.tip().payload));
  const BankState bank = w.bank();
  EXPECT_EQ(bank.balance(kProponent), 100);
  for (const char* v : {"v1", "v2", "v3"}) EXPECT_EQ(bank.balance(v), 105);
  EXPECT_EQ(bank.total_supply(), 515);
}

TEST(CmdVerify, MismatchesReject) {
  Workspace w;
  ASSERT_EQ(w.init_default(), kOk);
  ASSERT_EQ(w.submit(kDescriptor, 10), kOk);
  for (const char* v : {"v1", "v2", "v3"}) ASSERT_EQ(w.verify(v, kMismatch), kOk);
  EXPECT_TRUE(w.out.str().starts_with("Mismatch\nRejected\n"));
  const BankState bank = w.bank();
  EXPECT_EQ(bank.balance(kProponent), 90);
  EXPECT_EQ(bank.balance("v1"), 104);
  EXPECT_EQ(bank.balance("v2"), 103);
  EXPECT_EQ(bank.balance("v3"), 103);
  EXPECT_EQ(bank.total_supply(), 500);
}

TEST(CmdVerify, Refusals) {
  Workspace w;
  ASSERT_EQ(w.init_default(), kOk);
  ASSERT_EQ(w.submit(kDescriptor, 10), kOk);
  ASSERT_EQ(w.verify("v1", kMatch), kOk);
  const std::string before = w.snapshot();
  EXPECT_EQ(w.verify(kProponent, kMatch), kDomainFailure);
  EXPECT_EQ(w.err.str(), "proponent cannot verify\n");
  EXPECT_EQ(w.verify("v1", kMatch), kDomainFailure);
  EXPECT_EQ(w.verify("v2", kMatch, 1020, "no-such-request"), kDomainFailure);
  EXPECT_EQ(w.verify("ghost", kMatch), kDomainFailure);
  EXPECT_EQ(w.verify("v2", kMatch, 1000), kDomainFailure);  // clock regression
  EXPECT_EQ(w.verify("v2", kMatch, 1010 + 72 * 3600 + 1), kDomainFailure);  // past deadline
  EXPECT_EQ(w.snapshot(), before);
}

TEST(CmdTick, ExpiresOverdueRequests) {
  Workspace w;
  ASSERT_EQ(w.init_default(), kOk);
  ASSERT_EQ(w.tick(2000), kOk);
  EXPECT_EQ(w.out.str(), "0 expired\n");
  ASSERT_EQ(w.submit(kDescriptor, 10, 2000), kOk);
  ASSERT_EQ(w.tick(2000 + 72 * 3600), kOk);
  EXPECT_EQ(w.out.str(), "0 expired\n");
  ASSERT_EQ(w.tick(2001 + 72 * 3600), kOk);
  EXPECT_EQ(w.out.str(), "1 expired\n");
  EXPECT_EQ(w.bank().balance(kProponent), 100);
  ASSERT_EQ(w.chain().size(), 2u);
  EXPECT_TRUE(std::holds_alternative<ExpiryRecord>(w.chain().tip().payload));
  const std::string before = w.snapshot();
  EXPECT_EQ(w.tick(5), kDomainFailure);
  EXPECT_EQ(w.snapshot(), before);
}

TEST(CmdInspect, BlocksAndTamperDetection) {
  Workspace w;
  ASSERT_EQ(w.init_default(), kOk);
  ASSERT_EQ(w.inspect({0, {}}), kOk);
  const Json genesis_block = Json::parse(w.out.str());
  EXPECT_EQ(genesis_block.at("payload").at("type"), "genesis");

  ASSERT_EQ(w.submit(kDescriptor, 10), kOk);
  for (const char* v : {"v1", "v2", "v3"}) ASSERT_EQ(w.verify(v, kMatch), kOk);
  ASSERT_EQ(w.inspect({{}, std::string("sclc-ct-rnaseq-001")}), kOk);
  EXPECT_EQ(Json::parse(w.out.str()).size(), 1u);
  ASSERT_EQ(w.inspect(), kOk);
  EXPECT_EQ(Json::parse(w.out.str()).size(), 2u);

  std::string text = read_text(w.paths.chain);
  const auto pos = text.find("\"etv_hours\":48");
  ASSERT_NE(pos, std::string::npos);
  text[pos + 12] = '9';
  std::ofstream(w.paths.chain, std::ios::trunc) << text;
  EXPECT_EQ(w.inspect(), kDomainFailure);
  EXPECT_EQ(w.err.str(), "invalid at index 1: BadHash\n");

  Workspace empty;
  EXPECT_EQ(empty.inspect(), kEnvFailure);
}

TEST(CmdRank, CsvZeroWeightsAndInvalidChain) {
  Workspace w;
  ASSERT_EQ(w.init_default(), kOk);
  ASSERT_EQ(w.submit(kDescriptor, 10), kOk);
  for (const char* v : {"v1", "v2", "v3"}) ASSERT_EQ(w.verify(v, kMatch), kOk);
  ASSERT_EQ(w.rank(), kOk);
  const std::string first = w.out.str();
  EXPECT_EQ(first,
            "rank,id,score,accepted,rejected,verified\n"
            "1," + kProponent + ",3,1,0,0\n"
            "2,v1,1,0,0,1\n3,v2,1,0,0,1\n4,v3,1,0,0,1\n5,v4,0,0,0,0\n");
  ASSERT_EQ(w.rank(), kOk);
  EXPECT_EQ(w.out.str(), first);

  ASSERT_EQ(w.rank({0, 0, 0}), kOk);
  std::istringstream lines(w.out.str());
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) EXPECT_NE(line.find(",0,"), std::string::npos) << line;

  ASSERT_EQ(w.rank({}, true), kOk);
  EXPECT_NE(w.out.str().find("unaffiliated,6,1,0,3"), std::string::npos);

  std::string text = read_text(w.paths.chain);
  text[text.find("\"timestamp\":")+12] = '7';
  std::ofstream(w.paths.chain, std::ios::trunc) << text;
  EXPECT_EQ(w.rank(), kDomainFailure);
}

TEST(CmdSimulate, DeterministicAndErrors) {
  TempDir dir;
  std::ostringstream out, err;
  const std::string demo = data_path("scenarios/demo.scenario.json");
  ASSERT_EQ(cmd_simulate(demo, dir.file("a"), out, err), kOk) << err.str();
  ASSERT_EQ(cmd_simulate(demo, dir.file("b"), out, err), kOk);
  EXPECT_EQ(read_text(dir.file("a/chain.jsonl")), read_text(dir.file("b/chain.jsonl")));
  EXPECT_EQ(read_text(dir.file("a/events.jsonl")), read_text(dir.file("b/events.jsonl")));

  Json s = read_json_file(data_path("scenarios/flooding.scenario.json"));
  s["schedule"][0]["proponent"] = "nobody";
  const std::string bad = dir.file("bad.json");
  std::ofstream(bad) << s.dump();
  EXPECT_EQ(cmd_simulate(bad, dir.file("c"), out, err), kDomainFailure);
  EXPECT_EQ(cmd_simulate(dir.file("absent.json"), dir.file("d"), out, err), kEnvFailure);

  out.str("");
  ASSERT_EQ(cmd_simulate(data_path("scenarios/flooding.scenario.json"), dir.file("e"), out, err), kOk);
  EXPECT_EQ(Json::parse(out.str()).at("net_flow").at("flooder"), -100);
}

TEST(Cli, ConcurrentWriterIsRefused) {
  Workspace w;
  ASSERT_EQ(w.init_default(), kOk);
  std::ofstream(w.paths.lock()) << "held";
  const std::string before = w.snapshot();
  EXPECT_EQ(w.submit(kDescriptor, 10), kEnvFailure);
  EXPECT_EQ(w.snapshot(), before);
  std::filesystem::remove(w.paths.lock());
  EXPECT_EQ(w.submit(kDescriptor, 10), kOk);
}
