#include <gtest/gtest.h>

#include <random>

#include "support/test_support.hpp"

using namespace probo;
using namespace probo::testing;

namespace {

OutputTable ranked(const std::vector<std::string>& features, double mcc = 0.75) {
  return OutputTable{{{"MCC", mcc}}, features};
}

std::vector<std::string> genes(int from, int to) {
  std::vector<std::string> out;
  for (int i = from; i < to; ++i) out.push_back("g" + std::to_string(i));
  return out;
}

std::vector<VerifierReport> reports_from_mask(unsigned mask, int n) {
  std::vector<VerifierReport> out;
  for (int i = 0; i < n; ++i) {
    VerifierReport r;
    r.request_id = "r";
    r.verifier = "v" + std::to_string(i);
    r.verdict.value = ((mask >> i) & 1u) ? VerdictValue::Match : VerdictValue::Mismatch;
    r.timestamp = i;
    out.push_back(r);
  }
  return out;
}

OutputTable random_table(std::mt19937_64& rng) {
  OutputTable t;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const char* names[] = {"MCC", "TPR", "TNR", "FPR", "FNR", "AUC"};
  for (std::size_t i = 0, n = 1 + rng() % 6; i < n; ++i) t.metrics[names[rng() % 6]] = u(rng);
  for (std::size_t i = 0, n = rng() % 12; i < n; ++i) t.ranked_features.push_back("f" + std::to_string(rng() % 50));
  return t;
}

}  // namespace

TEST(VerifyCommitment, Examples) {
  const OutputTable t = box1_outputs();
  EXPECT_TRUE(verify_commitment(t, commit_outputs(t)));
  OutputTable nudged = t;
  nudged.metrics["MCC"] += 1e-9;
  EXPECT_FALSE(verify_commitment(nudged, commit_outputs(t)));
  EXPECT_FALSE(verify_commitment(t, HashDigest::zero()));
}

TEST(VerifyCommitment, PropertyRandomTables) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    const OutputTable t = random_table(rng);
    EXPECT_TRUE(verify_commitment(t, commit_outputs(t)));
    EXPECT_TRUE(verify_commitment(Json::parse(Json(t).dump()).get<OutputTable>(), commit_outputs(t)));
  }
}

TEST(CompareOutputs, IntervalMembership) {
  const std::vector<ToleranceSpec> tol = {{"MCC", 0.70, 0.80, {}, {}}};
  const Verdict pass = compare_outputs(ranked({}), ranked({}, 0.78), tol);
  EXPECT_TRUE(pass.match());
  EXPECT_TRUE(pass.metric_checks.at("MCC"));
  const Verdict fail = compare_outputs(ranked({}), ranked({}, 0.65), tol);
  EXPECT_FALSE(fail.match());
  EXPECT_FALSE(fail.metric_checks.at("MCC"));
  // Closed interval on both ends.
  EXPECT_TRUE(compare_outputs(ranked({}), ranked({}, 0.70), tol).match());
  EXPECT_TRUE(compare_outputs(ranked({}), ranked({}, 0.80), tol).match());
}

TEST(CompareOutputs, TopKOverlapEightOfTen) {
  // Verifier top-10 shares exactly g0..g7 with the proponent's top-10.
  auto theirs = genes(0, 8);
  theirs.push_back("x1");
  theirs.push_back("x2");
  theirs.push_back("g8");
  const std::vector<ToleranceSpec> tol = {{"MCC", 0.70, 0.80, 10, 0.7}};
  const Verdict v = compare_outputs(ranked(genes(0, 12)), ranked(theirs), tol);
  ASSERT_EQ(v.list_checks.size(), 1u);
  // brute-force intersection count
  const auto mine = genes(0, 10);
  int count = 0;
  for (const auto& a : mine) {
    for (int j = 0; j < 10; ++j) count += a == theirs[static_cast<std::size_t>(j)] ? 1 : 0;
  }
  EXPECT_EQ(count, 8);
  EXPECT_EQ(v.list_checks[0].overlap, count);
  EXPECT_TRUE(v.list_checks[0].pass);
  EXPECT_TRUE(v.match());

  const std::vector<ToleranceSpec> strict = {{"MCC", 0.70, 0.80, 10, 0.9}};
  EXPECT_FALSE(compare_outputs(ranked(genes(0, 12)), ranked(theirs), strict).match());
}

TEST(CompareOutputs, MissingMetrics) {
  const std::vector<ToleranceSpec> tol = {{"AUC", 0.5, 1.0, {}, {}}};
  EXPECT_EQ(kind_of([&] { compare_outputs(ranked({}), ranked({}), tol); }), ErrorKind::UnknownMetric);
  OutputTable prop = ranked({});
  prop.metrics["AUC"] = 0.9;
  const Verdict v = compare_outputs(prop, ranked({}), tol);
  EXPECT_FALSE(v.match());
  EXPECT_FALSE(v.metric_checks.at("AUC"));
}

TEST(CompareOutputs, Box1Fixtures) {
  const auto d = box1_descriptor();
  const auto prop = box1_outputs();
  const auto good = read_json_file(data_path("box1.verifier-match.json")).get<OutputTable>();
  const auto bad = read_json_file(data_path("box1.verifier-mismatch.json")).get<OutputTable>();
  EXPECT_TRUE(compare_outputs(prop, good, d.tolerances).match());
  EXPECT_FALSE(compare_outputs(prop, bad, d.tolerances).match());
  EXPECT_TRUE(compare_outputs(prop, prop, d.tolerances).match());
}

TEST(CompareOutputs, DegenerateIntervalIsExactEquality) {
  const std::vector<ToleranceSpec> tol = {{"MCC", 0.75, 0.75, {}, {}}};
  EXPECT_TRUE(compare_outputs(ranked({}), ranked({}, 0.75), tol).match());
  EXPECT_FALSE(compare_outputs(ranked({}), ranked({}, 0.7500000001), tol).match());
}

// Adding a tolerance can never turn Mismatch into Match.
TEST(CompareOutputs, PropertyMoreTolerancesNeverHelp) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    OutputTable prop = random_table(rng);
    OutputTable ver = random_table(rng);
    std::vector<ToleranceSpec> tol;
    const auto pick_metric = [&] {
      auto it = prop.metrics.begin();
      std::advance(it, static_cast<long>(rng() % prop.metrics.size()));
      return it->first;
    };
    for (std::size_t k = 0, n = rng() % 3; k < n; ++k) {
      double a = u(rng), b = u(rng);
      tol.push_back({pick_metric(), std::min(a, b), std::max(a, b), {}, {}});
    }
    const bool before = compare_outputs(prop, ver, tol).match();
    double a = u(rng), b = u(rng);
    ToleranceSpec extra{pick_metric(), std::min(a, b), std::max(a, b), {}, {}};
    if (rng() % 2) {
      extra.list_k = static_cast<std::int64_t>(1 + rng() % 10);
      extra.min_overlap = static_cast<double>(rng() % 11) / 10.0;
    }
    tol.push_back(extra);
    const bool after = compare_outputs(prop, ver, tol).match();
    if (!before) {
      EXPECT_FALSE(after);
    }
  }
}

TEST(Eligible, Examples) {
  EXPECT_FALSE(eligible("p", "p", {}));
  EXPECT_TRUE(eligible("v", "p", {}));
  auto existing = reports_from_mask(1, 1);
  EXPECT_FALSE(eligible("v0", "p", existing));
  EXPECT_TRUE(eligible("v1", "p", existing));
}

TEST(Aggregate, Examples) {
  const QuorumConfig q{3, {2, 3}};
  EXPECT_EQ(aggregate(reports_from_mask(0b111, 3), q, 0, 10), Decision::Accepted);
  EXPECT_EQ(aggregate(reports_from_mask(0b011, 3), q, 0, 10), Decision::Accepted);
  EXPECT_EQ(aggregate(reports_from_mask(0b001, 3), q, 0, 10), Decision::Rejected);
  EXPECT_EQ(aggregate(reports_from_mask(0b11, 2), q, 5, 10), Decision::Pending);
  EXPECT_EQ(aggregate(reports_from_mask(0b11, 2), q, 10, 10), Decision::Pending);
  EXPECT_EQ(aggregate(reports_from_mask(0b11, 2), q, 11, 10), Decision::Expired);
  EXPECT_EQ(aggregate({}, q, 11, 10), Decision::Expired);
}

TEST(Aggregate, DecisionUsesFirstMinReportsOnly) {
  const QuorumConfig q{3, {2, 3}};
  // first three: M, X, X -> Rejected regardless of later Matches
  EXPECT_EQ(aggregate(reports_from_mask(0b11001, 5), q, 0, 10), Decision::Rejected);
  // past the deadline a full quorum is still decided
  EXPECT_EQ(aggregate(reports_from_mask(0b111, 3), q, 99, 10), Decision::Accepted);
}

TEST(Aggregate, Errors) {
  const QuorumConfig q{3, {2, 3}};
  auto mixed = reports_from_mask(0b111, 3);
  mixed[1].request_id = "other";
  EXPECT_EQ(kind_of([&] { aggregate(mixed, q, 0, 10); }), ErrorKind::MixedRequestIds);
  auto unordered = reports_from_mask(0b111, 3);
  unordered[2].timestamp = 0;
  unordered[1].timestamp = 5;
  EXPECT_EQ(kind_of([&] { aggregate(unordered, q, 0, 10); }), ErrorKind::UnorderedReports);
}

// Every verdict pattern for min_reports 1..5 and several thresholds, checked
// against the brute-force oracle.
TEST(Aggregate, ExhaustiveEnumerationAgainstOracle) {
  const std::vector<Rational> thresholds = {{1, 2}, {2, 3}, {1, 1}, {3, 5}, {1, 3}};
  for (int n = 1; n <= 5; ++n) {
    for (const auto& theta : thresholds) {
      const QuorumConfig q{n, theta};
      for (unsigned mask = 0; mask < (1u << n); ++mask) {
        const Decision d = aggregate(reports_from_mask(mask, n), q, 0, 10);
        const bool oracle = brute_force_accepts(mask, n, theta.num, theta.den);
        EXPECT_EQ(d, oracle ? Decision::Accepted : Decision::Rejected) << "n=" << n << " theta=" << theta.str();
        if (theta == Rational{1, 1}) {
          EXPECT_EQ(d == Decision::Accepted, mask == (1u << n) - 1u);
        }
        // deterministic re-evaluation
        EXPECT_EQ(aggregate(reports_from_mask(mask, n), q, 0, 10), d);
      }
    }
  }
}

// Time only moves a request forward: once decided, later `now` values agree.
TEST(Aggregate, MonotoneInTime) {
  const QuorumConfig q{3, {2, 3}};
  for (int n = 0; n <= 4; ++n) {
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      const auto reps = reports_from_mask(mask, n);
      Decision prev = Decision::Pending;
      for (Timestamp now = 0; now < 30; ++now) {
        const Decision d = aggregate(reps, q, now, 10);
        if (prev != Decision::Pending) {
          EXPECT_EQ(d, prev);
        }
        prev = d;
      }
    }
  }
}

TEST(Rational, ParseForms) {
  EXPECT_EQ(Rational::parse("2/3"), (Rational{2, 3}));
  EXPECT_EQ(Rational::parse("0.5"), (Rational{1, 2}));
  EXPECT_EQ(Rational::parse("1"), (Rational{1, 1}));
  EXPECT_EQ(Rational::from_json(Json(0.75)), (Rational{3, 4}));
  EXPECT_THROW(Rational::parse("abc"), Error);
  EXPECT_THROW(Rational::parse("1/0"), Error);
  EXPECT_EQ(kind_of([] { QuorumConfig{0, {2, 3}}.validate(); }), ErrorKind::InvalidConfig);
  EXPECT_EQ(kind_of([] { QuorumConfig{3, {4, 3}}.validate(); }), ErrorKind::InvalidConfig);
}

TEST(VerifierReport, MakeReportAndJson) {
  const auto d = box1_descriptor();
  const auto good = read_json_file(data_path("box1.verifier-match.json")).get<OutputTable>();
  const VerifierReport r = make_report(d.request_id, "v", good, box1_outputs(), d.tolerances, 4);
  EXPECT_EQ(r.output_hash, commit_outputs(good));
  EXPECT_TRUE(r.verdict.match());
  EXPECT_EQ(Json(r).get<VerifierReport>(), r);
}
