#pragma once

// Researcher and institution reputation, recomputed from the chain alone.
//
//   score = w_accept * accepted - w_reject * rejected + w_verify * verified

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "probo/canonical.hpp"
#include "probo/errors.hpp"
#include "probo/ledger.hpp"

namespace probo {

struct ReputationWeights {
  double w_accept = 3.0;
  double w_verify = 1.0;
  double w_reject = 3.0;

  void validate() const {
    for (double w : {w_accept, w_verify, w_reject}) {
      if (!std::isfinite(w) || w < 0.0) fail(ErrorKind::InvalidConfig, "reputation weights must be finite and >= 0");
    }
  }

  ReputationWeights scaled(double factor) const {
    return {w_accept * factor, w_verify * factor, w_reject * factor};
  }
};

struct ActivityCounts {
  std::int64_t accepted = 0;
  std::int64_t rejected = 0;
  std::int64_t verified = 0;

  friend bool operator==(const ActivityCounts&, const ActivityCounts&) = default;
};

struct ScoreBoard {
  std::map<std::string, double> scores;
  std::map<std::string, ActivityCounts> counts;

  friend bool operator==(const ScoreBoard&, const ScoreBoard&) = default;
};

inline double score_of(const ActivityCounts& c, const ReputationWeights& w) {
  return w.w_accept * static_cast<double>(c.accepted) - w.w_reject * static_cast<double>(c.rejected) +
         w.w_verify * static_cast<double>(c.verified);
}

// Counts per node across all accepted/rejected blocks. Expired requests
// credit nobody. Every genesis node appears, even with zero activity.
inline std::map<std::string, ActivityCounts> count_activity(const Chain& chain) {
  if (auto v = chain.validate(); !v) {
    fail(ErrorKind::InvalidChain, "invalid chain at index " + std::to_string(v.index) + ": " + to_string(v.reason));
  }
  std::map<std::string, ActivityCounts> counts;
  for (const auto& n : chain.genesis_config().nodes) counts[n.node.id];
  for (const auto& block : chain.blocks()) {
    if (const auto* a = std::get_if<AcceptanceRecord>(&block.payload)) {
      counts[a->proponent].accepted += 1;
      for (const auto& r : a->reports) counts[r.verifier].verified += 1;
    } else if (const auto* r = std::get_if<RejectionRecord>(&block.payload)) {
      counts[r->proponent].rejected += 1;
      for (const auto& rep : r->reports) counts[rep.verifier].verified += 1;
    }
  }
  return counts;
}

inline ScoreBoard board_from_counts(std::map<std::string, ActivityCounts> counts, const ReputationWeights& weights) {
  weights.validate();
  ScoreBoard board;
  for (const auto& [id, c] : counts) board.scores[id] = score_of(c, weights);
  board.counts = std::move(counts);
  return board;
}

inline ScoreBoard compute_scores(const Chain& chain, const ReputationWeights& weights) {
  return board_from_counts(count_activity(chain), weights);
}

// Descending score, ties by ascending id.
inline std::vector<std::pair<std::string, double>> rank(const ScoreBoard& board) {
  std::vector<std::pair<std::string, double>> out(board.scores.begin(), board.scores.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

inline ScoreBoard institution_scores(const Chain& chain, const ReputationWeights& weights) {
  const auto per_node = count_activity(chain);
  std::map<std::string, std::string> affiliation;
  for (const auto& n : chain.genesis_config().nodes) {
    affiliation[n.node.id] = n.node.affiliation.value_or(kUnaffiliated);
  }
  weights.validate();
  ScoreBoard board;
  for (const auto& [id, c] : per_node) {
    const auto it = affiliation.find(id);
    const std::string key = it == affiliation.end() ? kUnaffiliated : it->second;
    auto& agg = board.counts[key];
    agg.accepted += c.accepted;
    agg.rejected += c.rejected;
    agg.verified += c.verified;
    board.scores[key] += score_of(c, weights);
  }
  return board;
}

// CSV with header rank,id,score,accepted,rejected,verified.
inline std::string ranking_csv(const ScoreBoard& board) {
  std::string out = "rank,id,score,accepted,rejected,verified\n";
  std::size_t position = 0;
  for (const auto& [id, score] : rank(board)) {
    const auto& c = board.counts.at(id);
    out += std::to_string(++position) + "," + id + "," + format_decimal(score) + "," + std::to_string(c.accepted) +
           "," + std::to_string(c.rejected) + "," + std::to_string(c.verified) + "\n";
  }
  return out;
}

}  // namespace probo
