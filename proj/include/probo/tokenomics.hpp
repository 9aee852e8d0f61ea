#pragma once

// Token accounting: balances, escrowed deposits, and settlement of study
// requests. Supply only grows when an accepted study mints verifier rewards.
//
//   sum(balances) + sum(open escrow deposits) == genesis_supply + total_minted
//
// holds after every successful operation; failed operations leave the state
// untouched.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "probo/canonical.hpp"
#include "probo/errors.hpp"
#include "probo/types.hpp"
#include "probo/verification.hpp"

namespace probo {

struct EconomicParams {
  Probos min_deposit = 10;
  Probos verifier_reward = 5;

  void validate() const {
    if (min_deposit < 1) fail(ErrorKind::InvalidConfig, "min_deposit must be >= 1");
    if (verifier_reward < 1) fail(ErrorKind::InvalidConfig, "verifier_reward must be >= 1");
  }

  // Reported, not configured.
  Rational deposit_reward_ratio() const { return Rational::make(min_deposit, verifier_reward); }

  friend bool operator==(const EconomicParams&, const EconomicParams&) = default;
};

inline void to_json(Json& j, const EconomicParams& p) {
  j = Json{{"min_deposit", p.min_deposit}, {"verifier_reward", p.verifier_reward}};
}
inline void from_json(const Json& j, EconomicParams& p) {
  p.min_deposit = j.value("min_deposit", Probos{10});
  p.verifier_reward = j.value("verifier_reward", Probos{5});
}

enum class EscrowState { Open, SettledAccepted, SettledRejected, SettledExpired };

inline const char* to_string(EscrowState s) {
  switch (s) {
    case EscrowState::Open: return "open";
    case EscrowState::SettledAccepted: return "settled_accepted";
    case EscrowState::SettledRejected: return "settled_rejected";
    case EscrowState::SettledExpired: return "settled_expired";
  }
  return "";
}

inline EscrowState parse_escrow_state(const std::string& s) {
  if (s == "open") return EscrowState::Open;
  if (s == "settled_accepted") return EscrowState::SettledAccepted;
  if (s == "settled_rejected") return EscrowState::SettledRejected;
  if (s == "settled_expired") return EscrowState::SettledExpired;
  fail(ErrorKind::ParseError, "unknown escrow state '" + s + "'");
}

struct EscrowContract {
  std::string request_id;
  std::string proponent;
  Probos deposit = 0;
  EscrowState state = EscrowState::Open;
  Timestamp opened_at = 0;
  std::optional<Timestamp> settled_at;

  friend bool operator==(const EscrowContract&, const EscrowContract&) = default;
};

inline void to_json(Json& j, const EscrowContract& e) {
  j = Json{{"request_id", e.request_id}, {"proponent", e.proponent}, {"deposit", e.deposit},
           {"state", to_string(e.state)},  {"opened_at", e.opened_at}};
  if (e.settled_at) j["settled_at"] = *e.settled_at;
}
inline void from_json(const Json& j, EscrowContract& e) {
  e.request_id = j.at("request_id").get<std::string>();
  e.proponent = j.at("proponent").get<std::string>();
  e.deposit = j.at("deposit").get<Probos>();
  e.state = parse_escrow_state(j.at("state").get<std::string>());
  e.opened_at = j.at("opened_at").get<Timestamp>();
  e.settled_at = j.contains("settled_at") ? std::optional(j.at("settled_at").get<Timestamp>()) : std::nullopt;
}

struct Settlement {
  Decision kind = Decision::Expired;
  std::map<std::string, Probos> refunds;
  std::map<std::string, Probos> rewards_minted;
  std::map<std::string, Probos> forfeits_distributed;

  friend bool operator==(const Settlement&, const Settlement&) = default;
};

inline Decision parse_decision(const std::string& s) {
  if (s == "accepted") return Decision::Accepted;
  if (s == "rejected") return Decision::Rejected;
  if (s == "expired") return Decision::Expired;
  if (s == "pending") return Decision::Pending;
  fail(ErrorKind::ParseError, "unknown decision '" + s + "'");
}

inline std::string decision_key(Decision d) {
  switch (d) {
    case Decision::Pending: return "pending";
    case Decision::Accepted: return "accepted";
    case Decision::Rejected: return "rejected";
    case Decision::Expired: return "expired";
  }
  return "";
}

inline void to_json(Json& j, const Settlement& s) {
  auto as_obj = [](const std::map<std::string, Probos>& m) {
    Json o = Json::object();
    for (const auto& [k, v] : m) o[k] = v;
    return o;
  };
  j = Json{{"kind", decision_key(s.kind)},
           {"refunds", as_obj(s.refunds)},
           {"rewards_minted", as_obj(s.rewards_minted)},
           {"forfeits_distributed", as_obj(s.forfeits_distributed)}};
}
inline void from_json(const Json& j, Settlement& s) {
  s.kind = parse_decision(j.at("kind").get<std::string>());
  s.refunds = j.at("refunds").get<std::map<std::string, Probos>>();
  s.rewards_minted = j.at("rewards_minted").get<std::map<std::string, Probos>>();
  s.forfeits_distributed = j.at("forfeits_distributed").get<std::map<std::string, Probos>>();
}

inline Probos sum_values(const std::map<std::string, Probos>& m) {
  Probos total = 0;
  for (const auto& [_, v] : m) total += v;
  return total;
}

// n shares summing to amount; the first (amount mod n) shares get one extra unit.
inline std::vector<Probos> split_deposit(Probos amount, std::int64_t n) {
  if (n < 1) fail(ErrorKind::InvalidAmount, "split_deposit needs n >= 1");
  if (amount < 0) fail(ErrorKind::InvalidAmount, "split_deposit needs amount >= 0");
  const Probos base = amount / n;
  const Probos extra = amount % n;
  std::vector<Probos> shares(static_cast<std::size_t>(n), base);
  for (Probos i = 0; i < extra; ++i) shares[static_cast<std::size_t>(i)] += 1;
  return shares;
}

struct Account {
  Probos balance = 0;
  std::optional<std::string> affiliation;

  friend bool operator==(const Account&, const Account&) = default;
};

class BankState {
 public:
  // Genesis phase: accounts may be funded. After seal_genesis() only zero-balance
  // accounts can be created.
  void create_account(const NodeId& node, Probos initial) {
    if (node.id.empty()) fail(ErrorKind::InvalidConfig, "empty node id");
    if (initial < 0) fail(ErrorKind::InvalidAmount, "initial balance must be >= 0");
    if (accounts_.contains(node.id)) fail(ErrorKind::DuplicateAccount, "duplicate account '" + node.id + "'");
    if (sealed_ && initial != 0) {
      fail(ErrorKind::PostGenesisMint, "cannot fund '" + node.id + "' after genesis");
    }
    accounts_.emplace(node.id, Account{initial, node.affiliation});
    genesis_supply_ += initial;
  }

  void seal_genesis() { sealed_ = true; }
  bool sealed() const { return sealed_; }

  void transfer(const std::string& from, const std::string& to, Probos amount) {
    if (amount < 1) fail(ErrorKind::InvalidAmount, "transfer amount must be >= 1");
    auto& src = account(from);
    auto& dst = account(to);
    if (src.balance < amount) {
      fail(ErrorKind::InsufficientFunds, "'" + from + "' holds " + std::to_string(src.balance) +
                                             ", needs " + std::to_string(amount));
    }
    src.balance -= amount;
    dst.balance += amount;
  }

  void open_escrow(const std::string& proponent, Probos deposit, const std::string& request_id,
                   const EconomicParams& params, Timestamp now) {
    if (escrows_.contains(request_id)) {
      fail(ErrorKind::DuplicateRequest, "request '" + request_id + "' already has an escrow");
    }
    if (deposit < params.min_deposit) {
      fail(ErrorKind::DepositBelowMinimum, "deposit below minimum (" + std::to_string(deposit) + " < " +
                                               std::to_string(params.min_deposit) + ")");
    }
    auto& acct = account(proponent);
    if (acct.balance < deposit) {
      fail(ErrorKind::InsufficientFunds, "'" + proponent + "' holds " + std::to_string(acct.balance) +
                                             ", deposit is " + std::to_string(deposit));
    }
    acct.balance -= deposit;
    escrows_.emplace(request_id, EscrowContract{request_id, proponent, deposit, EscrowState::Open, now, {}});
  }

  // Closes an open escrow. Accepted: refund + mint verifier_reward per verifier.
  // Rejected: deposit split among verifiers in report order. Expired: refund.
  Settlement settle(const std::string& request_id, Decision decision,
                    const std::vector<std::string>& verifiers, const EconomicParams& params,
                    Timestamp now) {
    auto it = escrows_.find(request_id);
    if (it == escrows_.end()) fail(ErrorKind::UnknownEscrow, "no escrow for '" + request_id + "'");
    EscrowContract& escrow = it->second;
    if (escrow.state != EscrowState::Open) {
      fail(ErrorKind::AlreadySettled, "escrow '" + request_id + "' is already settled");
    }
    if (decision == Decision::Pending) fail(ErrorKind::InvalidDecision, "cannot settle a pending request");
    if ((decision == Decision::Accepted || decision == Decision::Rejected) && verifiers.empty()) {
      fail(ErrorKind::EmptyVerifierSet, "settlement needs at least one verifier");
    }
    account(escrow.proponent);
    for (const auto& v : verifiers) account(v);

    Settlement s;
    s.kind = decision;
    switch (decision) {
      case Decision::Accepted:
        s.refunds[escrow.proponent] = escrow.deposit;
        for (const auto& v : verifiers) s.rewards_minted[v] += params.verifier_reward;
        escrow.state = EscrowState::SettledAccepted;
        break;
      case Decision::Rejected: {
        const auto shares = split_deposit(escrow.deposit, static_cast<std::int64_t>(verifiers.size()));
        for (std::size_t i = 0; i < verifiers.size(); ++i) s.forfeits_distributed[verifiers[i]] += shares[i];
        escrow.state = EscrowState::SettledRejected;
        break;
      }
      case Decision::Expired:
        s.refunds[escrow.proponent] = escrow.deposit;
        escrow.state = EscrowState::SettledExpired;
        break;
      case Decision::Pending: break;
    }
    escrow.settled_at = now;
    apply(s);
    return s;
  }

  Probos total_supply() const { return genesis_supply_ + total_minted_; }

  Probos open_deposits() const {
    Probos total = 0;
    for (const auto& [_, e] : escrows_) {
      if (e.state == EscrowState::Open) total += e.deposit;
    }
    return total;
  }

  Probos sum_balances() const {
    Probos total = 0;
    for (const auto& [_, a] : accounts_) total += a.balance;
    return total;
  }

  bool conservation_holds() const {
    for (const auto& [_, a] : accounts_) {
      if (a.balance < 0) return false;
    }
    return sum_balances() + open_deposits() == total_supply();
  }

  bool has_account(const std::string& id) const { return accounts_.contains(id); }
  Probos balance(const std::string& id) const { return account(id).balance; }
  const std::map<std::string, Account>& accounts() const { return accounts_; }
  const std::map<std::string, EscrowContract>& escrows() const { return escrows_; }
  const EscrowContract* escrow(const std::string& request_id) const {
    auto it = escrows_.find(request_id);
    return it == escrows_.end() ? nullptr : &it->second;
  }
  Probos genesis_supply() const { return genesis_supply_; }
  Probos total_minted() const { return total_minted_; }

  friend bool operator==(const BankState&, const BankState&) = default;

  friend void to_json(Json& j, const BankState& b) {
    Json accounts = Json::object();
    for (const auto& [id, a] : b.accounts_) {
      Json entry{{"balance", a.balance}};
      if (a.affiliation) entry["affiliation"] = *a.affiliation;
      accounts[id] = std::move(entry);
    }
    Json escrows = Json::object();
    for (const auto& [id, e] : b.escrows_) escrows[id] = e;
    j = Json{{"accounts", std::move(accounts)},     {"escrows", std::move(escrows)},
             {"genesis_supply", b.genesis_supply_}, {"total_minted", b.total_minted_},
             {"sealed", b.sealed_}};
  }

  friend void from_json(const Json& j, BankState& b) {
    BankState out;
    for (const auto& [id, entry] : j.at("accounts").items()) {
      Account a;
      a.balance = entry.at("balance").get<Probos>();
      if (entry.contains("affiliation")) a.affiliation = entry.at("affiliation").get<std::string>();
      out.accounts_.emplace(id, std::move(a));
    }
    for (const auto& [id, entry] : j.at("escrows").items()) out.escrows_.emplace(id, entry.get<EscrowContract>());
    out.genesis_supply_ = j.at("genesis_supply").get<Probos>();
    out.total_minted_ = j.at("total_minted").get<Probos>();
    out.sealed_ = j.value("sealed", true);
    if (!out.conservation_holds()) fail(ErrorKind::ParseError, "bank state violates conservation");
    b = std::move(out);
  }

 private:
  Account& account(const std::string& id) {
    auto it = accounts_.find(id);
    if (it == accounts_.end()) fail(ErrorKind::UnknownAccount, "unknown account '" + id + "'");
    return it->second;
  }
  const Account& account(const std::string& id) const {
    auto it = accounts_.find(id);
    if (it == accounts_.end()) fail(ErrorKind::UnknownAccount, "unknown account '" + id + "'");
    return it->second;
  }

  void apply(const Settlement& s) {
    for (const auto& [id, amount] : s.refunds) accounts_.at(id).balance += amount;
    for (const auto& [id, amount] : s.forfeits_distributed) accounts_.at(id).balance += amount;
    for (const auto& [id, amount] : s.rewards_minted) {
      accounts_.at(id).balance += amount;
      total_minted_ += amount;
    }
  }

  std::map<std::string, Account> accounts_;
  std::map<std::string, EscrowContract> escrows_;
  Probos genesis_supply_ = 0;
  Probos total_minted_ = 0;
  bool sealed_ = false;
};

}  // namespace probo
