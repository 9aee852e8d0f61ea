#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>

namespace probo {

// Smallest indivisible token unit.
using Probos = std::int64_t;

// Logical time: simulation ticks or Unix seconds, depending on the driver.
using Timestamp = std::int64_t;

// Persistent researcher identity (ORCID-like). Equality and ordering use the
// id only; the affiliation is metadata for institution rollups.
struct NodeId {
  std::string id;
  std::optional<std::string> affiliation;

  NodeId() = default;
  NodeId(std::string id_, std::optional<std::string> affiliation_ = std::nullopt)
      : id(std::move(id_)), affiliation(std::move(affiliation_)) {}

  friend bool operator==(const NodeId& a, const NodeId& b) { return a.id == b.id; }
  friend std::strong_ordering operator<=>(const NodeId& a, const NodeId& b) {
    return a.id <=> b.id;
  }
};

inline constexpr const char* kUnaffiliated = "unaffiliated";

}  // namespace probo
