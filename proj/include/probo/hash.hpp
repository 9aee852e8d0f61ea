#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace probo {

// Lowercase hex SHA-256 output. Always 64 characters in [0-9a-f].
class HashDigest {
 public:
  HashDigest() : hex_(64, '0') {}

  static bool well_formed(std::string_view hex) {
    if (hex.size() != 64) return false;
    for (char c : hex) {
      if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
    }
    return true;
  }

  static HashDigest from_hex(std::string_view hex) {
    if (!well_formed(hex)) {
      throw std::invalid_argument("malformed digest: '" + std::string(hex) + "'");
    }
    HashDigest d;
    d.hex_ = std::string(hex);
    return d;
  }

  static HashDigest zero() { return HashDigest(); }

  const std::string& hex() const noexcept { return hex_; }
  bool is_zero() const { return hex_ == std::string(64, '0'); }

  friend bool operator==(const HashDigest&, const HashDigest&) = default;
  friend auto operator<=>(const HashDigest&, const HashDigest&) = default;

 private:
  std::string hex_;
};

namespace detail {

inline std::string to_hex(std::span<const unsigned char> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

}  // namespace detail

inline HashDigest digest(std::span<const std::byte> bytes) {
  std::array<unsigned char, 32> md{};
  unsigned int len = 0;
  const int ok = EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr);
  if (ok != 1 || len != md.size()) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  return HashDigest::from_hex(detail::to_hex(md));
}

inline HashDigest digest(std::string_view text) {
  return digest(std::as_bytes(std::span<const char>(text.data(), text.size())));
}

}  // namespace probo
