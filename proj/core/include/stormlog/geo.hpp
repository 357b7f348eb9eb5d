#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "stormlog/value.hpp"

namespace stormlog::geo {

struct Cidr {
  std::uint32_t network = 0;  // host bits cleared
  int prefix = 0;

  bool contains(std::uint32_t ip) const {
    return prefix == 0 || (ip >> (32 - prefix)) == (network >> (32 - prefix));
  }
  friend bool operator==(const Cidr&, const Cidr&) = default;
};

// Parses "a.b.c.d/len" and normalizes away host bits.
std::optional<Cidr> parse_cidr(std::string_view text);
std::optional<std::uint32_t> parse_ipv4(std::string_view text);
std::string format_cidr(const Cidr& cidr);

// Private, loopback, link-local, documentation, multicast and other
// special-purpose IPv4 blocks.
bool is_reserved(std::uint32_t ip);

struct GeoRow {
  Cidr cidr;
  double lat = 0.0;
  double lon = 0.0;
  std::string label;
};

struct GeoHit {
  double lat = 0.0;
  double lon = 0.0;
  std::string label;
  Cidr cidr;
};

class GeoError : public Error {
 public:
  using Error::Error;
};

// Static CIDR table. Rows must not overlap once host bits are cleared, so at
// most one row contains any address; lookup still probes longest prefix first.
class GeoTable {
 public:
  GeoTable() = default;
  explicit GeoTable(std::vector<GeoRow> rows);

  // CSV with header `cidr,lat,lon,label`.
  static GeoTable from_csv(std::string_view csv);

  const std::vector<GeoRow>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }

  std::optional<GeoHit> lookup(std::uint32_t ip) const;
  std::optional<GeoHit> lookup(std::string_view ip_text) const;

 private:
  std::vector<GeoRow> rows_;
  // One hash table per prefix length: network -> row index.
  std::array<std::unordered_map<std::uint32_t, std::size_t>, 33> by_length_;
  std::vector<int> lengths_;  // populated prefix lengths, longest first
};

inline std::optional<GeoHit> geo_lookup(const GeoTable& table, std::string_view ip) {
  return table.lookup(ip);
}

}  // namespace stormlog::geo
