#include "stormlog/geo.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace stormlog::geo {
namespace {

std::uint32_t mask(int prefix) {
  return prefix == 0 ? 0u : ~std::uint32_t{0} << (32 - prefix);
}

struct Block {
  std::uint32_t network;
  int prefix;
};

constexpr std::uint32_t ip4(unsigned a, unsigned b, unsigned c, unsigned d) {
  return (a << 24) | (b << 16) | (c << 8) | d;
}

constexpr Block kReserved[] = {
    {ip4(0, 0, 0, 0), 8},       {ip4(10, 0, 0, 0), 8},     {ip4(100, 64, 0, 0), 10},
    {ip4(127, 0, 0, 0), 8},     {ip4(169, 254, 0, 0), 16}, {ip4(172, 16, 0, 0), 12},
    {ip4(192, 0, 0, 0), 24},    {ip4(192, 0, 2, 0), 24},   {ip4(192, 88, 99, 0), 24},
    {ip4(192, 168, 0, 0), 16},  {ip4(198, 18, 0, 0), 15},  {ip4(198, 51, 100, 0), 24},
    {ip4(203, 0, 113, 0), 24},  {ip4(224, 0, 0, 0), 4},    {ip4(240, 0, 0, 0), 4},
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

bool parse_number(std::string_view s, double& out) {
  s = trim(s);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return !s.empty() && res.ec == std::errc{} && res.ptr == s.data() + s.size() &&
         std::isfinite(out);
}

}  // namespace

std::optional<std::uint32_t> parse_ipv4(std::string_view text) {
  std::uint32_t value = 0;
  for (int part = 0; part < 4; ++part) {
    if (part > 0) {
      if (text.empty() || text.front() != '.') return std::nullopt;
      text.remove_prefix(1);
    }
    unsigned octet = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), octet);
    std::size_t len = static_cast<std::size_t>(res.ptr - text.data());
    if (res.ec != std::errc{} || len == 0 || len > 3 || octet > 255 ||
        (len > 1 && text.front() == '0')) {
      return std::nullopt;
    }
    value = (value << 8) | octet;
    text.remove_prefix(len);
  }
  if (!text.empty()) return std::nullopt;
  return value;
}

std::optional<Cidr> parse_cidr(std::string_view text) {
  auto slash = text.find('/');
  if (slash == std::string_view::npos) return std::nullopt;
  auto ip = parse_ipv4(text.substr(0, slash));
  auto len_text = text.substr(slash + 1);
  int prefix = -1;
  auto res = std::from_chars(len_text.data(), len_text.data() + len_text.size(), prefix);
  if (!ip || len_text.empty() || res.ec != std::errc{} ||
      res.ptr != len_text.data() + len_text.size() || prefix < 0 || prefix > 32) {
    return std::nullopt;
  }
  return Cidr{*ip & mask(prefix), prefix};
}

std::string format_cidr(const Cidr& c) {
  return std::to_string(c.network >> 24) + "." + std::to_string((c.network >> 16) & 255) + "." +
         std::to_string((c.network >> 8) & 255) + "." + std::to_string(c.network & 255) + "/" +
         std::to_string(c.prefix);
}

bool is_reserved(std::uint32_t ip) {
  return std::any_of(std::begin(kReserved), std::end(kReserved), [&](const Block& b) {
    return (ip & mask(b.prefix)) == b.network;
  });
}

GeoTable::GeoTable(std::vector<GeoRow> rows) : rows_(std::move(rows)) {
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    auto& row = rows_[i];
    row.cidr.network &= mask(row.cidr.prefix);
    if (row.lat < -90 || row.lat > 90 || row.lon < -180 || row.lon > 180) {
      throw GeoError("coordinates out of range for " + format_cidr(row.cidr));
    }
    if (!by_length_[row.cidr.prefix].emplace(row.cidr.network, i).second) {
      throw GeoError("duplicate prefix " + format_cidr(row.cidr));
    }
  }
  // Sorted by start address, two ranges overlap iff one starts before the
  // previous one ends.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
  spans.reserve(rows_.size());
  for (const auto& row : rows_) {
    std::uint64_t first = row.cidr.network;
    spans.emplace_back(first, first + (std::uint64_t{1} << (32 - row.cidr.prefix)));
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].first < spans[i - 1].second) {
      Cidr c{static_cast<std::uint32_t>(spans[i].first), 0};
      for (const auto& row : rows_) {
        if (row.cidr.network == spans[i].first) c = row.cidr;
      }
      throw GeoError("overlapping prefix " + format_cidr(c));
    }
  }
  for (int len = 32; len >= 0; --len) {
    if (!by_length_[len].empty()) lengths_.push_back(len);
  }
}

GeoTable GeoTable::from_csv(std::string_view csv) {
  std::vector<GeoRow> rows;
  std::size_t pos = 0;
  int line_no = 0;
  bool header = true;
  while (pos < csv.size()) {
    auto nl = csv.find('\n', pos);
    if (nl == std::string_view::npos) nl = csv.size();
    auto line = trim(csv.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    if (header) {
      header = false;
      if (line != "cidr,lat,lon,label") {
        throw GeoError("geo table: expected header 'cidr,lat,lon,label'");
      }
      continue;
    }
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    for (int i = 0; i < 3; ++i) {
      auto comma = line.find(',', start);
      if (comma == std::string_view::npos) break;
      cols.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    cols.push_back(line.substr(start));
    auto where = "geo table line " + std::to_string(line_no) + ": ";
    if (cols.size() != 4) throw GeoError(where + "expected 4 columns");
    auto cidr = parse_cidr(trim(cols[0]));
    GeoRow row;
    if (!cidr) throw GeoError(where + "invalid CIDR");
    row.cidr = *cidr;
    if (!parse_number(cols[1], row.lat) || !parse_number(cols[2], row.lon)) {
      throw GeoError(where + "invalid coordinate");
    }
    row.label = std::string(trim(cols[3]));
    rows.push_back(std::move(row));
  }
  return GeoTable(std::move(rows));
}

std::optional<GeoHit> GeoTable::lookup(std::uint32_t ip) const {
  if (is_reserved(ip)) return std::nullopt;
  for (int len : lengths_) {
    const auto& table = by_length_[len];
    auto it = table.find(ip & mask(len));
    if (it != table.end()) {
      const auto& row = rows_[it->second];
      return GeoHit{row.lat, row.lon, row.label, row.cidr};
    }
  }
  return std::nullopt;
}

std::optional<GeoHit> GeoTable::lookup(std::string_view ip_text) const {
  auto ip = parse_ipv4(ip_text);
  if (!ip) return std::nullopt;
  return lookup(*ip);
}

}  // namespace stormlog::geo
