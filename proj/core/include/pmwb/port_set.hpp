#pragma once

#include <bit>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmwb {

inline constexpr unsigned kMaxPorts = 16;

/// Set of execution ports, stored as a bit vector over dense indices 0..15.
class PortSet {
public:
  constexpr PortSet() = default;
  constexpr explicit PortSet(std::uint16_t bits) : bits_(bits) {}
  PortSet(std::initializer_list<unsigned> ports) {
    for (unsigned p : ports) insert(p);
  }

  static PortSet from_ports(std::span<const unsigned> ports) {
    PortSet s;
    for (unsigned p : ports) s.insert(p);
    return s;
  }

  /// Ports 0..n-1.
  static constexpr PortSet all(unsigned n) {
    return PortSet(static_cast<std::uint16_t>(n >= 16 ? 0xFFFFu : ((1u << n) - 1u)));
  }

  void insert(unsigned port) {
    if (port >= kMaxPorts) throw std::out_of_range("port index " + std::to_string(port) + " exceeds 15");
    bits_ = static_cast<std::uint16_t>(bits_ | (1u << port));
  }

  constexpr bool contains(unsigned port) const { return port < kMaxPorts && ((bits_ >> port) & 1u) != 0; }
  constexpr unsigned size() const { return static_cast<unsigned>(std::popcount(bits_)); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::uint16_t bits() const { return bits_; }

  constexpr bool subset_of(PortSet other) const { return (bits_ & ~other.bits_) == 0; }
  constexpr bool proper_subset_of(PortSet other) const { return subset_of(other) && bits_ != other.bits_; }
  /// True when every port index is below n_ports.
  constexpr bool valid_for(unsigned n_ports) const { return subset_of(all(n_ports)); }

  constexpr PortSet operator|(PortSet o) const { return PortSet(static_cast<std::uint16_t>(bits_ | o.bits_)); }
  constexpr PortSet operator&(PortSet o) const { return PortSet(static_cast<std::uint16_t>(bits_ & o.bits_)); }

  std::vector<unsigned> ports() const {
    std::vector<unsigned> out;
    for (unsigned p = 0; p < kMaxPorts; ++p)
      if (contains(p)) out.push_back(p);
    return out;
  }

  /// Canonical order: by cardinality, then by bit pattern.
  constexpr std::strong_ordering operator<=>(const PortSet& o) const {
    if (auto c = size() <=> o.size(); c != 0) return c;
    return bits_ <=> o.bits_;
  }
  constexpr bool operator==(const PortSet&) const = default;

  std::string to_string() const;

private:
  std::uint16_t bits_ = 0;
};

}  // namespace pmwb
