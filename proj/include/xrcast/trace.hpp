#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xrcast::trace {

enum class Direction : std::uint8_t { uplink, downlink };

std::string_view to_string(Direction d) noexcept;

/// One captured packet. `ts` is seconds relative to the first packet of the
/// trace, `length` is the captured (incl_len) length in bytes.
struct PacketRecord {
  double ts = 0.0;
  std::uint32_t length = 0;
  Direction direction = Direction::downlink;

  friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

/// IPv4 address of the rendering server; packets sourced from it are downlink.
class EndpointFilter {
 public:
  explicit EndpointFilter(std::string_view server_address, std::optional<int> port = std::nullopt);

  std::uint32_t address() const noexcept { return address_; }
  std::optional<std::uint16_t> port() const noexcept { return port_; }
  std::string address_string() const;

 private:
  std::uint32_t address_;
  std::optional<std::uint16_t> port_;
};

/// Parses a dotted-quad IPv4 address into host byte order. Returns nullopt on
/// malformed input.
std::optional<std::uint32_t> parse_ipv4(std::string_view text);

struct PcapParseResult {
  std::vector<PacketRecord> packets;
  /// Non-IPv4, non-TCP/UDP, VLAN-tagged, IPv6 or non-matching packets.
  std::size_t skipped = 0;
  /// Set when a record header promised more bytes than remained.
  bool truncated = false;
  std::size_t warnings = 0;
};

/// Classic pcap (microsecond or nanosecond magic, either byte order),
/// Ethernet link type.
PcapParseResult parse_pcap(std::span<const std::uint8_t> bytes, const EndpointFilter& filter);

PcapParseResult read_pcap_file(const std::string& path, const EndpointFilter& filter);

/// CSV with header `ts,length,direction`, direction in {up,down}. LF or CRLF.
std::vector<PacketRecord> parse_csv(std::istream& in);
std::vector<PacketRecord> parse_csv(std::string_view text);

/// Emits records with LF endings; timestamps use the shortest representation
/// that round-trips exactly.
void emit_csv(std::ostream& out, std::span<const PacketRecord> packets);
std::string emit_csv(std::span<const PacketRecord> packets);

/// output[0] = 0, output[i] = ts[i] - ts[i-1].
std::vector<double> inter_arrival(std::span<const PacketRecord> packets);

struct PcapWriteOptions {
  std::string server_address = "10.0.0.1";
  std::string client_address = "10.0.0.2";
  std::uint16_t server_port = 50000;
  std::uint16_t client_port = 50001;
  /// Absolute capture time of ts = 0.
  std::uint32_t base_seconds = 1700000000;
};

/// Writes Ethernet/IPv4/UDP packets whose captured length equals each
/// record's length. Timestamps are rounded to whole microseconds; lengths
/// below 42 bytes (the header stack) are rejected.
std::vector<std::uint8_t> write_pcap(std::span<const PacketRecord> packets,
                                     const PcapWriteOptions& options = {});

}  // namespace xrcast::trace
