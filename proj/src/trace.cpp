#include "xrcast/trace.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "xrcast/error.hpp"

namespace xrcast::trace {

namespace {

constexpr std::string_view kModule = "trace-ingest";

constexpr std::uint32_t kMagicMicros = 0xa1b2c3d4;
constexpr std::uint32_t kMagicMicrosSwapped = 0xd4c3b2a1;
constexpr std::uint32_t kMagicNanos = 0xa1b23c4d;
constexpr std::uint32_t kMagicNanosSwapped = 0x4d3cb2a1;
constexpr std::uint32_t kMagicPcapng = 0x0a0d0d0a;
constexpr std::uint32_t kLinkEthernet = 1;

constexpr std::size_t kGlobalHeaderSize = 24;
constexpr std::size_t kRecordHeaderSize = 16;
constexpr std::size_t kEthernetHeaderSize = 14;
constexpr std::size_t kMinFrameSize = 14 + 20 + 8;

std::uint32_t load_le32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

std::uint32_t byteswap32(std::uint32_t v) {
  return ((v & 0xffU) << 24) | ((v & 0xff00U) << 8) | ((v >> 8) & 0xff00U) | (v >> 24);
}

std::uint16_t load_be16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

std::uint32_t load_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

void store_le16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void store_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void store_be16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v >> 8);
  p[1] = static_cast<std::uint8_t>(v);
}

void store_be32(std::uint8_t* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (24 - 8 * i));
}

struct Endpoints {
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
};

// Extracts IPv4 endpoints from an Ethernet frame carrying TCP or UDP.
std::optional<Endpoints> decode_ipv4(std::span<const std::uint8_t> frame) {
  if (frame.size() < kEthernetHeaderSize + 20) return std::nullopt;
  if (load_be16(frame.data() + 12) != 0x0800) return std::nullopt;  // VLAN, IPv6, ARP...
  const std::uint8_t* ip = frame.data() + kEthernetHeaderSize;
  if ((ip[0] >> 4) != 4) return std::nullopt;
  const std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0f) * 4;
  if (ihl < 20) return std::nullopt;
  const std::uint8_t proto = ip[9];
  if (proto != 6 && proto != 17) return std::nullopt;
  if (frame.size() < kEthernetHeaderSize + ihl + 4) return std::nullopt;
  Endpoints e;
  e.src = load_be32(ip + 12);
  e.dst = load_be32(ip + 16);
  e.src_port = load_be16(ip + ihl);
  e.dst_port = load_be16(ip + ihl + 2);
  return e;
}

[[noreturn]] void row_error(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::RowParseError, kModule, "line " + std::to_string(line) + ": " + what);
}

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

}  // namespace

std::string_view to_string(Direction d) noexcept {
  return d == Direction::downlink ? "down" : "up";
}

std::optional<std::uint32_t> parse_ipv4(std::string_view text) {
  std::uint32_t value = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int octet = 0; octet < 4; ++octet) {
    if (octet > 0) {
      if (p == end || *p != '.') return std::nullopt;
      ++p;
    }
    unsigned part = 0;
    auto [next, ec] = std::from_chars(p, end, part);
    if (ec != std::errc{} || next == p || next - p > 3 || part > 255) return std::nullopt;
    value = (value << 8) | part;
    p = next;
  }
  if (p != end) return std::nullopt;
  return value;
}

EndpointFilter::EndpointFilter(std::string_view server_address, std::optional<int> port) {
  auto addr = parse_ipv4(server_address);
  if (!addr) {
    throw Error(ErrorCode::BadFilter, kModule,
                "server address '" + std::string(server_address) + "' is not a dotted quad");
  }
  address_ = *addr;
  if (port) {
    if (*port < 0 || *port > 65535) {
      throw Error(ErrorCode::BadFilter, kModule, "port " + std::to_string(*port) + " out of range");
    }
    port_ = static_cast<std::uint16_t>(*port);
  }
}

std::string EndpointFilter::address_string() const {
  return std::to_string(address_ >> 24) + "." + std::to_string((address_ >> 16) & 0xff) + "." +
         std::to_string((address_ >> 8) & 0xff) + "." + std::to_string(address_ & 0xff);
}

PcapParseResult parse_pcap(std::span<const std::uint8_t> bytes, const EndpointFilter& filter) {
  if (bytes.size() < kGlobalHeaderSize) {
    throw Error(ErrorCode::TruncatedHeader, kModule,
                "stream has " + std::to_string(bytes.size()) + " bytes, global header needs 24");
  }
  const std::uint32_t magic = load_le32(bytes.data());
  bool swapped = false;
  double units_per_second = 1e6;
  switch (magic) {
    case kMagicMicros: break;
    case kMagicMicrosSwapped: swapped = true; break;
    case kMagicNanos: units_per_second = 1e9; break;
    case kMagicNanosSwapped: swapped = true; units_per_second = 1e9; break;
    case kMagicPcapng:
      throw Error(ErrorCode::BadMagic, kModule,
                  "pcapng is not supported; export the capture as classic pcap");
    default: {
      std::ostringstream msg;
      msg << "unknown magic 0x" << std::hex << magic;
      throw Error(ErrorCode::BadMagic, kModule, msg.str());
    }
  }
  auto u32 = [swapped](const std::uint8_t* p) {
    const std::uint32_t v = load_le32(p);
    return swapped ? byteswap32(v) : v;
  };
  const std::uint32_t network = u32(bytes.data() + 20);
  if (network != kLinkEthernet) {
    throw Error(ErrorCode::BadLinkType, kModule,
                "link type " + std::to_string(network) + " is not Ethernet (1)");
  }

  PcapParseResult result;
  std::optional<std::int64_t> origin;
  std::size_t offset = kGlobalHeaderSize;
  const auto units = static_cast<std::int64_t>(units_per_second);
  while (offset < bytes.size()) {
    if (bytes.size() - offset < kRecordHeaderSize) {
      result.truncated = true;
      ++result.warnings;
      break;
    }
    const std::uint8_t* rec = bytes.data() + offset;
    const std::int64_t stamp = std::int64_t{u32(rec)} * units + std::int64_t{u32(rec + 4)};
    const std::uint32_t incl_len = u32(rec + 8);
    offset += kRecordHeaderSize;
    if (incl_len > bytes.size() - offset) {
      result.truncated = true;
      ++result.warnings;
      break;
    }
    const auto frame = bytes.subspan(offset, incl_len);
    offset += incl_len;

    const auto ep = decode_ipv4(frame);
    if (!ep) {
      ++result.skipped;
      continue;
    }
    const bool from_server = ep->src == filter.address();
    const bool to_server = ep->dst == filter.address();
    bool matches = from_server || to_server;
    if (matches && filter.port()) {
      const std::uint16_t server_port = from_server ? ep->src_port : ep->dst_port;
      matches = server_port == *filter.port();
    }
    if (!matches || incl_len == 0) {
      ++result.skipped;
      continue;
    }
    if (!origin) origin = stamp;
    PacketRecord rec_out;
    rec_out.ts = static_cast<double>(stamp - *origin) / units_per_second;
    rec_out.length = incl_len;
    rec_out.direction = from_server ? Direction::downlink : Direction::uplink;
    result.packets.push_back(rec_out);
  }
  return result;
}

PcapParseResult read_pcap_file(const std::string& path, const EndpointFilter& filter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, kModule, "cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_pcap(bytes, filter);
}

std::vector<PacketRecord> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim_cr(line) != "ts,length,direction") {
    throw Error(ErrorCode::SchemaMismatch, kModule,
                "expected header 'ts,length,direction', got '" + std::string(trim_cr(line)) + "'");
  }
  std::vector<PacketRecord> out;
  double first_ts = 0.0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = trim_cr(line);
    if (row.empty()) continue;
    const auto c1 = row.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : row.find(',', c1 + 1);
    if (c2 == std::string_view::npos || row.find(',', c2 + 1) != std::string_view::npos) {
      row_error(line_no, "expected 3 fields");
    }
    const std::string_view ts_text = row.substr(0, c1);
    const std::string_view len_text = row.substr(c1 + 1, c2 - c1 - 1);
    const std::string_view dir_text = row.substr(c2 + 1);

    double ts = 0.0;
    auto r1 = std::from_chars(ts_text.data(), ts_text.data() + ts_text.size(), ts);
    if (r1.ec != std::errc{} || r1.ptr != ts_text.data() + ts_text.size() || !std::isfinite(ts)) {
      row_error(line_no, "bad ts '" + std::string(ts_text) + "'");
    }
    std::uint32_t length = 0;
    auto r2 = std::from_chars(len_text.data(), len_text.data() + len_text.size(), length);
    if (r2.ec != std::errc{} || r2.ptr != len_text.data() + len_text.size() || length == 0) {
      row_error(line_no, "bad length '" + std::string(len_text) + "'");
    }
    Direction dir;
    if (dir_text == "down") {
      dir = Direction::downlink;
    } else if (dir_text == "up") {
      dir = Direction::uplink;
    } else {
      row_error(line_no, "bad direction '" + std::string(dir_text) + "'");
    }
    if (out.empty()) first_ts = ts;
    const double rel = ts - first_ts;
    if (!out.empty() && rel < out.back().ts) row_error(line_no, "timestamps decrease");
    out.push_back({rel, length, dir});
  }
  return out;
}

std::vector<PacketRecord> parse_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_csv(in);
}

void emit_csv(std::ostream& out, std::span<const PacketRecord> packets) {
  out << "ts,length,direction\n";
  std::array<char, 64> buf{};
  for (const auto& p : packets) {
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), p.ts);
    out.write(buf.data(), end - buf.data());
    out << ',' << p.length << ',' << to_string(p.direction) << '\n';
  }
}

std::string emit_csv(std::span<const PacketRecord> packets) {
  std::ostringstream out;
  emit_csv(out, packets);
  return out.str();
}

std::vector<double> inter_arrival(std::span<const PacketRecord> packets) {
  if (packets.empty()) throw Error(ErrorCode::EmptyTrace, kModule, "no packets");
  std::vector<double> out(packets.size(), 0.0);
  for (std::size_t i = 1; i < packets.size(); ++i) {
    out[i] = packets[i].ts - packets[i - 1].ts;
  }
  return out;
}

std::vector<std::uint8_t> write_pcap(std::span<const PacketRecord> packets,
                                     const PcapWriteOptions& options) {
  const auto server = parse_ipv4(options.server_address);
  const auto client = parse_ipv4(options.client_address);
  if (!server || !client) throw Error(ErrorCode::BadFilter, kModule, "bad writer address");

  std::vector<std::uint8_t> out;
  store_le32(out, kMagicMicros);
  store_le16(out, 2);
  store_le16(out, 4);
  store_le32(out, 0);       // thiszone
  store_le32(out, 0);       // sigfigs
  store_le32(out, 65535);   // snaplen
  store_le32(out, kLinkEthernet);

  std::uint16_t ip_id = 0;
  for (const auto& p : packets) {
    if (p.length < kMinFrameSize || p.length > 65535) {
      throw Error(ErrorCode::BadArgument, kModule,
                  "packet length " + std::to_string(p.length) + " outside [42, 65535]");
    }
    const auto micros = static_cast<std::int64_t>(std::llround(p.ts * 1e6)) +
                        std::int64_t{options.base_seconds} * 1000000;
    store_le32(out, static_cast<std::uint32_t>(micros / 1000000));
    store_le32(out, static_cast<std::uint32_t>(micros % 1000000));
    store_le32(out, p.length);
    store_le32(out, p.length);

    std::vector<std::uint8_t> frame(p.length, 0);
    const bool down = p.direction == Direction::downlink;
    // MACs: 02:00:00:00:00:01 server, :02 client.
    frame[5] = down ? 2 : 1;
    frame[11] = down ? 1 : 2;
    frame[0] = frame[6] = 0x02;
    store_be16(frame.data() + 12, 0x0800);
    std::uint8_t* ip = frame.data() + kEthernetHeaderSize;
    ip[0] = 0x45;
    store_be16(ip + 2, static_cast<std::uint16_t>(p.length - kEthernetHeaderSize));
    store_be16(ip + 4, ip_id++);
    ip[8] = 64;
    ip[9] = 17;
    store_be32(ip + 12, down ? *server : *client);
    store_be32(ip + 16, down ? *client : *server);
    std::uint32_t sum = 0;
    for (int i = 0; i < 20; i += 2) sum += load_be16(ip + i);
    while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
    store_be16(ip + 10, static_cast<std::uint16_t>(~sum));
    std::uint8_t* udp = ip + 20;
    store_be16(udp, down ? options.server_port : options.client_port);
    store_be16(udp + 2, down ? options.client_port : options.server_port);
    store_be16(udp + 4, static_cast<std::uint16_t>(p.length - kEthernetHeaderSize - 20));
    out.insert(out.end(), frame.begin(), frame.end());
  }
  return out;
}

}  // namespace xrcast::trace
