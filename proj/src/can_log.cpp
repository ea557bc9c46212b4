#include "canids/can_log.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

namespace canids {

namespace {

constexpr std::string_view kLabelPrefix = "#label=";

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

bool is_comment(std::string_view line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos != std::string_view::npos && line[pos] == '#';
}

std::uint64_t parse_timestamp(std::string_view token) {
  const auto dot = token.find('.');
  const auto whole = token.substr(0, dot);
  if (whole.empty()) throw Error(ErrorCode::MalformedLine, "empty timestamp");
  std::uint64_t seconds = 0;
  auto [p, ec] = std::from_chars(whole.data(), whole.data() + whole.size(), seconds);
  if (ec != std::errc{} || p != whole.data() + whole.size()) {
    throw Error(ErrorCode::MalformedLine, "bad timestamp '" + std::string(token) + "'");
  }
  std::uint64_t micros = 0;
  if (dot != std::string_view::npos) {
    const auto frac = token.substr(dot + 1);
    if (frac.empty() || frac.size() > 6) {
      throw Error(ErrorCode::MalformedLine, "timestamp fraction must have 1-6 digits");
    }
    for (char c : frac) {
      if (c < '0' || c > '9') throw Error(ErrorCode::MalformedLine, "bad timestamp fraction");
      micros = micros * 10 + static_cast<std::uint64_t>(c - '0');
    }
    for (std::size_t i = frac.size(); i < 6; ++i) micros *= 10;
  }
  if (seconds > (UINT64_MAX - micros) / 1'000'000) throw Error(ErrorCode::MalformedLine, "timestamp overflow");
  return seconds * 1'000'000 + micros;
}

std::uint32_t parse_hex(std::string_view token, const char* what) {
  std::uint32_t value = 0;
  auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), value, 16);
  if (token.empty() || ec != std::errc{} || p != token.data() + token.size()) {
    throw Error(ErrorCode::BadHex, std::string(what) + " '" + std::string(token) + "'");
  }
  return value;
}

}  // namespace

std::string_view to_string(AttackKind kind) noexcept {
  switch (kind) {
    case AttackKind::DoS: return "dos";
    case AttackKind::Fuzzy: return "fuzzy";
    case AttackKind::Spoofing: return "spoofing";
    case AttackKind::Replay: return "replay";
  }
  return "unknown";
}

std::optional<AttackKind> parse_attack_kind(std::string_view token) noexcept {
  for (auto kind : kAllAttackKinds) {
    if (to_string(kind) == token) return kind;
  }
  return std::nullopt;
}

void validate_frame(const CanFrame& frame) {
  const auto limit = frame.extended ? kMaxExtendedId : kMaxStandardId;
  if (frame.id > limit) throw Error(ErrorCode::IdOutOfRange, "id " + std::to_string(frame.id));
  if (frame.dlc > kMaxDlc) throw Error(ErrorCode::DlcOutOfRange, "dlc " + std::to_string(frame.dlc));
}

CanFrame parse_line(std::string_view line) {
  auto tokens = split_ws(line);
  CanFrame frame;
  if (!tokens.empty() && tokens.back().starts_with(kLabelPrefix)) {
    const auto kind = parse_attack_kind(tokens.back().substr(kLabelPrefix.size()));
    if (!kind) throw Error(ErrorCode::MalformedLine, "unknown label '" + std::string(tokens.back()) + "'");
    frame.injected = kind;
    tokens.pop_back();
  }
  if (tokens.size() < 3) {
    throw Error(ErrorCode::MalformedLine, "expected at least 3 fields, got " + std::to_string(tokens.size()));
  }

  frame.timestamp_us = parse_timestamp(tokens[0]);

  const auto id_token = tokens[1];
  if (id_token.size() > 8) throw Error(ErrorCode::IdOutOfRange, "id '" + std::string(id_token) + "'");
  frame.id = parse_hex(id_token, "id");
  frame.extended = id_token.size() > 4;

  unsigned dlc = 0;
  auto [p, ec] = std::from_chars(tokens[2].data(), tokens[2].data() + tokens[2].size(), dlc);
  if (ec != std::errc{} || p != tokens[2].data() + tokens[2].size()) {
    throw Error(ErrorCode::MalformedLine, "bad dlc '" + std::string(tokens[2]) + "'");
  }
  if (dlc > kMaxDlc) throw Error(ErrorCode::DlcOutOfRange, "dlc " + std::to_string(dlc));
  frame.dlc = static_cast<std::uint8_t>(dlc);

  const std::size_t bytes = tokens.size() - 3;
  if (bytes != dlc) {
    throw Error(ErrorCode::PayloadLengthMismatch,
                "dlc " + std::to_string(dlc) + " but " + std::to_string(bytes) + " data bytes");
  }
  for (std::size_t i = 0; i < bytes; ++i) {
    const auto tok = tokens[3 + i];
    if (tok.size() != 2) throw Error(ErrorCode::BadHex, "data byte '" + std::string(tok) + "'");
    frame.payload[i] = static_cast<std::uint8_t>(parse_hex(tok, "data byte"));
  }
  validate_frame(frame);
  return frame;
}

std::string serialize_frame(const CanFrame& frame) {
  std::string out;
  out.reserve(64);
  char buf[32];
  const auto seconds = frame.timestamp_us / 1'000'000;
  const auto micros = frame.timestamp_us % 1'000'000;
  if (micros == 0) {
    std::snprintf(buf, sizeof buf, "%llu", static_cast<unsigned long long>(seconds));
  } else {
    std::snprintf(buf, sizeof buf, "%llu.%06llu", static_cast<unsigned long long>(seconds),
                  static_cast<unsigned long long>(micros));
  }
  out += buf;
  std::snprintf(buf, sizeof buf, frame.extended ? " %08x" : " %03x", frame.id);
  out += buf;
  std::snprintf(buf, sizeof buf, " %u", static_cast<unsigned>(frame.dlc));
  out += buf;
  for (auto b : frame.data()) {
    std::snprintf(buf, sizeof buf, " %02x", static_cast<unsigned>(b));
    out += buf;
  }
  if (frame.injected) {
    out += ' ';
    out += kLabelPrefix;
    out += to_string(*frame.injected);
  }
  return out;
}

LogReader::LogReader(std::istream& in, ParseOptions options) : in_(in), options_(options) {}

std::optional<CanFrame> LogReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (is_blank(line) || is_comment(line)) continue;
    try {
      CanFrame frame = parse_line(line);
      if (last_ts_ && frame.timestamp_us < *last_ts_) {
        report_.warnings.push_back({line_no_, "timestamp decreases"});
      }
      last_ts_ = frame.timestamp_us;
      ++report_.frames_ok;
      return frame;
    } catch (const Error& e) {
      if (options_.strict) throw LineError(e.code(), line_no_, e.what());
      report_.errors.push_back({line_no_, e.code(), line});
    }
  }
  if (in_.bad()) throw Error(ErrorCode::IoError, "read failed at line " + std::to_string(line_no_));
  return std::nullopt;
}

ParsedLog parse_log(std::istream& in, ParseOptions options) {
  LogReader reader(in, options);
  ParsedLog out;
  while (auto frame = reader.next()) out.frames.push_back(*frame);
  out.report = reader.report();
  return out;
}

ParsedLog parse_log_file(const std::string& path, ParseOptions options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  return parse_log(in, options);
}

void write_log(std::ostream& out, std::span<const CanFrame> frames) {
  for (const auto& f : frames) out << serialize_frame(f) << '\n';
}

void write_log_file(const std::string& path, std::span<const CanFrame> frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  write_log(out, frames);
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path + "'");
}

}  // namespace canids
