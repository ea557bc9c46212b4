#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "canids/error.hpp"

namespace canids {

enum class AttackKind : std::uint8_t { DoS, Fuzzy, Spoofing, Replay };

inline constexpr std::array<AttackKind, 4> kAllAttackKinds = {AttackKind::DoS, AttackKind::Fuzzy,
                                                              AttackKind::Spoofing, AttackKind::Replay};

/// Lower-case token used in logs and manifests: dos, fuzzy, spoofing, replay.
std::string_view to_string(AttackKind kind) noexcept;
std::optional<AttackKind> parse_attack_kind(std::string_view token) noexcept;

inline constexpr std::uint32_t kMaxStandardId = 0x7FF;
inline constexpr std::uint32_t kMaxExtendedId = 0x1FFF'FFFF;
inline constexpr std::size_t kMaxDlc = 8;

/// One classic CAN data frame as it appears in a log.
///
/// Payload bytes beyond `dlc` are kept zero so that defaulted equality is
/// field-for-field equality of the logical frame.
struct CanFrame {
  std::uint64_t timestamp_us = 0;
  std::uint32_t id = 0;
  bool extended = false;
  std::uint8_t dlc = 0;
  std::array<std::uint8_t, kMaxDlc> payload{};
  std::optional<AttackKind> injected;  // nullopt = Normal

  std::span<const std::uint8_t> data() const noexcept { return {payload.data(), dlc}; }
  bool is_injected() const noexcept { return injected.has_value(); }

  friend bool operator==(const CanFrame&, const CanFrame&) = default;
};

/// Checks the id range and dlc invariants; throws IdOutOfRange / DlcOutOfRange.
void validate_frame(const CanFrame& frame);

/// Error for a single log line; carries the 1-based line number when known.
class LineError : public Error {
 public:
  LineError(ErrorCode code, std::size_t line, const std::string& what)
      : Error(code, "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Parses `<ts> <id-hex> <dlc> <bytes...> [#label=<kind>]`.
///
/// Timestamps are decimal seconds with up to six fractional digits. An ID
/// token of at most four hex digits is a standard 11-bit ID; five to eight
/// digits mark an extended 29-bit ID.
CanFrame parse_line(std::string_view line);

/// Canonical line for `frame`: single spaces, lower-case hex, standard IDs
/// padded to 3 digits and extended IDs to 8, payload bytes as 2 digits.
std::string serialize_frame(const CanFrame& frame);

struct ParseOptions {
  bool strict = false;
};

struct ParseIssue {
  std::size_t line = 0;
  ErrorCode kind = ErrorCode::MalformedLine;
  std::string raw;
};

struct ParseWarning {
  std::size_t line = 0;
  std::string text;
};

struct ParseReport {
  std::size_t frames_ok = 0;
  std::vector<ParseIssue> errors;
  std::vector<ParseWarning> warnings;
};

/// Pull-style reader: one frame per call, constant memory. Used by
/// `parse_log` and by the streaming detector.
class LogReader {
 public:
  explicit LogReader(std::istream& in, ParseOptions options = {});

  /// Next well-formed frame, or nullopt at end of stream. In strict mode the
  /// first bad line throws LineError; otherwise it is recorded and skipped.
  std::optional<CanFrame> next();

  const ParseReport& report() const noexcept { return report_; }

 private:
  std::istream& in_;
  ParseOptions options_;
  ParseReport report_;
  std::size_t line_no_ = 0;
  std::optional<std::uint64_t> last_ts_;
};

struct ParsedLog {
  std::vector<CanFrame> frames;
  ParseReport report;
};

ParsedLog parse_log(std::istream& in, ParseOptions options = {});
/// Throws IoError if the file cannot be opened.
ParsedLog parse_log_file(const std::string& path, ParseOptions options = {});

void write_log(std::ostream& out, std::span<const CanFrame> frames);
void write_log_file(const std::string& path, std::span<const CanFrame> frames);

}  // namespace canids
