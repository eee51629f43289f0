#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace iccs::conduit {

/// 4-byte big-endian length, then the payload bytes.
std::vector<std::uint8_t> encode_frame(std::span<const std::uint8_t> payload);
std::vector<std::uint8_t> encode_frame(std::string_view payload);

/// Decodes exactly one complete frame. Returns nullopt for a truncated frame;
/// trailing bytes beyond the frame are ignored.
std::optional<std::vector<std::uint8_t>> decode_frame(std::span<const std::uint8_t> bytes);

/// Incremental decoder for a byte stream.
class FrameDecoder {
 public:
  explicit FrameDecoder(std::size_t max_payload = 64u << 20) : max_payload_(max_payload) {}

  /// Appends raw bytes. Throws COMM_FAILURE when a length prefix exceeds the limit.
  void feed(std::span<const std::uint8_t> bytes);
  std::optional<std::string> next();

 private:
  std::size_t max_payload_;
  std::vector<std::uint8_t> buffer_;
  std::size_t offset_ = 0;
};

}  // namespace iccs::conduit
