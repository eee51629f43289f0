#include "iccs/conduit/frame.hpp"

#include <fmt/format.h>

#include "iccs/error.hpp"

namespace iccs::conduit {

namespace {

void put_length(std::vector<std::uint8_t>& out, std::uint32_t n) {
  out.push_back(static_cast<std::uint8_t>(n >> 24));
  out.push_back(static_cast<std::uint8_t>(n >> 16));
  out.push_back(static_cast<std::uint8_t>(n >> 8));
  out.push_back(static_cast<std::uint8_t>(n));
}

std::uint32_t get_length(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

}  // namespace

std::vector<std::uint8_t> encode_frame(std::span<const std::uint8_t> payload) {
  if (payload.size() > 0xFFFFFFFFull) {
    throw Error(ErrorCode::kBadArgs, "payload too large for a frame");
  }
  std::vector<std::uint8_t> out;
  out.reserve(payload.size() + 4);
  put_length(out, static_cast<std::uint32_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

std::vector<std::uint8_t> encode_frame(std::string_view payload) {
  return encode_frame(std::span(reinterpret_cast<const std::uint8_t*>(payload.data()),
                                payload.size()));
}

std::optional<std::vector<std::uint8_t>> decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) return std::nullopt;
  std::size_t n = get_length(bytes.data());
  if (bytes.size() - 4 < n) return std::nullopt;
  return std::vector<std::uint8_t>(bytes.begin() + 4, bytes.begin() + 4 + n);
}

void FrameDecoder::feed(std::span<const std::uint8_t> bytes) {
  if (offset_ > 0 && offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
  if (buffer_.size() - offset_ >= 4) {
    std::size_t n = get_length(buffer_.data() + offset_);
    if (n > max_payload_) {
      throw Error(ErrorCode::kCommFailure, fmt::format("frame of {} bytes exceeds limit", n));
    }
  }
}

std::optional<std::string> FrameDecoder::next() {
  std::size_t avail = buffer_.size() - offset_;
  if (avail < 4) return std::nullopt;
  std::size_t n = get_length(buffer_.data() + offset_);
  if (n > max_payload_) {
    throw Error(ErrorCode::kCommFailure, fmt::format("frame of {} bytes exceeds limit", n));
  }
  if (avail - 4 < n) return std::nullopt;
  const char* start = reinterpret_cast<const char*>(buffer_.data() + offset_ + 4);
  std::string payload(start, n);
  offset_ += 4 + n;
  // Compact once the consumed prefix dominates the buffer.
  if (offset_ > 4096 && offset_ * 2 > buffer_.size()) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(offset_));
    offset_ = 0;
  }
  return payload;
}

}  // namespace iccs::conduit
