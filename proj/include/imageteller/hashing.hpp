#pragma once

#include "imageteller/domain.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace imageteller {

std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_hex(std::string_view text);

/// First 8 hex digits of the SHA-256 digest; the short tag used by the mock
/// backends and versioned media references.
std::string hash8(std::span<const std::uint8_t> data);
std::string hash8(std::string_view text);

std::string base64_encode(std::span<const std::uint8_t> data);
/// Standard alphabet; ignores whitespace. Returns nullopt on malformed input.
std::optional<Bytes> base64_decode(std::string_view text);

} // namespace imageteller
