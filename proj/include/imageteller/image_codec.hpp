#pragma once

#include "imageteller/domain.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>

namespace imageteller {

struct ImageInfo {
    MediaType type;
    std::uint32_t width = 0;
    std::uint32_t height = 0;
};

/// Reads the container header for the format and pixel dimensions. Does not
/// decode pixel data.
std::optional<ImageInfo> probe_image(std::span<const std::uint8_t> data) noexcept;

/// Encodes 8-bit RGB pixels (row-major, 3 bytes per pixel) as a PNG.
Bytes encode_png_rgb(std::uint32_t width, std::uint32_t height, std::span<const std::uint8_t> rgb);

using Rgb = std::array<std::uint8_t, 3>;

/// Solid `background` canvas with `label` (digits only) drawn in a contrasting
/// colour as a blocky 3x5 glyph pattern, repeated across the canvas.
Bytes render_placeholder_png(std::uint32_t width, std::uint32_t height, Rgb background, std::string_view label);

} // namespace imageteller
