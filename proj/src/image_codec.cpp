#include "imageteller/image_codec.hpp"

#include <zlib.h>

#include <algorithm>
#include <stdexcept>
#include <string_view>

namespace imageteller {

namespace {

std::uint32_t be32(std::span<const std::uint8_t> d, std::size_t at)
{
    return (std::uint32_t{d[at]} << 24) | (std::uint32_t{d[at + 1]} << 16) | (std::uint32_t{d[at + 2]} << 8) |
           std::uint32_t{d[at + 3]};
}

std::uint32_t le16(std::span<const std::uint8_t> d, std::size_t at)
{
    return std::uint32_t{d[at]} | (std::uint32_t{d[at + 1]} << 8);
}

std::uint32_t le24(std::span<const std::uint8_t> d, std::size_t at)
{
    return le16(d, at) | (std::uint32_t{d[at + 2]} << 16);
}

std::optional<ImageInfo> probe_jpeg(std::span<const std::uint8_t> d)
{
    std::size_t pos = 2;
    while (pos + 4 <= d.size()) {
        if (d[pos] != 0xFF)
            return std::nullopt;
        const std::uint8_t marker = d[pos + 1];
        if (marker == 0xFF) {
            ++pos;
            continue;
        }
        if (marker == 0xD8 || marker == 0x01 || (marker >= 0xD0 && marker <= 0xD7)) {
            pos += 2;
            continue;
        }
        const std::uint32_t len = (std::uint32_t{d[pos + 2]} << 8) | d[pos + 3];
        const bool sof = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 && marker != 0xC8 && marker != 0xCC;
        if (sof) {
            if (pos + 9 > d.size())
                return std::nullopt;
            const std::uint32_t h = (std::uint32_t{d[pos + 5]} << 8) | d[pos + 6];
            const std::uint32_t w = (std::uint32_t{d[pos + 7]} << 8) | d[pos + 8];
            return ImageInfo{MediaType::Jpeg, w, h};
        }
        pos += 2 + len;
    }
    return std::nullopt;
}

std::optional<ImageInfo> probe_webp(std::span<const std::uint8_t> d)
{
    if (d.size() < 30)
        return std::nullopt;
    const std::string_view chunk(reinterpret_cast<const char*>(d.data()) + 12, 4);
    if (chunk == "VP8 ") {
        if (d[23] != 0x9d || d[24] != 0x01 || d[25] != 0x2a)
            return std::nullopt;
        return ImageInfo{MediaType::Webp, le16(d, 26) & 0x3FFF, le16(d, 28) & 0x3FFF};
    }
    if (chunk == "VP8L") {
        if (d[20] != 0x2f)
            return std::nullopt;
        const std::uint32_t bits = le16(d, 21) | (le16(d, 23) << 16);
        return ImageInfo{MediaType::Webp, (bits & 0x3FFF) + 1, ((bits >> 14) & 0x3FFF) + 1};
    }
    if (chunk == "VP8X")
        return ImageInfo{MediaType::Webp, le24(d, 24) + 1, le24(d, 27) + 1};
    return std::nullopt;
}

void put_be32(Bytes& out, std::uint32_t v)
{
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(Bytes& out, std::string_view type, std::span<const std::uint8_t> payload)
{
    put_be32(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t type_at = out.size();
    out.insert(out.end(), type.begin(), type.end());
    out.insert(out.end(), payload.begin(), payload.end());
    const auto crc = ::crc32(0L, out.data() + type_at, static_cast<uInt>(out.size() - type_at));
    put_be32(out, static_cast<std::uint32_t>(crc));
}

// 3x5 glyphs for 0-9, one row per 3 bits (MSB = left column).
constexpr std::uint8_t kDigits[10][5] = {
    {7, 5, 5, 5, 7}, {2, 6, 2, 2, 7}, {7, 1, 7, 4, 7}, {7, 1, 7, 1, 7}, {5, 5, 7, 1, 1},
    {7, 4, 7, 1, 7}, {7, 4, 7, 5, 7}, {7, 1, 1, 1, 1}, {7, 5, 7, 5, 7}, {7, 5, 7, 1, 7},
};

} // namespace

std::optional<ImageInfo> probe_image(std::span<const std::uint8_t> data) noexcept
{
    const auto type = sniff_media_type(data);
    if (!type)
        return std::nullopt;
    switch (*type) {
    case MediaType::Png:
        if (data.size() < 24 || std::string_view(reinterpret_cast<const char*>(data.data()) + 12, 4) != "IHDR")
            return std::nullopt;
        return ImageInfo{MediaType::Png, be32(data, 16), be32(data, 20)};
    case MediaType::Jpeg:
        return probe_jpeg(data);
    case MediaType::Webp:
        return probe_webp(data);
    }
    return std::nullopt;
}

Bytes encode_png_rgb(std::uint32_t width, std::uint32_t height, std::span<const std::uint8_t> rgb)
{
    const std::size_t stride = std::size_t{width} * 3;
    if (width == 0 || height == 0 || rgb.size() != stride * height)
        throw std::invalid_argument("encode_png_rgb: pixel buffer does not match dimensions");

    Bytes raw;
    raw.reserve((stride + 1) * height);
    for (std::uint32_t y = 0; y < height; ++y) {
        raw.push_back(0); // filter: none
        const auto row = rgb.subspan(y * stride, stride);
        raw.insert(raw.end(), row.begin(), row.end());
    }
    uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
    Bytes packed(packed_size);
    if (compress2(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("encode_png_rgb: deflate failed");
    packed.resize(packed_size);

    Bytes out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    Bytes ihdr;
    put_be32(ihdr, width);
    put_be32(ihdr, height);
    ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0}); // 8-bit, truecolour, deflate, no filter, no interlace
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", packed);
    put_chunk(out, "IEND", {});
    return out;
}

Bytes render_placeholder_png(std::uint32_t width, std::uint32_t height, Rgb background, std::string_view label)
{
    const Rgb ink = {static_cast<std::uint8_t>(255 - background[0]), static_cast<std::uint8_t>(255 - background[1]),
                     static_cast<std::uint8_t>(255 - background[2])};
    std::vector<std::uint8_t> pixels(std::size_t{width} * height * 3);
    for (std::size_t i = 0; i < pixels.size(); i += 3) {
        pixels[i] = background[0];
        pixels[i + 1] = background[1];
        pixels[i + 2] = background[2];
    }

    const std::uint32_t cell = std::max<std::uint32_t>(1, std::min(width, height) / 64);
    const std::uint32_t glyph_w = 4 * cell; // 3 columns + 1 spacing
    const std::uint32_t glyph_h = 6 * cell;
    std::uint32_t x = 0;
    std::uint32_t y = 0;
    std::size_t k = 0;
    while (!label.empty() && y + glyph_h <= height) {
        const char ch = label[k % label.size()];
        if (ch >= '0' && ch <= '9') {
            const auto& glyph = kDigits[ch - '0'];
            for (std::uint32_t gy = 0; gy < 5 * cell; ++gy)
                for (std::uint32_t gx = 0; gx < 3 * cell; ++gx)
                    if (glyph[gy / cell] & (4 >> (gx / cell))) {
                        const std::size_t p = (std::size_t{y + gy} * width + x + gx) * 3;
                        pixels[p] = ink[0];
                        pixels[p + 1] = ink[1];
                        pixels[p + 2] = ink[2];
                    }
        }
        ++k;
        x += glyph_w;
        if (k % label.size() == 0)
            x += glyph_w; // gap between repetitions
        if (x + glyph_w > width) {
            x = 0;
            y += glyph_h;
        }
    }
    return encode_png_rgb(width, height, pixels);
}

} // namespace imageteller
