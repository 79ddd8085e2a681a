#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "portraitgen/geometry.h"

namespace portraitgen {

/// Where an image's pixel grid came from: the file stem of the source asset
/// and the map from source pixel coordinates to this image's coordinates.
/// Fixture-driven backends use it to locate and re-project sidecars.
struct Provenance {
    std::string source;
    Affine2 transform;
    std::optional<std::uint64_t> seed;
};

/// 8-bit interleaved image. Single-channel images double as binary masks (0/255).
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;
    Provenance provenance;

    Image() = default;
    Image(int w, int h, int c, std::uint8_t fill = 0);

    bool empty() const { return width <= 0 || height <= 0 || channels <= 0; }
    std::size_t index(int x, int y, int c = 0) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
                   static_cast<std::size_t>(channels) +
               static_cast<std::size_t>(c);
    }
    std::uint8_t at(int x, int y, int c = 0) const { return pixels[index(x, y, c)]; }
    std::uint8_t& at(int x, int y, int c = 0) { return pixels[index(x, y, c)]; }

    /// Pixel-content equality; provenance is ignored.
    bool same_pixels(const Image& other) const {
        return width == other.width && height == other.height && channels == other.channels &&
               pixels == other.pixels;
    }
};

using Mask = Image;

/// Throws invalid-input for empty or inconsistent images.
void require_valid(const Image& image, const char* what);
void require_mask_for(const Mask& mask, const Image& image);

Mask make_mask(int width, int height);
bool mask_set(const Mask& mask, int x, int y);
std::size_t mask_count(const Mask& mask);
Mask mask_complement(const Mask& mask);
Mask mask_union(const Mask& a, const Mask& b);
/// a AND NOT b.
Mask mask_subtract(const Mask& a, const Mask& b);
bool masks_intersect(const Mask& a, const Mask& b);
std::optional<CropRect> mask_bounds(const Mask& mask);
/// Filled axis-aligned ellipse inscribed in `box` (clipped to the mask).
void fill_ellipse(Mask& mask, const CropRect& box);
void fill_rect(Mask& mask, const CropRect& box);

/// Pixel content digest (dimensions + bytes), hex.
std::string image_digest(const Image& image);

Image to_gray(const Image& image);
Image crop(const Image& image, const CropRect& rect);
/// Pads every side by the given amounts with `fill`.
Image pad(const Image& image, int left, int top, int right, int bottom, std::uint8_t fill = 0);
Image resize_nearest(const Image& image, int width, int height);
/// Writes `patch` into `target` at (left, top), pixels where `write_mask` (in patch
/// coordinates, may be empty for "all") is set.
void paste(Image& target, const Image& patch, int left, int top, const Mask* write_mask = nullptr);

Image load_png(const std::filesystem::path& path);
void save_png(const Image& image, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_png(const Image& image);
Image decode_png(std::span<const std::uint8_t> bytes);

/// Loads an image and sets its provenance source to the path without extension.
Image load_image_asset(const std::filesystem::path& path);
bool is_image_path(const std::filesystem::path& path);

}  // namespace portraitgen
