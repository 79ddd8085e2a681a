#include "portraitgen/image.h"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "portraitgen/digest.h"
#include "portraitgen/error.h"

namespace portraitgen {

Image::Image(int w, int h, int c, std::uint8_t fill) : width(w), height(h), channels(c) {
    if (w < 0 || h < 0 || c < 0) {
        throw Error(ErrorCode::invalid_input, "negative image dimensions");
    }
    pixels.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(c), fill);
}

void require_valid(const Image& image, const char* what) {
    if (image.empty()) {
        throw Error(ErrorCode::invalid_input, std::string(what) + " is empty");
    }
    if (image.channels != 1 && image.channels != 3 && image.channels != 4) {
        throw Error(ErrorCode::invalid_input, std::string(what) + " has unsupported channel count");
    }
    const auto expected = static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height) *
                          static_cast<std::size_t>(image.channels);
    if (image.pixels.size() != expected) {
        throw Error(ErrorCode::invalid_input, std::string(what) + " pixel buffer size mismatch");
    }
}

void require_mask_for(const Mask& mask, const Image& image) {
    require_valid(mask, "mask");
    if (mask.channels != 1 || mask.width != image.width || mask.height != image.height) {
        throw Error(ErrorCode::invalid_input, "mask must be single-channel with the image's dimensions");
    }
}

Mask make_mask(int width, int height) { return Mask(width, height, 1, 0); }

bool mask_set(const Mask& mask, int x, int y) { return mask.at(x, y) != 0; }

std::size_t mask_count(const Mask& mask) {
    return static_cast<std::size_t>(std::count_if(mask.pixels.begin(), mask.pixels.end(), [](auto v) { return v != 0; }));
}

Mask mask_complement(const Mask& mask) {
    Mask out = mask;
    for (auto& v : out.pixels) {
        v = v ? 0 : 255;
    }
    return out;
}

namespace {

template <class Op>
Mask combine(const Mask& a, const Mask& b, Op op) {
    if (a.width != b.width || a.height != b.height || a.channels != 1 || b.channels != 1) {
        throw Error(ErrorCode::invalid_input, "mask dimensions differ");
    }
    Mask out = a;
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        out.pixels[i] = op(a.pixels[i] != 0, b.pixels[i] != 0) ? 255 : 0;
    }
    return out;
}

}  // namespace

Mask mask_union(const Mask& a, const Mask& b) {
    return combine(a, b, [](bool x, bool y) { return x || y; });
}

Mask mask_subtract(const Mask& a, const Mask& b) {
    return combine(a, b, [](bool x, bool y) { return x && !y; });
}

bool masks_intersect(const Mask& a, const Mask& b) {
    return mask_count(combine(a, b, [](bool x, bool y) { return x && y; })) > 0;
}

std::optional<CropRect> mask_bounds(const Mask& mask) {
    CropRect r{mask.width, mask.height, 0, 0};
    bool any = false;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (mask.at(x, y)) {
                any = true;
                r.left = std::min(r.left, x);
                r.top = std::min(r.top, y);
                r.right = std::max(r.right, x + 1);
                r.bottom = std::max(r.bottom, y + 1);
            }
        }
    }
    if (!any) {
        return std::nullopt;
    }
    return r;
}

void fill_ellipse(Mask& mask, const CropRect& box) {
    const double cx = 0.5 * (box.left + box.right) - 0.5;
    const double cy = 0.5 * (box.top + box.bottom) - 0.5;
    const double rx = 0.5 * box.width();
    const double ry = 0.5 * box.height();
    if (rx <= 0.0 || ry <= 0.0) {
        return;
    }
    const int y0 = std::max(0, box.top);
    const int y1 = std::min(mask.height, box.bottom);
    const int x0 = std::max(0, box.left);
    const int x1 = std::min(mask.width, box.right);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            const double dx = (x - cx) / rx;
            const double dy = (y - cy) / ry;
            if (dx * dx + dy * dy <= 1.0) {
                mask.at(x, y) = 255;
            }
        }
    }
}

void fill_rect(Mask& mask, const CropRect& box) {
    for (int y = std::max(0, box.top); y < std::min(mask.height, box.bottom); ++y) {
        for (int x = std::max(0, box.left); x < std::min(mask.width, box.right); ++x) {
            mask.at(x, y) = 255;
        }
    }
}

std::string image_digest(const Image& image) {
    Digest d;
    d.update_value(image.width).update_value(image.height).update_value(image.channels);
    d.update(image.pixels);
    return d.hex();
}

Image to_gray(const Image& image) {
    if (image.channels == 1) {
        return image;
    }
    Image out(image.width, image.height, 1);
    out.provenance = image.provenance;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            // Integer BT.601 luma.
            const int r = image.at(x, y, 0);
            const int g = image.at(x, y, 1);
            const int b = image.at(x, y, 2);
            out.at(x, y) = static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
        }
    }
    return out;
}

Image crop(const Image& image, const CropRect& rect) {
    if (rect.empty() || !rect.inside(image.width, image.height)) {
        throw Error(ErrorCode::invalid_input, "crop rectangle outside image");
    }
    Image out(rect.width(), rect.height(), image.channels);
    for (int y = 0; y < out.height; ++y) {
        const auto* src = &image.pixels[image.index(rect.left, rect.top + y)];
        std::copy_n(src, static_cast<std::size_t>(out.width * out.channels), &out.pixels[out.index(0, y)]);
    }
    out.provenance = image.provenance;
    out.provenance.transform = Affine2::translation(-rect.left, -rect.top).after(image.provenance.transform);
    return out;
}

Image pad(const Image& image, int left, int top, int right, int bottom, std::uint8_t fill) {
    if (left < 0 || top < 0 || right < 0 || bottom < 0) {
        throw Error(ErrorCode::invalid_input, "negative padding");
    }
    Image out(image.width + left + right, image.height + top + bottom, image.channels, fill);
    paste(out, image, left, top);
    out.provenance = image.provenance;
    out.provenance.transform = Affine2::translation(left, top).after(image.provenance.transform);
    return out;
}

Image resize_nearest(const Image& image, int width, int height) {
    require_valid(image, "image");
    Image out(width, height, image.channels);
    for (int y = 0; y < height; ++y) {
        const int sy = std::min(image.height - 1, static_cast<int>((static_cast<long long>(y) * image.height) / height));
        for (int x = 0; x < width; ++x) {
            const int sx = std::min(image.width - 1, static_cast<int>((static_cast<long long>(x) * image.width) / width));
            for (int c = 0; c < image.channels; ++c) {
                out.at(x, y, c) = image.at(sx, sy, c);
            }
        }
    }
    out.provenance = image.provenance;
    out.provenance.transform.m = {static_cast<double>(width) / image.width, 0.0, 0.0, 0.0,
                                  static_cast<double>(height) / image.height, 0.0};
    out.provenance.transform = out.provenance.transform.after(image.provenance.transform);
    return out;
}

void paste(Image& target, const Image& patch, int left, int top, const Mask* write_mask) {
    if (patch.channels != target.channels) {
        throw Error(ErrorCode::invalid_input, "paste channel mismatch");
    }
    for (int y = 0; y < patch.height; ++y) {
        const int ty = top + y;
        if (ty < 0 || ty >= target.height) {
            continue;
        }
        for (int x = 0; x < patch.width; ++x) {
            const int tx = left + x;
            if (tx < 0 || tx >= target.width) {
                continue;
            }
            if (write_mask != nullptr && !write_mask->at(x, y)) {
                continue;
            }
            for (int c = 0; c < patch.channels; ++c) {
                target.at(tx, ty, c) = patch.at(x, y, c);
            }
        }
    }
}

namespace {

int png_format_for(int channels) {
    switch (channels) {
        case 1: return PNG_FORMAT_GRAY;
        case 3: return PNG_FORMAT_RGB;
        case 4: return PNG_FORMAT_RGBA;
        default: throw Error(ErrorCode::invalid_input, "unsupported channel count for PNG");
    }
}

Image finish_read(png_image& png) {
    int channels = 3;
    if ((png.format & PNG_FORMAT_FLAG_COLOR) == 0) {
        channels = (png.format & PNG_FORMAT_FLAG_ALPHA) ? 3 : 1;
    } else if (png.format & PNG_FORMAT_FLAG_ALPHA) {
        channels = 4;
    }
    png.format = static_cast<png_uint_32>(png_format_for(channels));
    Image image(static_cast<int>(png.width), static_cast<int>(png.height), channels);
    if (!png_image_finish_read(&png, nullptr, image.pixels.data(), 0, nullptr)) {
        std::string msg = png.message;
        png_image_free(&png);
        throw Error(ErrorCode::invalid_input, "PNG decode failed: " + msg);
    }
    return image;
}

}  // namespace

Image decode_png(std::span<const std::uint8_t> bytes) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
        throw Error(ErrorCode::invalid_input, std::string("PNG decode failed: ") + png.message);
    }
    return finish_read(png);
}

std::vector<std::uint8_t> encode_png(const Image& image) {
    require_valid(image, "image");
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = static_cast<png_uint_32>(png_format_for(image.channels));
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&png, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
        throw Error(ErrorCode::io, std::string("PNG encode failed: ") + png.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&png, out.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
        throw Error(ErrorCode::io, std::string("PNG encode failed: ") + png.message);
    }
    out.resize(size);
    return out;
}

Image load_png(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::not_found, "cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_png(bytes);
}

void save_png(const Image& image, const std::filesystem::path& path) {
    const auto bytes = encode_png(image);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::io, "cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Image load_image_asset(const std::filesystem::path& path) {
    Image image = load_png(path);
    auto stem = path;
    stem.replace_extension();
    image.provenance.source = stem.string();
    return image;
}

bool is_image_path(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png";
}

}  // namespace portraitgen
