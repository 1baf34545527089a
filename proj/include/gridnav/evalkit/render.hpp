#pragma once

#include <png.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gridnav/core.hpp"
#include "gridnav/evalkit/metrics.hpp"
#include "gridnav/gridworld.hpp"

namespace gridnav {

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;  // row-major RGB

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, 0) {}

    std::uint8_t* px(int x, int y) { return &data[(static_cast<std::size_t>(y) * width + x) * 3]; }
    const std::uint8_t* px(int x, int y) const { return &data[(static_cast<std::size_t>(y) * width + x) * 3]; }
    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
    void set(int x, int y, std::array<std::uint8_t, 3> c) {
        if (!contains(x, y)) return;
        auto* p = px(x, y);
        p[0] = c[0], p[1] = c[1], p[2] = c[2];
    }
};

inline std::string encode_png(const RgbImage& img) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("png: cannot create write struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("png: cannot create info struct");
    }
    std::string out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("png: encoding failed");
    }
    png_set_write_fn(
        png, &out,
        [](png_structp p, png_bytep data, png_size_t len) {
            static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), len);
        },
        nullptr);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y) png_write_row(png, const_cast<png_bytep>(img.px(0, y)));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

inline RgbImage decode_png(const std::filesystem::path& path) {
    png_image im{};
    im.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&im, path.c_str())) throw Error("png: cannot read '" + path.string() + "'");
    im.format = PNG_FORMAT_RGB;
    RgbImage img(static_cast<int>(im.width), static_cast<int>(im.height));
    if (!png_image_finish_read(&im, nullptr, img.data.data(), 0, nullptr)) {
        png_image_free(&im);
        throw Error("png: decode failed for '" + path.string() + "'");
    }
    return img;
}

inline void write_png(const std::filesystem::path& path, const RgbImage& img) { write_text_atomic(path, encode_png(img)); }

enum class Glyph { Square, Triangle, Diamond, Cross, Circle };

inline Glyph category_glyph(Category c) {
    switch (c) {
        case Category::ClosedRoom: return Glyph::Square;
        case Category::OpenRoom: return Glyph::Triangle;
        case Category::Corridor: return Glyph::Diamond;
    }
    return Glyph::Square;
}

inline std::array<std::uint8_t, 3> category_color(Category c) {
    switch (c) {
        case Category::ClosedRoom: return {30, 90, 220};
        case Category::OpenRoom: return {20, 160, 40};
        case Category::Corridor: return {230, 130, 0};
    }
    return {0, 0, 0};
}

struct Marker {
    Glyph glyph;
    Category category;
    int x;  // pixel center
    int y;
};

struct OverlayResult {
    RgbImage image;
    std::vector<Marker> markers;
};

inline void draw_glyph(RgbImage& img, const Marker& m, int r) {
    const auto col = category_color(m.category);
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
            bool on = false;
            switch (m.glyph) {
                case Glyph::Square: on = std::max(std::abs(dx), std::abs(dy)) <= r * 2 / 3; break;
                case Glyph::Triangle: on = dy >= -r && dy <= r * 2 / 3 && 2 * std::abs(dx) <= dy + r; break;
                case Glyph::Diamond: on = std::abs(dx) + std::abs(dy) <= r; break;
                case Glyph::Cross: on = std::abs(std::abs(dx) - std::abs(dy)) <= 1; break;
                case Glyph::Circle: {
                    const double d = std::hypot(dx, dy);
                    on = d >= r - 1.5 && d <= r;
                    break;
                }
            }
            if (on) img.set(m.x + dx, m.y + dy, col);
        }
}

/// Pixel of a world point on the base map raster.
inline std::pair<int, int> map_pixel(const OccupancyGrid& g, Vec2 p) {
    const auto c = g.world_to_cell(p);
    return {c.col, c.row};
}

/// Draws category glyphs for predictions. With ground truth, matched
/// predictions keep their category glyph, false positives become a cross and
/// missed truths a circle.
inline OverlayResult render_overlay(const OccupancyGrid& grid, const std::vector<PointLabel>& predictions,
                                    const std::optional<std::vector<PointLabel>>& truth = std::nullopt, double radius = 0.5,
                                    int marker_radius = 6) {
    OverlayResult out;
    const GrayImage base = grid.to_image();
    out.image = RgbImage(base.width, base.height);
    for (int y = 0; y < base.height; ++y)
        for (int x = 0; x < base.width; ++x) {
            const std::uint8_t v = base.at(x, y);
            out.image.set(x, y, {v, v, v});
        }
    const auto add = [&](Glyph g, const PointLabel& p) {
        const auto [x, y] = map_pixel(grid, p.position);
        out.markers.push_back({g, p.category, x, y});
    };
    if (!truth) {
        for (const auto& p : predictions) add(category_glyph(p.category), p);
    } else {
        const MatchResult m = greedy_match(predictions, *truth, radius);
        for (auto [i, j] : m.matches) add(category_glyph(predictions[static_cast<std::size_t>(i)].category), predictions[static_cast<std::size_t>(i)]);
        for (int i : m.unmatched_predictions) add(Glyph::Cross, predictions[static_cast<std::size_t>(i)]);
        for (int j : m.unmatched_truths) add(Glyph::Circle, (*truth)[static_cast<std::size_t>(j)]);
    }
    for (const auto& mk : out.markers) draw_glyph(out.image, mk, marker_radius);
    return out;
}

}  // namespace gridnav
