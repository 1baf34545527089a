#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridnav/core.hpp"

namespace gridnav {

// ---------------------------------------------------------------------------
// 8-bit grayscale raster + binary PGM (P5) codec
// ---------------------------------------------------------------------------

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, row 0 at the top

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

    std::uint8_t& at(int col, int row) { return pixels[static_cast<std::size_t>(row) * width + col]; }
    std::uint8_t at(int col, int row) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
    bool contains(int col, int row) const { return col >= 0 && row >= 0 && col < width && row < height; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

namespace detail {

inline void skip_pgm_space(const std::string& data, std::size_t& pos) {
    while (pos < data.size()) {
        const char c = data[pos];
        if (c == '#') {
            while (pos < data.size() && data[pos] != '\n') ++pos;
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++pos;
        } else {
            break;
        }
    }
}

inline int read_pgm_int(const std::string& data, std::size_t& pos, const std::string& what) {
    skip_pgm_space(data, pos);
    int value = 0;
    const auto* begin = data.data() + pos;
    const auto* end = data.data() + data.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr == begin) throw Error("malformed PGM header: bad " + what);
    pos += static_cast<std::size_t>(ptr - begin);
    return value;
}

}  // namespace detail

inline GrayImage decode_pgm(const std::string& data) {
    if (data.size() < 2 || data[0] != 'P' || data[1] != '5')
        throw Error("malformed PGM header: expected binary 'P5' magic");
    std::size_t pos = 2;
    const int w = detail::read_pgm_int(data, pos, "width");
    const int h = detail::read_pgm_int(data, pos, "height");
    const int maxval = detail::read_pgm_int(data, pos, "maxval");
    if (w < 1 || h < 1) throw Error("malformed PGM header: non-positive dimensions");
    if (maxval < 1 || maxval > 255) throw Error("malformed PGM header: only 8-bit maxval supported");
    if (pos >= data.size()) throw Error("malformed PGM: missing pixel data");
    ++pos;  // exactly one whitespace byte separates header and raster
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (data.size() - pos < n) throw Error("malformed PGM: truncated pixel data");
    GrayImage img(w, h);
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(pos), n, img.pixels.begin());
    if (maxval != 255) {
        for (auto& p : img.pixels)
            p = static_cast<std::uint8_t>(std::min(255, (static_cast<int>(p) * 255 + maxval / 2) / maxval));
    }
    return img;
}

inline std::string encode_pgm(const GrayImage& img) {
    std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
    return out;
}

inline GrayImage read_pgm(const std::filesystem::path& path) { return decode_pgm(read_text(path)); }

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
    write_text_atomic(path, encode_pgm(img));
}

// ---------------------------------------------------------------------------
// Occupancy grid
// ---------------------------------------------------------------------------

enum class CellState : std::uint8_t { Free, Occupied, Unknown };

inline constexpr std::uint8_t kFreePixel = 255;
inline constexpr std::uint8_t kOccupiedPixel = 0;
inline constexpr std::uint8_t kUnknownPixel = 128;

inline constexpr std::uint8_t to_pixel(CellState s) {
    switch (s) {
        case CellState::Free: return kFreePixel;
        case CellState::Occupied: return kOccupiedPixel;
        case CellState::Unknown: return kUnknownPixel;
    }
    return kUnknownPixel;
}

struct PixelThresholds {
    int occupied_max = 50;  // value <= occupied_max -> OCCUPIED
    int free_min = 200;     // value >= free_min -> FREE

    CellState classify(std::uint8_t v) const {
        if (v >= free_min) return CellState::Free;
        if (v <= occupied_max) return CellState::Occupied;
        return CellState::Unknown;
    }
};

struct LogOddsThresholds {
    float occupied = 0.4f;  // log-odds > occupied -> OCCUPIED
    float free = -0.2f;     // log-odds < free -> FREE

    CellState classify(float l) const {
        if (l > occupied) return CellState::Occupied;
        if (l < free) return CellState::Free;
        return CellState::Unknown;
    }
};

struct CellIndex {
    int col = 0;
    int row = 0;
    bool in_bounds = false;

    friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Tri-state georeferenced raster. Row 0 is the maximum-y row of the world
/// (image-down = world -y); origin is the world position of the lower-left
/// corner of the lower-left cell.
class OccupancyGrid {
public:
    OccupancyGrid() = default;

    OccupancyGrid(int width, int height, double resolution, Vec2 origin, CellState fill = CellState::Unknown)
        : width_(width), height_(height), resolution_(resolution), origin_(origin),
          cells_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {
        if (width < 1 || height < 1) throw Error("grid dimensions must be >= 1");
        if (!(resolution > 0.0)) throw Error("grid resolution must be positive");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    double resolution() const { return resolution_; }
    Vec2 origin() const { return origin_; }
    double width_m() const { return width_ * resolution_; }
    double height_m() const { return height_ * resolution_; }

    bool contains(int col, int row) const { return col >= 0 && row >= 0 && col < width_ && row < height_; }

    /// Same extent as world_to_cell's in-bounds set: x in [x0, x1), y in (y0, y1].
    bool contains(Vec2 p) const {
        return p.x >= origin_.x && p.y > origin_.y && p.x < origin_.x + width_m() &&
               p.y <= origin_.y + height_m();
    }

    CellState state(int col, int row) const { return cells_[index(col, row)]; }
    void set_state(int col, int row, CellState s) { cells_[index(col, row)] = s; }

    /// A point on a cell edge belongs to the higher (col, row) index.
    CellIndex world_to_cell(Vec2 p) const {
        const double fx = (p.x - origin_.x) / resolution_;
        const double fy = (p.y - origin_.y) / resolution_;
        const int col = static_cast<int>(std::floor(fx));
        // ceil - 1 equals floor except on edges, where it selects the cell below
        // in world y, i.e. the higher row index.
        const int iy = static_cast<int>(std::ceil(fy)) - 1;
        const int row = height_ - 1 - iy;
        return {col, row, contains(col, row)};
    }

    /// World position of the cell center.
    Vec2 cell_to_world(int col, int row) const {
        return {origin_.x + (col + 0.5) * resolution_, origin_.y + (height_ - 1 - row + 0.5) * resolution_};
    }

    const std::vector<CellState>& cells() const { return cells_; }

    bool has_log_odds() const { return !log_odds_.empty(); }
    void enable_log_odds(float initial = 0.0f) { log_odds_.assign(cells_.size(), initial); }
    float log_odds(int col, int row) const { return log_odds_[index(col, row)]; }
    float& log_odds_ref(int col, int row) { return log_odds_[index(col, row)]; }
    const std::vector<float>& log_odds_raster() const { return log_odds_; }

    const LogOddsThresholds& log_odds_thresholds() const { return lo_thresholds_; }
    void set_log_odds_thresholds(LogOddsThresholds t) { lo_thresholds_ = t; }

    /// Re-derives the tri-state raster from the log-odds raster.
    void refresh_from_log_odds() {
        for (std::size_t i = 0; i < cells_.size(); ++i) cells_[i] = lo_thresholds_.classify(log_odds_[i]);
    }
    void refresh_cell(int col, int row) {
        const auto i = index(col, row);
        cells_[i] = lo_thresholds_.classify(log_odds_[i]);
    }

    GrayImage to_image() const {
        GrayImage img(width_, height_);
        for (std::size_t i = 0; i < cells_.size(); ++i) img.pixels[i] = to_pixel(cells_[i]);
        return img;
    }

    static OccupancyGrid from_image(const GrayImage& img, double resolution, Vec2 origin,
                                    PixelThresholds th = {}) {
        OccupancyGrid g(img.width, img.height, resolution, origin);
        for (std::size_t i = 0; i < img.pixels.size(); ++i) g.cells_[i] = th.classify(img.pixels[i]);
        return g;
    }

    friend bool operator==(const OccupancyGrid& a, const OccupancyGrid& b) {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.resolution_ == b.resolution_ &&
               a.origin_ == b.origin_ && a.cells_ == b.cells_ && a.log_odds_ == b.log_odds_;
    }

private:
    std::size_t index(int col, int row) const {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col);
    }

    int width_ = 1;
    int height_ = 1;
    double resolution_ = 0.05;
    Vec2 origin_{};
    std::vector<CellState> cells_ = std::vector<CellState>(1, CellState::Unknown);
    std::vector<float> log_odds_;
    LogOddsThresholds lo_thresholds_{};
};

struct MapMetadata {
    double resolution = 0.05;
    Vec2 origin{};
};

inline MapMetadata parse_map_metadata(const nlohmann::json& j) {
    if (!j.is_object()) throw Error("map metadata must be a JSON object");
    if (!j.contains("resolution_m_per_cell")) throw Error("map metadata missing 'resolution_m_per_cell'");
    if (!j.contains("origin_xy_m")) throw Error("map metadata missing 'origin_xy_m'");
    MapMetadata m;
    m.resolution = j.at("resolution_m_per_cell").get<double>();
    const auto& o = j.at("origin_xy_m");
    if (!o.is_array() || o.size() != 2) throw Error("map metadata 'origin_xy_m' must be [x, y]");
    m.origin = {o[0].get<double>(), o[1].get<double>()};
    if (!(m.resolution > 0.0)) throw Error("map metadata: resolution must be positive");
    return m;
}

inline OccupancyGrid load_map(const std::filesystem::path& image_path, const std::filesystem::path& metadata_path,
                              PixelThresholds th = {}) {
    const GrayImage img = read_pgm(image_path);
    MapMetadata meta;
    try {
        meta = parse_map_metadata(nlohmann::json::parse(read_text(metadata_path)));
    } catch (const nlohmann::json::exception& e) {
        throw Error("map metadata '" + metadata_path.string() + "': " + e.what());
    }
    return OccupancyGrid::from_image(img, meta.resolution, meta.origin, th);
}

inline void save_map(const OccupancyGrid& grid, const std::filesystem::path& image_path,
                     const std::filesystem::path& metadata_path) {
    write_pgm(image_path, grid.to_image());
    nlohmann::json meta = {{"resolution_m_per_cell", grid.resolution()},
                           {"origin_xy_m", {grid.origin().x, grid.origin().y}}};
    write_text_atomic(metadata_path, meta.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Navigational labels
// ---------------------------------------------------------------------------

struct DoorGeometry {
    Vec2 hinge{};
    double width = 0.9;
    double frame_angle = 0.0;  // direction from the hinge along the door frame

    friend bool operator==(const DoorGeometry&, const DoorGeometry&) = default;
};

struct NavLabel {
    Category category = Category::ClosedRoom;
    Vec2 position{};
    std::optional<DoorGeometry> door;

    friend bool operator==(const NavLabel&, const NavLabel&) = default;
};

inline void validate_label(const NavLabel& l) {
    if (l.door.has_value() != (l.category == Category::OpenRoom))
        throw Error(l.door ? "door geometry given for a non open_room label" : "open_room label requires 'door'");
    if (l.door && !(l.door->width > 0.0)) throw Error("door width must be positive");
}

inline nlohmann::json label_to_json(const NavLabel& l) {
    nlohmann::json j = {{"category", std::string(to_string(l.category))}, {"x_m", l.position.x}, {"y_m", l.position.y}};
    if (l.door) {
        j["door"] = {{"hinge_xy_m", {l.door->hinge.x, l.door->hinge.y}},
                     {"width_m", l.door->width},
                     {"frame_angle_rad", l.door->frame_angle}};
    }
    return j;
}

inline NavLabel label_from_json(const nlohmann::json& j) {
    NavLabel l;
    l.category = category_from_string(j.at("category").get<std::string>());
    l.position = {j.at("x_m").get<double>(), j.at("y_m").get<double>()};
    if (j.contains("door")) {
        const auto& d = j.at("door");
        const auto& h = d.at("hinge_xy_m");
        l.door = DoorGeometry{{h.at(0).get<double>(), h.at(1).get<double>()},
                              d.at("width_m").get<double>(),
                              d.at("frame_angle_rad").get<double>()};
    }
    validate_label(l);
    return l;
}

inline std::vector<NavLabel> parse_labels(const std::string& text, const OccupancyGrid* bounds = nullptr) {
    std::vector<NavLabel> out;
    try {
        const auto j = nlohmann::json::parse(text);
        if (!j.is_array()) throw Error("labels document must be a JSON array");
        for (const auto& e : j) out.push_back(label_from_json(e));
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("labels: ") + e.what());
    }
    if (bounds) {
        for (const auto& l : out)
            if (!bounds->contains(l.position))
                throw Error("label at (" + std::to_string(l.position.x) + ", " + std::to_string(l.position.y) +
                            ") lies outside the map");
    }
    return out;
}

inline std::vector<NavLabel> load_labels(const std::filesystem::path& path, const OccupancyGrid* bounds = nullptr) {
    return parse_labels(read_text(path), bounds);
}

inline void save_labels(const std::filesystem::path& path, const std::vector<NavLabel>& labels) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& l : labels) j.push_back(label_to_json(l));
    write_text_atomic(path, j.dump(2) + "\n");
}

struct WorldMap {
    OccupancyGrid grid;
    std::vector<NavLabel> labels;
    std::string name;

    void validate() const {
        for (const auto& l : labels) {
            validate_label(l);
            if (!grid.contains(l.position)) throw Error("map '" + name + "': label outside grid bounds");
        }
    }
};

}  // namespace gridnav
