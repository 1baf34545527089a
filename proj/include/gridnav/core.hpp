#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gridnav {

/// Raised for malformed inputs, violated preconditions and I/O failures.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kPi = std::numbers::pi;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
    a = std::fmod(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    if (a > kPi) a -= 2.0 * kPi;
    return a;
}

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Vec2, Vec2) = default;
};

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

/// Robot pose in the world frame; theta is CCW from world +x.
struct Pose {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;

    Pose() = default;
    Pose(double x_, double y_, double theta_) : x(x_), y(y_), theta(normalize_angle(theta_)) {}

    Vec2 position() const { return {x, y}; }
    friend bool operator==(const Pose&, const Pose&) = default;
};

// Robot frame: x to the right of the heading, y along the heading.

inline Vec2 world_to_robot(const Pose& pose, Vec2 world) {
    const double dx = world.x - pose.x;
    const double dy = world.y - pose.y;
    const double c = std::cos(pose.theta);
    const double s = std::sin(pose.theta);
    return {dx * s - dy * c, dx * c + dy * s};
}

inline Vec2 robot_to_world(const Pose& pose, Vec2 robot) {
    const double c = std::cos(pose.theta);
    const double s = std::sin(pose.theta);
    return {pose.x + robot.x * s + robot.y * c, pose.y - robot.x * c + robot.y * s};
}

enum class Category : std::uint8_t { ClosedRoom = 0, OpenRoom = 1, Corridor = 2 };

inline constexpr int kNumCategories = 3;
inline constexpr std::array<Category, kNumCategories> kAllCategories = {
    Category::ClosedRoom, Category::OpenRoom, Category::Corridor};

inline constexpr int index_of(Category c) { return static_cast<int>(c); }

inline std::string_view to_string(Category c) {
    switch (c) {
        case Category::ClosedRoom: return "closed_room";
        case Category::OpenRoom: return "open_room";
        case Category::Corridor: return "corridor";
    }
    return "?";
}

inline Category category_from_string(std::string_view s) {
    if (s == "closed_room") return Category::ClosedRoom;
    if (s == "open_room") return Category::OpenRoom;
    if (s == "corridor") return Category::Corridor;
    throw Error("unknown category '" + std::string(s) + "'");
}

/// Writes through a sibling temp file and renames it into place.
class AtomicFile {
public:
    explicit AtomicFile(std::filesystem::path target)
        : target_(std::move(target)), temp_(target_.string() + ".tmp") {
        if (target_.has_parent_path()) std::filesystem::create_directories(target_.parent_path());
        out_.open(temp_, std::ios::binary | std::ios::trunc);
        if (!out_) throw Error("cannot open '" + temp_.string() + "' for writing");
    }
    AtomicFile(const AtomicFile&) = delete;
    AtomicFile& operator=(const AtomicFile&) = delete;
    ~AtomicFile() {
        if (!committed_) {
            out_.close();
            std::error_code ec;
            std::filesystem::remove(temp_, ec);
        }
    }

    std::ofstream& stream() { return out_; }

    void commit() {
        out_.flush();
        if (!out_) throw Error("write failed for '" + temp_.string() + "'");
        out_.close();
        std::filesystem::rename(temp_, target_);
        committed_ = true;
    }

private:
    std::filesystem::path target_;
    std::filesystem::path temp_;
    std::ofstream out_;
    bool committed_ = false;
};

inline void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
    AtomicFile f(path);
    f.stream().write(text.data(), static_cast<std::streamsize>(text.size()));
    f.commit();
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace gridnav
