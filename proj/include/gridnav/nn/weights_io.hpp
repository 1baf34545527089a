#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridnav/nn/net.hpp"

namespace gridnav::nn {

// Layout: "GRIDNAV-WEIGHTS\n", u64 little-endian header length, JSON header,
// then the raw little-endian f32 payload of every state tensor in
// declaration order.

inline constexpr char kWeightsMagic[] = "GRIDNAV-WEIGHTS\n";
inline constexpr std::size_t kWeightsMagicLen = sizeof(kWeightsMagic) - 1;

static_assert(std::endian::native == std::endian::little, "weights payload assumes a little-endian host");

struct WeightsHeader {
    NetSpec spec;
    struct Entry {
        std::string name;
        Shape4 shape;
    };
    std::vector<Entry> tensors;
    nlohmann::json metadata = nlohmann::json::object();
    std::size_t payload_offset = 0;
};

template <class T>
void save_weights(DetectorNet<T>& net, const std::filesystem::path& path,
                  const nlohmann::json& metadata = nlohmann::json::object()) {
    nlohmann::json tensors = nlohmann::json::array();
    std::size_t total = 0;
    for (auto& [name, t] : net.state_tensors()) {
        tensors.push_back({{"name", name}, {"shape", {t->n(), t->c(), t->h(), t->w()}}});
        total += t->size();
    }
    nlohmann::json header = {{"format", "gridnav-weights"}, {"version", 1},          {"dtype", "f32"},
                             {"byte_order", "little"},      {"netspec", to_json(net.spec())},
                             {"tensors", tensors},          {"count", total},        {"metadata", metadata}};
    const std::string hs = header.dump();
    const std::uint64_t hlen = hs.size();

    AtomicFile f(path);
    auto& out = f.stream();
    out.write(kWeightsMagic, static_cast<std::streamsize>(kWeightsMagicLen));
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    std::vector<float> buf;
    for (auto& [name, t] : net.state_tensors()) {
        buf.resize(t->size());
        for (std::size_t i = 0; i < t->size(); ++i) buf[i] = static_cast<float>((*t)[i]);
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    f.commit();
}

/// Reads only the header, not the payload.
inline WeightsHeader inspect_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open weights file '" + path.string() + "'");
    char magic[kWeightsMagicLen];
    in.read(magic, static_cast<std::streamsize>(kWeightsMagicLen));
    if (!in || std::memcmp(magic, kWeightsMagic, kWeightsMagicLen) != 0)
        throw Error("'" + path.string() + "' is not a gridnav weights file");
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    if (!in || hlen > (1u << 26)) throw Error("weights file: corrupt header length");
    std::string hs(static_cast<std::size_t>(hlen), '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw Error("weights file: truncated header");
    WeightsHeader h;
    try {
        const auto j = nlohmann::json::parse(hs);
        if (j.at("dtype") != "f32" || j.at("byte_order") != "little") throw Error("weights file: unsupported dtype");
        h.spec = net_spec_from_json(j.at("netspec"));
        for (const auto& e : j.at("tensors")) {
            const auto& s = e.at("shape");
            h.tensors.push_back({e.at("name").get<std::string>(),
                                 {s.at(0).get<int>(), s.at(1).get<int>(), s.at(2).get<int>(), s.at(3).get<int>()}});
        }
        h.metadata = j.value("metadata", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("weights header: ") + e.what());
    }
    h.payload_offset = kWeightsMagicLen + sizeof(hlen) + static_cast<std::size_t>(hlen);
    return h;
}

/// Loads a payload into an existing network, checking names and shapes.
template <class T>
void load_weights_into(DetectorNet<T>& net, const std::filesystem::path& path) {
    const WeightsHeader h = inspect_weights(path);
    auto state = net.state_tensors();
    for (std::size_t i = 0; i < state.size(); ++i) {
        if (i >= h.tensors.size()) throw Error("weights file lacks layer '" + state[i].first + "'");
        const auto& e = h.tensors[i];
        if (e.name != state[i].first || !(e.shape == state[i].second->shape()))
            throw Error("architecture mismatch at layer '" + state[i].first + "': expected " + state[i].first + " " +
                        state[i].second->shape().str() + ", file has " + e.name + " " + e.shape.str());
    }
    if (h.tensors.size() != state.size())
        throw Error("architecture mismatch: file has extra layer '" + h.tensors[state.size()].name + "'");

    std::ifstream in(path, std::ios::binary);
    in.seekg(static_cast<std::streamoff>(h.payload_offset));
    std::vector<float> buf;
    for (auto& [name, t] : state) {
        buf.resize(t->size());
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!in) throw Error("weights file: truncated payload at '" + name + "'");
        for (std::size_t i = 0; i < t->size(); ++i) (*t)[i] = static_cast<T>(buf[i]);
    }
    net.bump_version();
}

template <class T = float>
std::unique_ptr<DetectorNet<T>> load_weights(const std::filesystem::path& path) {
    auto net = std::make_unique<DetectorNet<T>>(inspect_weights(path).spec);
    load_weights_into(*net, path);
    return net;
}

/// Copies parameters and buffers between two networks of identical spec.
template <class T>
void copy_state(DetectorNet<T>& dst, DetectorNet<T>& src) {
    if (!(dst.spec() == src.spec())) throw Error("copy_state: spec mismatch");
    auto a = dst.state_tensors();
    auto b = src.state_tensors();
    for (std::size_t i = 0; i < a.size(); ++i) *a[i].second = *b[i].second;
    dst.bump_version();
}

}  // namespace gridnav::nn
