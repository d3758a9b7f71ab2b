#pragma once

#include "vertegrow/engine.hpp"
#include "vertegrow/grid.hpp"
#include "vertegrow/volume.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testing_support {

using namespace vertegrow;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("vertegrow-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline Dims random_dims(std::mt19937_64& rng, std::size_t max_r, std::size_t max_c, std::size_t max_z) {
    auto pick = [&rng](std::size_t hi) { return std::uniform_int_distribution<std::size_t>(1, hi)(rng); };
    return {pick(max_r), pick(max_c), pick(max_z)};
}

/// Integer-valued intensities in [0, levels) stored as u16.
inline Volume random_volume(std::mt19937_64& rng, const Dims& d, int levels = 256) {
    Grid<float> g(d, 0.0f);
    std::uniform_int_distribution<int> v(0, levels - 1);
    for (auto& x : g.values()) x = static_cast<float>(v(rng));
    return Volume(std::move(g), Spacing{}, ElementType::u16);
}

/// Random seeds with at least one foreground and one background voxel.
inline LabelField random_seeds(std::mt19937_64& rng, const Dims& d, double density = 0.15) {
    LabelField s(d, kUnlabeled);
    if (d.size() < 2) throw std::invalid_argument("need at least two voxels for both polarities");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& x : s.values()) {
        const double r = u(rng);
        x = r < density / 2 ? kForeground : r < density ? kBackground : kUnlabeled;
    }
    std::uniform_int_distribution<std::size_t> idx(0, d.size() - 1);
    const std::size_t a = idx(rng);
    std::size_t b = idx(rng);
    while (b == a) b = idx(rng);
    s[a] = kForeground;
    s[b] = kBackground;
    return s;
}

} // namespace testing_support
