#pragma once

// Shared fixtures for the unit tests.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "spinegrade/volume.hpp"

namespace spinegrade::test {

/// Fresh, empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("spinegrade_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    std::filesystem::path path_;
};

/// Single-slice mask with the given pixels set to `inside`.
inline Volume3D slice_mask(std::uint32_t nx, std::uint32_t ny, const std::vector<std::pair<int, int>>& on,
                           float inside = 1.0f, Vec3f spacing = {1.0f, 1.0f, 1.0f}) {
    Volume3D v({nx, ny, 1}, spacing, {0.0f, 0.0f, 0.0f});
    for (auto [i, j] : on) v.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j), 0) = inside;
    return v;
}

/// Axis-aligned filled rectangle [i0, i1] x [j0, j1] in pixel units.
inline std::vector<std::pair<int, int>> rect(int i0, int j0, int i1, int j1) {
    std::vector<std::pair<int, int>> out;
    for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i) out.emplace_back(i, j);
    return out;
}

/// Random probability 4-vector on the dyadic grid k / 2^20, so every partial sum is exact.
inline std::array<double, 4> dyadic_probabilities(std::mt19937_64& rng) {
    constexpr std::uint32_t kOne = 1u << 20;
    std::uniform_int_distribution<std::uint32_t> cut(0, kOne);
    std::array<std::uint32_t, 3> c{cut(rng), cut(rng), cut(rng)};
    std::sort(c.begin(), c.end());
    const std::array<std::uint32_t, 4> parts{c[0], c[1] - c[0], c[2] - c[1], kOne - c[2]};
    std::array<double, 4> p{};
    for (int i = 0; i < 4; ++i) p[i] = static_cast<double>(parts[i]) / kOne;
    return p;
}

}  // namespace spinegrade::test
