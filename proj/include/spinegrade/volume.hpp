#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace spinegrade {

struct Dims {
    std::uint32_t nx = 0;
    std::uint32_t ny = 0;
    std::uint32_t nz = 0;

    std::size_t count() const noexcept {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
    }
    friend bool operator==(const Dims&, const Dims&) = default;
};

using Vec3f = std::array<float, 3>;
using Vec3 = std::array<double, 3>;

/// Scalar volume with physical geometry. Voxel (i,j,k) has its center at
/// origin + (i*sx, j*sy, k*sz) mm; data is x-fastest. Invariants (checked on construction):
/// data.size() == nx*ny*nz, every dim > 0, spacing > 0, all values finite.
class Volume3D {
public:
    Volume3D() = default;
    Volume3D(Dims dims, Vec3f spacing, Vec3f origin, std::vector<float> data);
    /// Zero-filled volume.
    Volume3D(Dims dims, Vec3f spacing, Vec3f origin);

    const Dims& dims() const noexcept { return dims_; }
    const Vec3f& spacing() const noexcept { return spacing_; }
    const Vec3f& origin() const noexcept { return origin_; }
    std::span<const float> data() const noexcept { return data_; }
    std::span<float> data() noexcept { return data_; }
    std::size_t size() const noexcept { return data_.size(); }

    std::size_t offset(std::size_t i, std::size_t j, std::size_t k) const noexcept {
        return (k * dims_.ny + j) * dims_.nx + i;
    }
    float at(std::size_t i, std::size_t j, std::size_t k) const noexcept { return data_[offset(i, j, k)]; }
    float& at(std::size_t i, std::size_t j, std::size_t k) noexcept { return data_[offset(i, j, k)]; }

    Vec3 world(double i, double j, double k) const noexcept {
        return {origin_[0] + i * spacing_[0], origin_[1] + j * spacing_[1], origin_[2] + k * spacing_[2]};
    }
    /// Continuous voxel index of a physical point.
    Vec3 index_of(const Vec3& p) const noexcept {
        return {(p[0] - origin_[0]) / spacing_[0], (p[1] - origin_[1]) / spacing_[1],
                (p[2] - origin_[2]) / spacing_[2]};
    }

    bool same_geometry(const Volume3D& other) const noexcept {
        return dims_ == other.dims_ && spacing_ == other.spacing_ && origin_ == other.origin_;
    }

    /// Copy of slice k as a (nx, ny, 1) volume with the slice's own origin.
    Volume3D slice_z(std::size_t k) const;

    friend bool operator==(const Volume3D&, const Volume3D&) = default;

private:
    Dims dims_{};
    Vec3f spacing_{1.0f, 1.0f, 1.0f};
    Vec3f origin_{0.0f, 0.0f, 0.0f};
    std::vector<float> data_;
};

/// Probability map: a Volume3D whose voxels all lie in [0,1].
class MaskVolume {
public:
    MaskVolume() = default;
    /// Throws Error(ValueOutOfRange) if any voxel is outside [0,1].
    explicit MaskVolume(Volume3D volume);

    const Volume3D& volume() const noexcept { return volume_; }
    const Dims& dims() const noexcept { return volume_.dims(); }
    std::span<const float> data() const noexcept { return volume_.data(); }
    bool same_geometry(const MaskVolume& other) const noexcept { return volume_.same_geometry(other.volume_); }

private:
    Volume3D volume_;
};

}  // namespace spinegrade
