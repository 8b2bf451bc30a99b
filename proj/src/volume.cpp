#include "spinegrade/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spinegrade/error.hpp"

namespace spinegrade {

namespace {

void validate(const Dims& dims, const Vec3f& spacing, std::span<const float> data) {
    if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0) {
        throw Error(ErrorCode::BadDimensions, "every dimension must be positive");
    }
    for (float s : spacing) {
        if (!(s > 0.0f) || !std::isfinite(s)) {
            throw Error(ErrorCode::NonPositiveSpacing, "spacing " + std::to_string(s) + " is not positive");
        }
    }
    if (data.size() != dims.count()) {
        throw Error(ErrorCode::BadDimensions, "payload holds " + std::to_string(data.size()) +
                                                  " voxels, dims need " + std::to_string(dims.count()));
    }
    if (!std::all_of(data.begin(), data.end(), [](float v) { return std::isfinite(v); })) {
        throw Error(ErrorCode::NonFiniteValue, "volume contains non-finite values");
    }
}

}  // namespace

Volume3D::Volume3D(Dims dims, Vec3f spacing, Vec3f origin, std::vector<float> data)
    : dims_(dims), spacing_(spacing), origin_(origin), data_(std::move(data)) {
    validate(dims_, spacing_, data_);
    for (float o : origin_) {
        if (!std::isfinite(o)) throw Error(ErrorCode::NonFiniteValue, "origin is not finite");
    }
}

Volume3D::Volume3D(Dims dims, Vec3f spacing, Vec3f origin)
    : Volume3D(dims, spacing, origin, std::vector<float>(dims.count(), 0.0f)) {}

Volume3D Volume3D::slice_z(std::size_t k) const {
    if (k >= dims_.nz) throw Error(ErrorCode::BadDimensions, "slice index out of range");
    const std::size_t plane = static_cast<std::size_t>(dims_.nx) * dims_.ny;
    std::vector<float> data(data_.begin() + static_cast<std::ptrdiff_t>(k * plane),
                            data_.begin() + static_cast<std::ptrdiff_t>((k + 1) * plane));
    Vec3f origin = origin_;
    origin[2] = static_cast<float>(origin_[2] + static_cast<double>(k) * spacing_[2]);
    return Volume3D({dims_.nx, dims_.ny, 1}, spacing_, origin, std::move(data));
}

MaskVolume::MaskVolume(Volume3D volume) : volume_(std::move(volume)) {
    const auto d = volume_.data();
    if (!std::all_of(d.begin(), d.end(), [](float v) { return v >= 0.0f && v <= 1.0f; })) {
        throw Error(ErrorCode::ValueOutOfRange, "mask voxels must lie in [0,1]");
    }
}

}  // namespace spinegrade
