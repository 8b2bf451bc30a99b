#pragma once

// SPNV volume container and the label-table CSV.
//
// SPNV layout (all little-endian):
//   offset  0  char[4]  magic "SPNV"
//   offset  4  u16      version (1)
//   offset  6  u32[3]   nx, ny, nz
//   offset 18  f32[3]   spacing (mm)
//   offset 30  f32[3]   origin (mm)
//   offset 42  f32[nx*ny*nz] payload, x fastest

#include <compare>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "spinegrade/error.hpp"
#include "spinegrade/levels.hpp"
#include "spinegrade/volume.hpp"

namespace spinegrade::io {

inline constexpr std::uint16_t kSpnvVersion = 1;
inline constexpr std::size_t kSpnvHeaderSize = 42;

std::vector<std::uint8_t> encode_volume(const Volume3D& v);
/// Throws BadMagic, UnsupportedVersion, BadDimensions, NonPositiveSpacing, TruncatedPayload,
/// TrailingData or NonFiniteValue.
Volume3D decode_volume(std::span<const std::uint8_t> bytes);

Volume3D read_volume(const std::string& path);
void write_volume(const Volume3D& v, const std::string& path);
/// read_volume followed by the [0,1] range check.
MaskVolume read_mask(const std::string& path);

std::vector<std::uint8_t> read_bytes(const std::string& path);
void write_bytes(std::span<const std::uint8_t> bytes, const std::string& path);

struct LabelKey {
    std::string study_id;
    DiscLevel level;
    friend auto operator<=>(const LabelKey&, const LabelKey&) = default;
};

struct LabelRow {
    StenosisLabelSet labels;
    bool complete = false;
    friend bool operator==(const LabelRow&, const LabelRow&) = default;
};

class LabelTable {
public:
    using Rows = std::map<LabelKey, LabelRow>;

    /// Throws Error(DuplicateKey) if the key is present.
    void insert(LabelKey key, LabelRow row);
    const LabelRow* find(const std::string& study_id, DiscLevel level) const;
    const Rows& rows() const noexcept { return rows_; }
    std::size_t size() const noexcept { return rows_.size(); }
    bool empty() const noexcept { return rows_.empty(); }
    std::vector<std::string> study_ids() const;

    friend bool operator==(const LabelTable&, const LabelTable&) = default;

private:
    Rows rows_;
};

struct RowError {
    std::size_t line = 0;
    ErrorCode code;
    std::string message;
};

struct LabelTableRead {
    LabelTable table;
    std::vector<RowError> errors;  // malformed rows, in file order

    /// Throws the first collected error, if any.
    void throw_if_errors() const;
};

/// Parses the `study_id,level,scs,rfs,lfs,complete` schema; '#' lines and the header row
/// are skipped. Bad rows are reported, never silently dropped.
LabelTableRead parse_labels(std::string_view csv_text);
LabelTableRead read_labels(const std::string& path);
void write_labels(std::ostream& out, const LabelTable& table);

}  // namespace spinegrade::io
