#include "spinegrade/volume_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace spinegrade::io {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>((v >> (8 * b)) & 0xFF));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (static_cast<std::uint16_t>(p[1]) << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

}  // namespace

std::vector<std::uint8_t> encode_volume(const Volume3D& v) {
    std::vector<std::uint8_t> out;
    out.reserve(kSpnvHeaderSize + 4 * v.size());
    out.insert(out.end(), {'S', 'P', 'N', 'V'});
    put_u16(out, kSpnvVersion);
    put_u32(out, v.dims().nx);
    put_u32(out, v.dims().ny);
    put_u32(out, v.dims().nz);
    for (float s : v.spacing()) put_f32(out, s);
    for (float o : v.origin()) put_f32(out, o);
    if constexpr (std::endian::native == std::endian::little) {
        const auto d = v.data();
        const auto* raw = reinterpret_cast<const std::uint8_t*>(d.data());
        out.insert(out.end(), raw, raw + d.size_bytes());
    } else {
        for (float x : v.data()) put_f32(out, x);
    }
    return out;
}

Volume3D decode_volume(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "SPNV", 4) != 0) {
        throw Error(ErrorCode::BadMagic, "not an SPNV volume");
    }
    if (bytes.size() < kSpnvHeaderSize) throw Error(ErrorCode::TruncatedPayload, "header is truncated");
    const std::uint8_t* p = bytes.data();
    const std::uint16_t version = get_u16(p + 4);
    if (version != kSpnvVersion) {
        throw Error(ErrorCode::UnsupportedVersion, "SPNV version " + std::to_string(version));
    }
    const Dims dims{get_u32(p + 6), get_u32(p + 10), get_u32(p + 14)};
    const Vec3f spacing{get_f32(p + 18), get_f32(p + 22), get_f32(p + 26)};
    const Vec3f origin{get_f32(p + 30), get_f32(p + 34), get_f32(p + 38)};
    if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0) {
        throw Error(ErrorCode::BadDimensions, "every dimension must be positive");
    }
    for (float s : spacing) {
        if (!(s > 0.0f)) throw Error(ErrorCode::NonPositiveSpacing, "spacing must be positive");
    }
    const std::size_t payload = bytes.size() - kSpnvHeaderSize;
    // Guard the multiplication against absurd headers before comparing sizes.
    const double expected_d = 4.0 * static_cast<double>(dims.nx) * dims.ny * dims.nz;
    if (expected_d > static_cast<double>(payload)) {
        throw Error(ErrorCode::TruncatedPayload, "payload holds " + std::to_string(payload / 4) +
                                                     " floats, header declares " +
                                                     std::to_string(dims.count()));
    }
    const std::size_t expected = 4 * dims.count();
    if (payload > expected) throw Error(ErrorCode::TrailingData, "bytes after the payload");

    std::vector<float> data(dims.count());
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(data.data(), p + kSpnvHeaderSize, expected);
    } else {
        for (std::size_t i = 0; i < data.size(); ++i) data[i] = get_f32(p + kSpnvHeaderSize + 4 * i);
    }
    return Volume3D(dims, spacing, origin, std::move(data));
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(std::span<const std::uint8_t> bytes, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "short write to " + path);
}

Volume3D read_volume(const std::string& path) { return decode_volume(read_bytes(path)); }

void write_volume(const Volume3D& v, const std::string& path) { write_bytes(encode_volume(v), path); }

MaskVolume read_mask(const std::string& path) { return MaskVolume(read_volume(path)); }

// ---------------------------------------------------------------------------
// label table

void LabelTable::insert(LabelKey key, LabelRow row) {
    const std::string what = key.study_id + "," + std::string(to_string(key.level));
    if (!rows_.emplace(std::move(key), std::move(row)).second) {
        throw Error(ErrorCode::DuplicateKey, "duplicate label row for " + what);
    }
}

const LabelRow* LabelTable::find(const std::string& study_id, DiscLevel level) const {
    auto it = rows_.find(LabelKey{study_id, level});
    return it == rows_.end() ? nullptr : &it->second;
}

std::vector<std::string> LabelTable::study_ids() const {
    std::set<std::string> ids;
    for (const auto& [key, row] : rows_) ids.insert(key.study_id);
    return {ids.begin(), ids.end()};
}

void LabelTableRead::throw_if_errors() const {
    if (!errors.empty()) {
        throw Error(errors.front().code,
                    "line " + std::to_string(errors.front().line) + ": " + errors.front().message);
    }
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

}  // namespace

LabelTableRead parse_labels(std::string_view text) {
    LabelTableRead result;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#' || line.starts_with("study_id,")) continue;

        auto fail = [&](ErrorCode code, std::string msg) {
            result.errors.push_back({line_no, code, std::move(msg)});
        };
        const auto f = split_fields(line);
        if (f.size() != 6 || f[0].empty()) {
            fail(ErrorCode::MalformedRow, "expected study_id,level,scs,rfs,lfs,complete");
            continue;
        }
        const auto level = parse_disc_level(f[1]);
        if (!level) {
            fail(ErrorCode::MalformedRow, "unknown level '" + std::string(f[1]) + "'");
            continue;
        }
        LabelRow row{StenosisLabelSet(*level), false};
        bool ok = true;
        for (std::size_t s = 0; s < kSiteCount && ok; ++s) {
            const std::string_view g = f[2 + s];
            if (g.empty()) continue;
            int value = 0;
            const auto [ptr, ec] = std::from_chars(g.data(), g.data() + g.size(), value);
            if (ec != std::errc() || ptr != g.data() + g.size()) {
                fail(ErrorCode::MalformedRow, "grade '" + std::string(g) + "' is not an integer");
                ok = false;
            } else if (value < 0 || value >= Grade::kCount) {
                fail(ErrorCode::GradeOutOfRange, "grade " + std::to_string(value) + " not in 0..3");
                ok = false;
            } else {
                row.labels.set(kAllSites[s], Grade::from_int(value));
            }
        }
        if (!ok) continue;
        if (f[5] == "true" || f[5] == "1") {
            row.complete = true;
        } else if (f[5] != "false" && f[5] != "0") {
            fail(ErrorCode::MalformedRow, "complete flag must be true or false");
            continue;
        }
        try {
            result.table.insert({std::string(f[0]), *level}, std::move(row));
        } catch (const Error& e) {
            fail(e.code(), "duplicate key " + std::string(f[0]) + "," + std::string(f[1]));
        }
    }
    return result;
}

LabelTableRead read_labels(const std::string& path) {
    const auto bytes = read_bytes(path);
    return parse_labels(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

void write_labels(std::ostream& out, const LabelTable& table) {
    out << "study_id,level,scs,rfs,lfs,complete\n";
    for (const auto& [key, row] : table.rows()) {
        out << key.study_id << ',' << to_string(key.level);
        for (StenosisSite s : kAllSites) {
            out << ',';
            if (auto g = row.labels.grade(s)) out << g->value();
        }
        out << ',' << (row.complete ? "true" : "false") << '\n';
    }
}

}  // namespace spinegrade::io
