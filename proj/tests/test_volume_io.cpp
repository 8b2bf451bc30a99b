#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "spinegrade/error.hpp"
#include "spinegrade/volume_io.hpp"
#include "support.hpp"

using namespace spinegrade;

namespace {

/// Hand-packed SPNV bytes, written field by field as an independent oracle of the layout.
std::vector<std::uint8_t> pack(const char magic[4], std::uint16_t version, std::array<std::uint32_t, 3> dims,
                               std::array<float, 3> spacing, std::array<float, 3> origin,
                               const std::vector<float>& data) {
    std::vector<std::uint8_t> b(magic, magic + 4);
    auto put = [&](const void* p, std::size_t n) {
        const auto* c = static_cast<const std::uint8_t*>(p);
        b.insert(b.end(), c, c + n);  // the test host is little-endian
    };
    put(&version, 2);
    for (auto d : dims) put(&d, 4);
    for (auto s : spacing) put(&s, 4);
    for (auto o : origin) put(&o, 4);
    for (float v : data) put(&v, 4);
    return b;
}

ErrorCode code_of(const std::vector<std::uint8_t>& bytes) {
    try {
        io::decode_volume(bytes);
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("decode did not throw");
    return ErrorCode::Io;
}

}  // namespace

TEST_CASE("encoded header matches the documented layout") {
    Volume3D v({2, 3, 1}, {0.5f, 1.0f, 2.0f}, {-1.0f, 0.0f, 4.0f}, {0, 1, 2, 3, 4, 5});
    const auto bytes = io::encode_volume(v);
    CHECK(bytes.size() == io::kSpnvHeaderSize + 6 * 4);
    CHECK(bytes == pack("SPNV", 1, {2, 3, 1}, {0.5f, 1.0f, 2.0f}, {-1.0f, 0.0f, 4.0f}, {0, 1, 2, 3, 4, 5}));
}

TEST_CASE("volumes round-trip bit for bit through a file") {
    test::TempDir dir("spnv");
    std::vector<float> data(4 * 5 * 3);
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = std::sin(static_cast<float>(i)) * 1e3f;
    const Volume3D v({4, 5, 3}, {0.7f, 0.7f, 3.3f}, {10.0f, -5.5f, 0.25f}, data);
    const auto path = (dir / "v.spnv").string();
    io::write_volume(v, path);
    CHECK(io::read_volume(path) == v);
    CHECK(v.at(1, 2, 1) == data[v.offset(1, 2, 1)]);
    CHECK(v.offset(1, 2, 1) == (1 * 5 + 2) * 4 + 1);
}

TEST_CASE("malformed containers are rejected with specific codes") {
    const std::vector<float> one{1.0f};
    CHECK(code_of(pack("SPNX", 1, {1, 1, 1}, {1, 1, 1}, {0, 0, 0}, one)) == ErrorCode::BadMagic);
    CHECK(code_of(pack("SPNV", 2, {1, 1, 1}, {1, 1, 1}, {0, 0, 0}, one)) == ErrorCode::UnsupportedVersion);
    CHECK(code_of(pack("SPNV", 1, {0, 1, 1}, {1, 1, 1}, {0, 0, 0}, {})) == ErrorCode::BadDimensions);
    CHECK(code_of(pack("SPNV", 1, {1, 1, 1}, {1, 0, 1}, {0, 0, 0}, one)) == ErrorCode::NonPositiveSpacing);
    CHECK(code_of(pack("SPNV", 1, {2, 1, 1}, {1, 1, 1}, {0, 0, 0}, one)) == ErrorCode::TruncatedPayload);
    CHECK(code_of(pack("SPNV", 1, {1, 1, 1}, {1, 1, 1}, {0, 0, 0}, {1.0f, 2.0f})) == ErrorCode::TrailingData);
    CHECK(code_of(pack("SPNV", 1, {1, 1, 1}, {1, 1, 1}, {0, 0, 0}, {std::nanf("")})) == ErrorCode::NonFiniteValue);
    auto short_header = pack("SPNV", 1, {1, 1, 1}, {1, 1, 1}, {0, 0, 0}, one);
    short_header.resize(20);
    CHECK(code_of(short_header) == ErrorCode::TruncatedPayload);
}

TEST_CASE("masks must lie in [0,1]") {
    test::TempDir dir("mask");
    const auto path = (dir / "m.spnv").string();
    io::write_volume(Volume3D({2, 1, 1}, {1, 1, 1}, {0, 0, 0}, {0.0f, 1.5f}), path);
    try {
        io::read_mask(path);
        FAIL("expected ValueOutOfRange");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ValueOutOfRange);
    }
    io::write_volume(Volume3D({2, 1, 1}, {1, 1, 1}, {0, 0, 0}, {0.0f, 1.0f}), path);
    CHECK(io::read_mask(path).data()[1] == 1.0f);
}

TEST_CASE("a missing file is an Io error") {
    try {
        io::read_volume("/nonexistent/dir/v.spnv");
        FAIL("expected Io");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Io);
    }
}

TEST_CASE("label table round-trip") {
    const std::string csv =
        "# comment\n"
        "study_id,level,scs,rfs,lfs,complete\n"
        "s1,L4L5,1,,3,false\n"
        "s1,L5S1,0,0,0,true\n";
    io::LabelTableRead r = io::parse_labels(csv);
    REQUIRE(r.errors.empty());
    REQUIRE(r.table.size() == 2);
    const io::LabelRow* row = r.table.find("s1", DiscLevel::L4L5);
    REQUIRE(row != nullptr);
    CHECK(row->labels.grade(StenosisSite::SCS)->value() == 1);
    CHECK_FALSE(row->labels.has(StenosisSite::RFS));
    CHECK(row->labels.grade(StenosisSite::LFS)->value() == 3);
    std::ostringstream out;
    io::write_labels(out, r.table);
    CHECK(out.str() == "study_id,level,scs,rfs,lfs,complete\ns1,L4L5,1,,3,false\ns1,L5S1,0,0,0,true\n");
    CHECK(io::parse_labels(out.str()).table == r.table);
}

TEST_CASE("bad label rows are reported, never dropped silently") {
    const std::string csv =
        "study_id,level,scs,rfs,lfs,complete\n"
        "s1,L4L5,1,,3,false\n"
        "s1,L4L5,2,,3,false\n"
        "s1,L9L10,1,1,1,false\n"
        "s1,L3L4,7,1,1,false\n"
        "s1,L2L3,1,1\n";
    const io::LabelTableRead r = io::parse_labels(csv);
    CHECK(r.table.size() == 1);
    REQUIRE(r.errors.size() == 4);
    CHECK(r.errors[0].code == ErrorCode::DuplicateKey);
    CHECK(r.errors[0].line == 3);
    CHECK(r.errors[1].code == ErrorCode::MalformedRow);
    CHECK(r.errors[2].code == ErrorCode::GradeOutOfRange);
    CHECK(r.errors[3].code == ErrorCode::MalformedRow);
    CHECK_THROWS_AS(r.throw_if_errors(), Error);
}

TEST_CASE("volume invariants are enforced on construction") {
    CHECK_THROWS_AS(Volume3D({2, 2, 1}, {1, 1, 1}, {0, 0, 0}, {1, 2, 3}), Error);
    CHECK_THROWS_AS(Volume3D({1, 1, 1}, {1, -1, 1}, {0, 0, 0}, {1}), Error);
    CHECK_THROWS_AS(Volume3D({1, 1, 1}, {1, 1, 1}, {0, 0, 0}, {std::numeric_limits<float>::infinity()}), Error);
    const Volume3D v({2, 2, 2}, {1, 1, 3}, {0, 0, 1}, {0, 1, 2, 3, 4, 5, 6, 7});
    const Volume3D s = v.slice_z(1);
    CHECK(s.dims() == Dims{2, 2, 1});
    CHECK(s.origin()[2] == 4.0f);
    CHECK(s.at(1, 1, 0) == 7.0f);
}
