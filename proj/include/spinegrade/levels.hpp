#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spinegrade {

/// Intervertebral disc levels, ordered cranial to caudal.
enum class DiscLevel : std::uint8_t { T12L1, L1L2, L2L3, L3L4, L4L5, L5S1 };
inline constexpr std::size_t kDiscLevelCount = 6;
inline constexpr std::array<DiscLevel, kDiscLevelCount> kAllDiscLevels = {
    DiscLevel::T12L1, DiscLevel::L1L2, DiscLevel::L2L3,
    DiscLevel::L3L4,  DiscLevel::L4L5, DiscLevel::L5S1};

enum class StenosisSite : std::uint8_t { SCS, RFS, LFS };
inline constexpr std::size_t kSiteCount = 3;
inline constexpr std::array<StenosisSite, kSiteCount> kAllSites = {
    StenosisSite::SCS, StenosisSite::RFS, StenosisSite::LFS};

/// Vertebral bodies visible on the mid-sagittal slice, cranial to caudal.
enum class Vertebra : std::uint8_t { T12, L1, L2, L3, L4, L5, S1 };
inline constexpr std::size_t kVertebraCount = 7;
inline constexpr std::array<Vertebra, kVertebraCount> kAllVertebrae = {
    Vertebra::T12, Vertebra::L1, Vertebra::L2, Vertebra::L3,
    Vertebra::L4,  Vertebra::L5, Vertebra::S1};

/// Ordinal stenosis grade: 0 normal, 1 mild, 2 moderate, 3 severe.
class Grade {
public:
    static constexpr int kCount = 4;

    constexpr Grade() = default;
    /// Throws Error(GradeOutOfRange) outside 0..3.
    static Grade from_int(int value);

    constexpr int value() const noexcept { return value_; }
    friend constexpr auto operator<=>(Grade, Grade) = default;

private:
    constexpr explicit Grade(int v) : value_(v) {}
    int value_ = 0;
};

inline constexpr std::size_t index(DiscLevel l) noexcept { return static_cast<std::size_t>(l); }
inline constexpr std::size_t index(StenosisSite s) noexcept { return static_cast<std::size_t>(s); }
inline constexpr std::size_t index(Vertebra v) noexcept { return static_cast<std::size_t>(v); }

std::string_view to_string(DiscLevel level) noexcept;
std::string_view to_string(StenosisSite site) noexcept;
std::string_view to_string(Vertebra v) noexcept;
std::string_view grade_name(Grade g) noexcept;

/// Accepts the canonical spelling ("L4L5", "SCS", "L5") case-insensitively.
std::optional<DiscLevel> parse_disc_level(std::string_view text);
std::optional<StenosisSite> parse_site(std::string_view text);
std::optional<Vertebra> parse_vertebra(std::string_view text);

/// The disc between two consecutive vertebrae (cranial first), if they are adjacent.
std::optional<DiscLevel> disc_between(Vertebra cranial, Vertebra caudal) noexcept;
Vertebra cranial_vertebra(DiscLevel level) noexcept;
Vertebra caudal_vertebra(DiscLevel level) noexcept;

/// Half-open byte range into the original (un-normalized) report text.
struct TextSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
    friend bool operator==(const TextSpan&, const TextSpan&) = default;
};

struct Provenance {
    StenosisSite site;
    TextSpan span;       // covers the severity descriptor in the original text
    std::string matched; // the descriptor as it appeared in the normalized text
    friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// Grades for one disc level; any subset of the three sites may be present.
class StenosisLabelSet {
public:
    StenosisLabelSet() = default;
    explicit StenosisLabelSet(DiscLevel level) : level_(level) {}

    DiscLevel level() const noexcept { return level_; }
    std::optional<Grade> grade(StenosisSite site) const noexcept { return grades_[index(site)]; }
    bool has(StenosisSite site) const noexcept { return grades_[index(site)].has_value(); }
    bool complete() const noexcept;
    std::size_t labeled_count() const noexcept;
    const std::vector<Provenance>& provenance() const noexcept { return provenance_; }

    /// Records the grade unless the site already holds one. Returns false when an existing
    /// grade was kept (same-valued repeats still append their provenance).
    bool assign(StenosisSite site, Grade grade, Provenance prov);
    /// Grade without provenance, for tables read back from disk.
    void set(StenosisSite site, Grade grade) { grades_[index(site)] = grade; }

    friend bool operator==(const StenosisLabelSet&, const StenosisLabelSet&) = default;

private:
    DiscLevel level_ = DiscLevel::T12L1;
    std::array<std::optional<Grade>, kSiteCount> grades_{};
    std::vector<Provenance> provenance_;
};

}  // namespace spinegrade
