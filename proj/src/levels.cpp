#include "spinegrade/levels.hpp"

#include <algorithm>
#include <cctype>

#include "spinegrade/error.hpp"

namespace spinegrade {

namespace {

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) ==
                      std::tolower(static_cast<unsigned char>(y));
           });
}

}  // namespace

Grade Grade::from_int(int value) {
    if (value < 0 || value >= kCount) {
        throw Error(ErrorCode::GradeOutOfRange, "grade " + std::to_string(value) + " not in 0..3");
    }
    return Grade(value);
}

std::string_view to_string(DiscLevel level) noexcept {
    static constexpr std::array<std::string_view, kDiscLevelCount> names = {
        "T12L1", "L1L2", "L2L3", "L3L4", "L4L5", "L5S1"};
    return names[index(level)];
}

std::string_view to_string(StenosisSite site) noexcept {
    static constexpr std::array<std::string_view, kSiteCount> names = {"SCS", "RFS", "LFS"};
    return names[index(site)];
}

std::string_view to_string(Vertebra v) noexcept {
    static constexpr std::array<std::string_view, kVertebraCount> names = {
        "T12", "L1", "L2", "L3", "L4", "L5", "S1"};
    return names[index(v)];
}

std::string_view grade_name(Grade g) noexcept {
    static constexpr std::array<std::string_view, Grade::kCount> names = {
        "normal", "mild", "moderate", "severe"};
    return names[static_cast<std::size_t>(g.value())];
}

std::optional<DiscLevel> parse_disc_level(std::string_view text) {
    for (DiscLevel l : kAllDiscLevels) {
        if (iequals(text, to_string(l))) return l;
    }
    return std::nullopt;
}

std::optional<StenosisSite> parse_site(std::string_view text) {
    for (StenosisSite s : kAllSites) {
        if (iequals(text, to_string(s))) return s;
    }
    return std::nullopt;
}

std::optional<Vertebra> parse_vertebra(std::string_view text) {
    for (Vertebra v : kAllVertebrae) {
        if (iequals(text, to_string(v))) return v;
    }
    return std::nullopt;
}

std::optional<DiscLevel> disc_between(Vertebra cranial, Vertebra caudal) noexcept {
    if (index(caudal) != index(cranial) + 1) return std::nullopt;
    return static_cast<DiscLevel>(index(cranial));
}

Vertebra cranial_vertebra(DiscLevel level) noexcept { return static_cast<Vertebra>(index(level)); }
Vertebra caudal_vertebra(DiscLevel level) noexcept { return static_cast<Vertebra>(index(level) + 1); }

bool StenosisLabelSet::complete() const noexcept { return labeled_count() == kSiteCount; }

std::size_t StenosisLabelSet::labeled_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(grades_.begin(), grades_.end(), [](const auto& g) { return g.has_value(); }));
}

bool StenosisLabelSet::assign(StenosisSite site, Grade grade, Provenance prov) {
    auto& slot = grades_[index(site)];
    if (slot && *slot != grade) return false;
    slot = grade;
    prov.site = site;
    provenance_.push_back(std::move(prov));
    return true;
}

}  // namespace spinegrade
