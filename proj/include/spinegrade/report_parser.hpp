#pragma once

// Free-text lumbar MRI report -> per-level ordinal stenosis labels.
//
// The parser is a fixed cascade over normalized text:
//   normalize_text -> segment_and_scope -> (per sentence) extract_labels -> merge per level.
// All surface vocabulary (severity descriptors, site nouns, stenosis synonyms,
// laterality words, negation cues, clause connectives) lives in a Vocabulary table that
// can be loaded from a TSV file, so new synonyms need no code changes.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spinegrade/levels.hpp"

namespace spinegrade::report {

enum class Category { Severity, Negation, Site, Stenosis, Laterality, Connective };

enum class SiteNoun { Canal, Foramen };
enum class Side { Right, Left, Bilateral };

struct VocabularyEntry {
    std::string surface;  // normalized form
    Category category;
    int value = 0;  // grade for Severity, SiteNoun/Side ordinal for Site/Laterality
};

class Vocabulary {
public:
    /// The table shipped with the library (identical to data/vocabulary.tsv).
    static const Vocabulary& builtin();
    static std::string_view builtin_table_text();

    /// Parses `<surface form>\t<category>\t<value>` lines; '#' starts a comment line.
    /// Throws Error(InvalidConfig) naming the offending line.
    static Vocabulary parse(std::string_view table_text);
    static Vocabulary load(const std::string& path);

    const std::vector<VocabularyEntry>& entries() const noexcept { return entries_; }

    /// Longest entry whose token sequence starts at tokens[pos]; returns its token length.
    struct Match {
        const VocabularyEntry* entry = nullptr;
        std::size_t length = 0;
    };
    Match longest_match(const std::vector<std::string_view>& tokens, std::size_t pos) const;

private:
    struct Compiled {
        std::vector<std::string> tokens;
        std::size_t entry;
    };
    std::vector<VocabularyEntry> entries_;
    std::vector<Compiled> compiled_;  // sorted by token count, longest first
};

/// Lower-cased, whitespace-collapsed text plus, for every output byte, the byte offset of
/// the input character it came from (offsets.size() == text.size() + 1; the last entry is
/// the raw length).
struct NormalizedText {
    std::string text;
    std::vector<std::size_t> offsets;

    TextSpan to_original(std::size_t begin, std::size_t end) const {
        return {offsets[begin], end == begin ? offsets[begin] : offsets[end - 1] + 1};
    }
};

NormalizedText normalize(std::string_view raw);
inline std::string normalize_text(std::string_view raw) { return normalize(raw).text; }

enum class DiagnosticKind {
    Unscoped,            // sentence before any level mention; no labels taken from it
    UnknownSeverity,     // site/stenosis mention with no severity descriptor
    AmbiguousBinding,    // severity that could bind to several sites with no cue
    ConflictingGrade,    // second, different grade for an already-labeled site (first kept)
    MultipleLevels,      // one sentence names several levels; the first is used
};
std::string_view to_string(DiagnosticKind kind) noexcept;

struct Diagnostic {
    DiagnosticKind kind;
    std::optional<DiscLevel> level;
    TextSpan span;  // coordinates of the text the caller passed in
    std::string message;
};

struct ScopedSentence {
    std::string text;
    TextSpan span;  // in the normalized text
    DiscLevel scope;
};

struct Segmentation {
    std::vector<ScopedSentence> sentences;
    std::vector<Diagnostic> diagnostics;
    std::vector<DiscLevel> mentioned;  // every level named, headings included, cranial to caudal
};

/// Splits normalized text at sentence terminators and level headings ("l4-l5:") and gives
/// each sentence the most recent explicit level mention.
Segmentation segment_and_scope(std::string_view normalized_text);

/// Maps a severity phrase to a grade; intermediate descriptors round up.
/// Throws Error(UnknownSeverity) when no descriptor is present.
Grade match_severity(std::string_view phrase, const Vocabulary& vocab = Vocabulary::builtin());

struct SentenceLabels {
    StenosisLabelSet labels;
    std::vector<Diagnostic> diagnostics;
};

/// Binds the severities of one scoped sentence to SCS/RFS/LFS. Provenance spans are byte
/// offsets into `sentence`.
SentenceLabels extract_labels(std::string_view sentence, DiscLevel scope,
                              const Vocabulary& vocab = Vocabulary::builtin());

struct ReportParse {
    std::vector<StenosisLabelSet> levels;  // one per level mentioned, cranial to caudal
    std::vector<Diagnostic> diagnostics;   // spans refer to the raw report text
    bool complete = false;                 // all six levels carry all three grades
};

/// Never throws on report content; degraded parses surface as diagnostics.
ReportParse parse_report(std::string_view raw, const Vocabulary& vocab = Vocabulary::builtin());

/// One labeled report, as emitted to / read from the label CSV.
struct StudyLabels {
    std::string study_id;
    ReportParse parse;
};

/// Reads either a single report file (study id = file stem) or a `study_id<TAB>text` record
/// file (one report per line), or every regular file inside a directory.
std::vector<std::pair<std::string, std::string>> read_report_inputs(const std::string& path);

/// `study_id,level,scs,rfs,lfs,complete`; missing grades are empty fields.
void write_label_csv(std::ostream& out, const std::vector<StudyLabels>& studies);

}  // namespace spinegrade::report
