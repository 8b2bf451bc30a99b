#include "spinegrade/report_parser.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "spinegrade/error.hpp"

namespace spinegrade::report {

namespace {

#include "vocabulary_table.inc"  // defines kBuiltinVocabulary

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_word_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80;
}

struct Token {
    std::size_t begin;
    std::size_t end;
    bool word;
};

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (c == ' ') {
            ++i;
        } else if (is_word_byte(c)) {
            std::size_t j = i;
            while (j < text.size() && is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
            tokens.push_back({i, j, true});
            i = j;
        } else {
            tokens.push_back({i, i + 1, false});
            ++i;
        }
    }
    return tokens;
}

std::vector<std::string_view> token_views(std::string_view text, const std::vector<Token>& tokens) {
    std::vector<std::string_view> views;
    views.reserve(tokens.size());
    for (const auto& t : tokens) views.push_back(text.substr(t.begin, t.end - t.begin));
    return views;
}

// Output byte plus the raw offset it originated from.
struct Glyph {
    char c;
    std::size_t offset;
};

}  // namespace

// ---------------------------------------------------------------------------
// normalization

NormalizedText normalize(std::string_view raw) {
    std::vector<Glyph> glyphs;
    glyphs.reserve(raw.size());

    // Pass 1: case folding, dash and slash unification, whitespace collapse.
    bool pending_space = false;
    for (std::size_t i = 0; i < raw.size();) {
        const auto c = static_cast<unsigned char>(raw[i]);
        char out = 0;
        std::size_t width = 1;
        bool space = false;
        if (c == 0xE2 && i + 2 < raw.size() && static_cast<unsigned char>(raw[i + 1]) == 0x80 &&
            static_cast<unsigned char>(raw[i + 2]) >= 0x90 &&
            static_cast<unsigned char>(raw[i + 2]) <= 0x95) {
            out = '-';  // U+2010..U+2015
            width = 3;
        } else if (c == 0xE2 && i + 2 < raw.size() && static_cast<unsigned char>(raw[i + 1]) == 0x88 &&
                   static_cast<unsigned char>(raw[i + 2]) == 0x92) {
            out = '-';  // U+2212
            width = 3;
        } else if (c == 0xC2 && i + 1 < raw.size() && static_cast<unsigned char>(raw[i + 1]) == 0xA0) {
            space = true;
            width = 2;
        } else if (is_space(c)) {
            space = true;
        } else if (c == '/') {
            out = '-';
        } else if (c < 0x80) {
            out = static_cast<char>(std::tolower(c));
        } else {
            out = static_cast<char>(c);
        }
        if (space) {
            pending_space = !glyphs.empty();
        } else {
            if (pending_space) glyphs.push_back({' ', i});
            pending_space = false;
            glyphs.push_back({out, i});
        }
        i += width;
    }

    // Pass 2: no spaces around hyphens ("l4 - l5" -> "l4-l5").
    std::vector<Glyph> tight;
    tight.reserve(glyphs.size());
    for (std::size_t i = 0; i < glyphs.size(); ++i) {
        if (glyphs[i].c == ' ') {
            const bool before_hyphen = i + 1 < glyphs.size() && glyphs[i + 1].c == '-';
            const bool after_hyphen = !tight.empty() && tight.back().c == '-';
            if (before_hyphen || after_hyphen) continue;
        }
        tight.push_back(glyphs[i]);
    }

    // Pass 3: "neuro-foramen" / "neuro foramen" -> "neuroforamen".
    std::vector<Glyph> joined;
    joined.reserve(tight.size());
    auto matches_at = [&](std::size_t pos, std::string_view word) {
        if (pos + word.size() > tight.size()) return false;
        for (std::size_t k = 0; k < word.size(); ++k) {
            if (tight[pos + k].c != word[k]) return false;
        }
        return true;
    };
    for (std::size_t i = 0; i < tight.size(); ++i) {
        joined.push_back(tight[i]);
        const bool word_start = i == 0 || !is_word_byte(static_cast<unsigned char>(tight[i - 1].c));
        if (word_start && matches_at(i, "neuro") && i + 5 < tight.size() &&
            (tight[i + 5].c == '-' || tight[i + 5].c == ' ') && matches_at(i + 6, "foram")) {
            for (std::size_t k = 1; k < 5; ++k) joined.push_back(tight[i + k]);
            i += 5;  // skips the separator
        }
    }

    NormalizedText result;
    result.text.reserve(joined.size());
    result.offsets.reserve(joined.size() + 1);
    for (const auto& g : joined) {
        result.text.push_back(g.c);
        result.offsets.push_back(g.offset);
    }
    result.offsets.push_back(raw.size());
    return result;
}

// ---------------------------------------------------------------------------
// vocabulary

std::string_view Vocabulary::builtin_table_text() { return kBuiltinVocabulary; }

const Vocabulary& Vocabulary::builtin() {
    static const Vocabulary vocab = parse(kBuiltinVocabulary);
    return vocab;
}

Vocabulary Vocabulary::parse(std::string_view table_text) {
    Vocabulary vocab;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= table_text.size()) {
        std::size_t eol = table_text.find('\n', pos);
        if (eol == std::string_view::npos) eol = table_text.size();
        std::string_view line = table_text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;

        auto fail = [&](const std::string& why) {
            throw Error(ErrorCode::InvalidConfig,
                        "vocabulary line " + std::to_string(line_no) + ": " + why);
        };
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string_view::npos || line.find('\t', t2 + 1) != std::string_view::npos) {
            fail("expected three tab-separated fields");
        }
        const std::string surface = normalize_text(line.substr(0, t1));
        const std::string_view category = line.substr(t1 + 1, t2 - t1 - 1);
        const std::string_view value = line.substr(t2 + 1);
        if (surface.empty()) fail("empty surface form");

        VocabularyEntry entry{surface, Category::Severity, 0};
        if (category == "severity") {
            if (value.size() != 1 || value[0] < '0' || value[0] > '3') fail("severity must be 0..3");
            entry.value = value[0] - '0';
        } else if (category == "negation") {
            entry.category = Category::Negation;
        } else if (category == "site") {
            entry.category = Category::Site;
            if (value == "canal") entry.value = static_cast<int>(SiteNoun::Canal);
            else if (value == "foramen") entry.value = static_cast<int>(SiteNoun::Foramen);
            else fail("site must be canal or foramen");
        } else if (category == "stenosis") {
            entry.category = Category::Stenosis;
        } else if (category == "laterality") {
            entry.category = Category::Laterality;
            if (value == "right") entry.value = static_cast<int>(Side::Right);
            else if (value == "left") entry.value = static_cast<int>(Side::Left);
            else if (value == "bilateral") entry.value = static_cast<int>(Side::Bilateral);
            else fail("laterality must be right, left or bilateral");
        } else if (category == "connective") {
            entry.category = Category::Connective;
            if (value == "and") entry.value = 0;
            else if (value == "break") entry.value = 1;
            else fail("connective must be and or break");
        } else {
            fail("unknown category '" + std::string(category) + "'");
        }
        vocab.entries_.push_back(std::move(entry));
    }

    for (std::size_t i = 0; i < vocab.entries_.size(); ++i) {
        const auto& surface = vocab.entries_[i].surface;
        const auto toks = tokenize(surface);
        Compiled c{{}, i};
        for (const auto& t : toks) c.tokens.emplace_back(surface.substr(t.begin, t.end - t.begin));
        vocab.compiled_.push_back(std::move(c));
    }
    std::stable_sort(vocab.compiled_.begin(), vocab.compiled_.end(),
                     [](const Compiled& a, const Compiled& b) { return a.tokens.size() > b.tokens.size(); });
    return vocab;
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open vocabulary " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

Vocabulary::Match Vocabulary::longest_match(const std::vector<std::string_view>& tokens,
                                            std::size_t pos) const {
    for (const auto& c : compiled_) {
        if (pos + c.tokens.size() > tokens.size()) continue;
        bool ok = true;
        for (std::size_t k = 0; k < c.tokens.size() && ok; ++k) ok = tokens[pos + k] == c.tokens[k];
        if (ok) return {&entries_[c.entry], c.tokens.size()};
    }
    return {};
}

// ---------------------------------------------------------------------------
// sentence segmentation and level scoping

std::string_view to_string(DiagnosticKind kind) noexcept {
    switch (kind) {
        case DiagnosticKind::Unscoped: return "Unscoped";
        case DiagnosticKind::UnknownSeverity: return "UnknownSeverity";
        case DiagnosticKind::AmbiguousBinding: return "AmbiguousBinding";
        case DiagnosticKind::ConflictingGrade: return "ConflictingGrade";
        case DiagnosticKind::MultipleLevels: return "MultipleLevels";
    }
    return "Unknown";
}

namespace {

std::optional<Vertebra> vertebra_token(std::string_view tok, bool allow_bare_digit) {
    if (tok == "t12") return Vertebra::T12;
    if (tok == "s1") return Vertebra::S1;
    if (tok.size() == 2 && tok[0] == 'l' && tok[1] >= '1' && tok[1] <= '5') {
        return static_cast<Vertebra>(tok[1] - '0');
    }
    if (allow_bare_digit && tok.size() == 1 && tok[0] >= '1' && tok[0] <= '5') {
        return static_cast<Vertebra>(tok[0] - '0');
    }
    return std::nullopt;
}

struct LevelMention {
    DiscLevel level;
    std::size_t tokens;  // number of tokens consumed
};

// "l4-l5", "l4-5", "l5-s1", "t12-l1", and the fused spellings "l45", "l4l5", "l5s1".
std::optional<LevelMention> level_mention_at(const std::vector<std::string_view>& toks, std::size_t i) {
    if (i + 2 < toks.size() && toks[i + 1] == "-") {
        const auto upper = vertebra_token(toks[i], false);
        const auto lower = vertebra_token(toks[i + 2], true);
        if (upper && lower) {
            if (auto disc = disc_between(*upper, *lower)) return LevelMention{*disc, 3};
        }
    }
    const std::string_view tok = toks[i];
    for (std::size_t split = 2; split + 1 <= tok.size() && split <= 3; ++split) {
        const auto upper = vertebra_token(tok.substr(0, split), false);
        const auto lower = vertebra_token(tok.substr(split), true);
        if (upper && lower) {
            if (auto disc = disc_between(*upper, *lower)) return LevelMention{*disc, 1};
        }
    }
    return std::nullopt;
}

bool has_alpha(std::string_view s) {
    return std::any_of(s.begin(), s.end(), [](char c) { return c >= 'a' && c <= 'z'; });
}

}  // namespace

Segmentation segment_and_scope(std::string_view text) {
    Segmentation out;
    const auto tokens = tokenize(text);
    const auto toks = token_views(text, tokens);

    std::optional<DiscLevel> current;
    std::set<DiscLevel> mentioned;
    std::size_t start = 0;
    std::vector<DiscLevel> inline_mentions;

    auto flush = [&](std::size_t end_tok) {
        if (end_tok > start) {
            const std::size_t b = tokens[start].begin;
            const std::size_t e = tokens[end_tok - 1].end;
            const std::string_view sentence = text.substr(b, e - b);
            if (has_alpha(sentence) || !inline_mentions.empty()) {
                std::optional<DiscLevel> scope = current;
                if (!inline_mentions.empty()) {
                    scope = inline_mentions.front();
                    const std::set<DiscLevel> distinct(inline_mentions.begin(), inline_mentions.end());
                    if (distinct.size() > 1) {
                        out.diagnostics.push_back({DiagnosticKind::MultipleLevels, scope, {b, e},
                                                   "sentence names several levels; using the first"});
                    }
                    current = inline_mentions.back();
                }
                if (scope) {
                    out.sentences.push_back({std::string(sentence), {b, e}, *scope});
                    mentioned.insert(*scope);
                } else {
                    out.diagnostics.push_back({DiagnosticKind::Unscoped, std::nullopt, {b, e},
                                               "sentence precedes any level mention"});
                }
            }
        }
        inline_mentions.clear();
    };

    for (std::size_t i = 0; i < toks.size();) {
        if (auto m = level_mention_at(toks, i)) {
            const std::size_t after = i + m->tokens;
            if (after < toks.size() && toks[after] == ":") {
                flush(i);
                current = m->level;
                mentioned.insert(m->level);
                i = after + 1;
                start = i;
                continue;
            }
            inline_mentions.push_back(m->level);
            mentioned.insert(m->level);
            i = after;
            continue;
        }
        const std::string_view t = toks[i];
        if (t == "." || t == "!" || t == "?") {
            // A period glued between two digits is a decimal point.
            const bool decimal = t == "." && i > 0 && i + 1 < toks.size() &&
                                 tokens[i - 1].end == tokens[i].begin &&
                                 tokens[i + 1].begin == tokens[i].end &&
                                 std::isdigit(static_cast<unsigned char>(toks[i - 1].back())) &&
                                 std::isdigit(static_cast<unsigned char>(toks[i + 1].front()));
            if (!decimal) {
                flush(i + 1);
                start = i + 1;
            }
        }
        ++i;
    }
    flush(toks.size());
    out.mentioned.assign(mentioned.begin(), mentioned.end());
    return out;
}

// ---------------------------------------------------------------------------
// severity matching and clause binding

Grade match_severity(std::string_view phrase, const Vocabulary& vocab) {
    const std::string norm = normalize_text(phrase);
    const auto tokens = tokenize(norm);
    const auto toks = token_views(norm, tokens);
    for (std::size_t i = 0; i < toks.size();) {
        const auto m = vocab.longest_match(toks, i);
        if (m.entry && (m.entry->category == Category::Severity || m.entry->category == Category::Negation)) {
            return Grade::from_int(m.entry->category == Category::Negation ? 0 : m.entry->value);
        }
        i += m.entry ? m.length : 1;
    }
    throw Error(ErrorCode::UnknownSeverity, "no severity descriptor in '" + std::string(phrase) + "'");
}

namespace {

enum class Join { And, Break, Sentence };

struct SeverityMark {
    int value;
    bool negation;      // "no significant", "without", ...
    bool normal_word;   // "normal", "unremarkable"
    std::size_t begin;  // normalized-sentence coordinates
    std::size_t end;
};

struct Clause {
    std::vector<SeverityMark> severities;
    std::optional<SeverityMark> inherited;
    bool canal = false;
    bool foramen = false;
    std::vector<Side> sides;
    bool stenosis = false;
    bool side_after_severity = false;
    std::size_t content_words = 0;  // words outside the vocabulary and the filler list
    std::size_t begin = 0;
    std::size_t end = 0;
    Join join_next = Join::Sentence;

    bool has_site() const { return canal || foramen; }
    bool has_nouns() const { return has_site() || stenosis; }
    bool empty() const {
        return severities.empty() && !has_site() && sides.empty() && !stenosis && content_words == 0;
    }
};

bool is_filler(std::string_view w) {
    static const std::set<std::string_view, std::less<>> filler = {
        "is", "are", "was", "were", "be", "there", "the", "a", "an", "at", "this", "that", "level",
        "levels", "otherwise", "appears", "appear", "essentially", "within", "limits", "all",
        "findings", "seen", "present", "noted", "identified", "observed", "also", "of", "which",
        "as", "well", "in", "on"};
    if (filler.count(w)) return true;
    // level and number tokens ("l4", "5", "t12") carry no clinical content here
    const bool digits = std::all_of(w.begin(), w.end(), [](char c) { return c >= '0' && c <= '9'; });
    const bool vertebra_like = w.size() >= 2 && (w[0] == 'l' || w[0] == 's' || w[0] == 't') &&
                               std::all_of(w.begin() + 1, w.end(), [](char c) { return c >= '0' && c <= '9'; });
    return digits || vertebra_like;
}

std::vector<Clause> split_clauses(std::string_view text, const Vocabulary& vocab) {
    const auto tokens = tokenize(text);
    const auto toks = token_views(text, tokens);
    std::vector<Clause> clauses;
    Clause cur;
    bool started = false;

    auto close = [&](Join join) {
        if (started && !cur.empty()) {
            cur.join_next = join;
            clauses.push_back(std::move(cur));
        } else if (!clauses.empty() && join != Join::And) {
            // An empty clause between separators weakens the previous join.
            if (join == Join::Sentence || clauses.back().join_next == Join::And) clauses.back().join_next = join;
        }
        cur = Clause{};
        started = false;
    };
    auto touch = [&](std::size_t b, std::size_t e) {
        if (!started) cur.begin = b;
        started = true;
        cur.end = e;
    };

    for (std::size_t i = 0; i < toks.size();) {
        const auto m = vocab.longest_match(toks, i);
        if (m.entry) {
            const std::size_t b = tokens[i].begin;
            const std::size_t e = tokens[i + m.length - 1].end;
            const auto& entry = *m.entry;
            switch (entry.category) {
                case Category::Severity:
                case Category::Negation: {
                    if (!cur.severities.empty() && cur.side_after_severity) close(Join::And);
                    touch(b, e);
                    const bool neg = entry.category == Category::Negation;
                    cur.severities.push_back({neg ? 0 : entry.value, neg, !neg && entry.value == 0, b, e});
                    break;
                }
                case Category::Site:
                    touch(b, e);
                    (entry.value == static_cast<int>(SiteNoun::Canal) ? cur.canal : cur.foramen) = true;
                    break;
                case Category::Stenosis:
                    touch(b, e);
                    cur.stenosis = true;
                    break;
                case Category::Laterality:
                    touch(b, e);
                    cur.sides.push_back(static_cast<Side>(entry.value));
                    if (!cur.severities.empty()) cur.side_after_severity = true;
                    break;
                case Category::Connective:
                    close(entry.value == 0 ? Join::And : Join::Break);
                    break;
            }
            i += m.length;
            continue;
        }
        const std::string_view t = toks[i];
        if (t == ",") {
            close(Join::And);
        } else if (t == ";" || t == ":") {
            close(Join::Break);
        } else if (t == "." || t == "!" || t == "?") {
            close(Join::Sentence);
        } else if (tokens[i].word) {
            touch(tokens[i].begin, tokens[i].end);
            if (!is_filler(t)) ++cur.content_words;
        }
        ++i;
    }
    close(Join::Sentence);
    return clauses;
}

using SpanMapper = std::function<TextSpan(std::size_t, std::size_t)>;

void bind(std::string_view text, std::vector<Clause>& clauses, SentenceLabels& out, DiscLevel scope,
          const SpanMapper& map_span) {
    // Elided head nouns: "mild right and moderate left foraminal narrowing" lets the first
    // conjunct borrow "foraminal narrowing" from the second.
    for (std::size_t k = clauses.size(); k-- > 1;) {
        const std::size_t i = k - 1;
        Clause& c = clauses[i];
        const Clause& next = clauses[k];
        if (c.join_next == Join::And && !c.has_nouns() && (!c.severities.empty() || !c.sides.empty()) &&
            next.has_nouns()) {
            c.canal = next.canal;
            c.foramen = next.foramen;
            c.stenosis = next.stenosis;
        }
    }

    // Shared severities: "mild right and left foraminal stenosis".
    for (std::size_t i = 0; i < clauses.size(); ++i) {
        Clause& c = clauses[i];
        if (!c.severities.empty() || !c.has_nouns()) continue;
        if (i > 0 && clauses[i - 1].join_next == Join::And) {
            const Clause& prev = clauses[i - 1];
            if (!prev.severities.empty()) c.inherited = prev.severities.front();
            else if (prev.inherited) c.inherited = prev.inherited;
        }
        if (!c.inherited && c.join_next == Join::And && i + 1 < clauses.size() &&
            !clauses[i + 1].severities.empty()) {
            c.inherited = clauses[i + 1].severities.front();
        }
        if (!c.inherited) {
            out.diagnostics.push_back({DiagnosticKind::UnknownSeverity, scope, map_span(c.begin, c.end),
                                       "stenosis mention without a severity descriptor: '" +
                                           std::string(text.substr(c.begin, c.end - c.begin)) + "'"});
        }
    }

    for (const Clause& c : clauses) {
        std::optional<SeverityMark> mark;
        if (!c.severities.empty()) {
            const int v = c.severities.front().value;
            const bool consistent = std::all_of(c.severities.begin(), c.severities.end(),
                                                [v](const SeverityMark& s) { return s.value == v; });
            if (!consistent) {
                if (c.has_nouns() || !c.sides.empty()) {
                    out.diagnostics.push_back({DiagnosticKind::AmbiguousBinding, scope, map_span(c.begin, c.end),
                                               "conflicting severity descriptors in one clause: '" +
                                                   std::string(text.substr(c.begin, c.end - c.begin)) + "'"});
                }
                continue;
            }
            mark = c.severities.front();
        } else if (c.inherited) {
            mark = c.inherited;
        }
        if (!mark) continue;

        std::vector<StenosisSite> targets;
        if (c.canal) targets.push_back(StenosisSite::SCS);
        const bool lateral_only = !c.has_site() && !c.sides.empty();
        if (c.foramen || (lateral_only && c.stenosis)) {
            if (c.sides.empty()) {
                targets.push_back(StenosisSite::RFS);
                targets.push_back(StenosisSite::LFS);
            }
            for (Side s : c.sides) {
                if (s != Side::Left) targets.push_back(StenosisSite::RFS);
                if (s != Side::Right) targets.push_back(StenosisSite::LFS);
            }
        }
        if (!c.has_site() && c.sides.empty()) {
            const bool level_wide_normal = mark->normal_word && !c.stenosis && c.content_words == 0;
            const bool global_negation = mark->value == 0 && c.stenosis;
            if (level_wide_normal || global_negation) {
                targets = {StenosisSite::SCS, StenosisSite::RFS, StenosisSite::LFS};
            } else if (c.stenosis || (mark->value > 0 && c.content_words == 0)) {
                out.diagnostics.push_back({DiagnosticKind::AmbiguousBinding, scope, map_span(c.begin, c.end),
                                           "severity with no site or laterality cue: '" +
                                               std::string(text.substr(c.begin, c.end - c.begin)) + "'"});
                continue;
            }
        }
        if (targets.empty()) continue;

        const std::string matched(text.substr(mark->begin, mark->end - mark->begin));
        const Grade grade = Grade::from_int(mark->value);
        std::set<StenosisSite> done;
        for (StenosisSite site : targets) {
            if (!done.insert(site).second) continue;
            if (!out.labels.assign(site, grade, {site, map_span(mark->begin, mark->end), matched})) {
                out.diagnostics.push_back(
                    {DiagnosticKind::ConflictingGrade, scope, map_span(mark->begin, mark->end),
                     std::string(to_string(site)) + " already graded " +
                         std::to_string(out.labels.grade(site)->value()) + "; ignoring '" + matched + "'"});
            }
        }
    }
}

SentenceLabels extract_normalized(std::string_view normalized, DiscLevel scope, const Vocabulary& vocab,
                                  const SpanMapper& map_span) {
    SentenceLabels out{StenosisLabelSet(scope), {}};
    auto clauses = split_clauses(normalized, vocab);
    bind(normalized, clauses, out, scope, map_span);
    return out;
}

}  // namespace

SentenceLabels extract_labels(std::string_view sentence, DiscLevel scope, const Vocabulary& vocab) {
    const NormalizedText norm = normalize(sentence);
    return extract_normalized(norm.text, scope, vocab,
                              [&](std::size_t b, std::size_t e) { return norm.to_original(b, e); });
}

ReportParse parse_report(std::string_view raw, const Vocabulary& vocab) {
    ReportParse result;
    const NormalizedText norm = normalize(raw);
    const Segmentation seg = segment_and_scope(norm.text);

    for (auto d : seg.diagnostics) {
        d.span = norm.to_original(d.span.begin, d.span.end);
        result.diagnostics.push_back(std::move(d));
    }

    std::map<DiscLevel, StenosisLabelSet> by_level;
    for (DiscLevel l : seg.mentioned) by_level.try_emplace(l, l);
    for (const auto& sentence : seg.sentences) {
        const std::size_t base = sentence.span.begin;
        auto mapper = [&](std::size_t b, std::size_t e) { return norm.to_original(base + b, base + e); };
        SentenceLabels part = extract_normalized(sentence.text, sentence.scope, vocab, mapper);
        auto [it, inserted] = by_level.try_emplace(sentence.scope, sentence.scope);
        StenosisLabelSet& level = it->second;
        for (const Provenance& p : part.labels.provenance()) {
            const Grade g = *part.labels.grade(p.site);
            if (!level.assign(p.site, g, p)) {
                result.diagnostics.push_back(
                    {DiagnosticKind::ConflictingGrade, sentence.scope, p.span,
                     std::string(to_string(p.site)) + " already graded " +
                         std::to_string(level.grade(p.site)->value()) + " at " +
                         std::string(to_string(sentence.scope)) + "; ignoring '" + p.matched + "'"});
            }
        }
        for (auto& d : part.diagnostics) result.diagnostics.push_back(std::move(d));
    }

    for (auto& [level, labels] : by_level) result.levels.push_back(std::move(labels));
    result.complete = result.levels.size() == kDiscLevelCount &&
                      std::all_of(result.levels.begin(), result.levels.end(),
                                  [](const StenosisLabelSet& s) { return s.complete(); });
    return result;
}

// ---------------------------------------------------------------------------
// file interfaces

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void append_inputs(const std::filesystem::path& p, std::vector<std::pair<std::string, std::string>>& out) {
    const std::string content = read_file(p);
    std::vector<std::string_view> lines;
    std::string_view rest = content;
    while (!rest.empty()) {
        auto eol = rest.find('\n');
        std::string_view line = rest.substr(0, eol);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) lines.push_back(line);
        if (eol == std::string_view::npos) break;
        rest.remove_prefix(eol + 1);
    }
    const bool records = !lines.empty() && std::all_of(lines.begin(), lines.end(), [](std::string_view l) {
        const auto tab = l.find('\t');
        return tab != std::string_view::npos && tab > 0;
    });
    if (records) {
        for (auto l : lines) {
            const auto tab = l.find('\t');
            out.emplace_back(std::string(l.substr(0, tab)), std::string(l.substr(tab + 1)));
        }
    } else {
        out.emplace_back(p.stem().string(), content);
    }
}

}  // namespace

std::vector<std::pair<std::string, std::string>> read_report_inputs(const std::string& path) {
    namespace fs = std::filesystem;
    std::vector<std::pair<std::string, std::string>> out;
    const fs::path root(path);
    if (fs::is_directory(root)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(root)) {
            if (e.is_regular_file()) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) append_inputs(f, out);
    } else if (fs::is_regular_file(root)) {
        append_inputs(root, out);
    } else {
        throw Error(ErrorCode::Io, "no such report input: " + path);
    }
    return out;
}

void write_label_csv(std::ostream& out, const std::vector<StudyLabels>& studies) {
    out << "study_id,level,scs,rfs,lfs,complete\n";
    for (const auto& study : studies) {
        for (const auto& level : study.parse.levels) {
            out << study.study_id << ',' << to_string(level.level());
            for (StenosisSite s : kAllSites) {
                out << ',';
                if (auto g = level.grade(s)) out << g->value();
            }
            out << ',' << (study.parse.complete ? "true" : "false") << '\n';
        }
    }
}

}  // namespace spinegrade::report
