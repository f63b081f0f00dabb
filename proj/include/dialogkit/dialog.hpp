#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace dialogkit {

/// Default mask glyph for unobserved turns (U+22C4). Configurable at every
/// call site; source text containing it is rejected at ingestion because the
/// serialized form has no escaping.
inline constexpr const char* kMaskLiteral = "⋄";

/// Who said a turn and where it came from.
///   Prompt    - leading writer utterance announcing the document title
///   Sentence  - a writer turn lifted verbatim from the source passage
///   Generated - a reader turn produced by a generator backend
///   Masked    - an unobserved turn, text is the mask literal
enum class Source { Prompt, Sentence, Generated, Masked };

const char* to_string(Source s);
Source source_from_string(const std::string& s);

struct Utterance {
    int speaker = 0; // 0 = writer/answerer, 1 = imagined reader/asker
    std::string text;
    Source source = Source::Sentence;
};

/// An ordered two-speaker dialog. Turn indices are 1-based everywhere in
/// this toolkit.
struct Dialog {
    std::string id;
    std::string title;
    std::optional<std::string> passage_id;
    std::vector<Utterance> utterances;

    int turn_count() const { return static_cast<int>(utterances.size()); }
};

/// Sorted set of 1-based turn indices to mask.
struct MaskSpec {
    std::set<int> indices;
};

struct Violation {
    int turn = 0; // 1-based; 0 for dialog-level problems
    std::string rule;
};

/// Copy of `d` with every turn in `spec` replaced by the mask literal
/// (source Masked). Throws DataError on an out-of-range or empty spec.
Dialog mask_utterances(const Dialog& d, const MaskSpec& spec,
                       const std::string& mask_literal = kMaskLiteral);

/// Flat generator-input form: "«speaker»:«text»" segments joined by single
/// spaces, in turn order. Masked turns render as "«speaker»:«mask»".
///
/// Note the format is write-only: utterance text containing " 0:" or " 1:"
/// would be ambiguous to parse back, and nothing here ever parses it.
std::string serialize(const Dialog& d, const std::string& mask_literal = kMaskLiteral);

/// Empty result iff all invariants hold: at least one turn, speakers in
/// {0,1}, masked turns carry exactly the mask literal and vice versa,
/// prompt turns are speaker 0, unmasked turns are non-empty.
std::vector<Violation> validate(const Dialog& d,
                                const std::string& mask_literal = kMaskLiteral);

// JSONL record conversion; see README for the schema.
std::string dialog_to_json(const Dialog& d);
Dialog dialog_from_json(const std::string& line);

std::vector<Dialog> load_dialogs(const std::string& path,
                                 const std::string& mask_literal = kMaskLiteral);
void save_dialogs(const std::string& path, const std::vector<Dialog>& dialogs);

} // namespace dialogkit
