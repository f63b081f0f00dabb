#pragma once

#include "dialogkit/dialog.hpp"
#include "dialogkit/sentence_split.hpp"

#include <string>
#include <vector>

namespace dialogkit {

/// Prompt template for the leading writer turn. "{title}" is substituted
/// with the passage title.
inline constexpr const char* kDefaultPromptTemplate =
    "Hello, I am an automated assistant and can answer questions about {title}";

inline constexpr int kDefaultMaxSentences = 6;

/// A titled passage plus its sentence segmentation.
struct Passage {
    std::string id;
    std::string title;
    std::string text;
    std::vector<std::string> sentences;

    /// Segment text (whitespace-normalized) and keep the first
    /// max_sentences sentences.
    static Passage from_text(std::string id, std::string title, std::string text,
                             const SentenceSplitter& splitter,
                             int max_sentences = kDefaultMaxSentences);
};

std::string render_prompt(const std::string& prompt_template,
                          const std::string& title);

/// Interleave the passage sentences with masked reader turns:
/// (prompt, mask, s_1, mask, ..., mask, s_m), 2m+1 turns total. The dialog
/// inherits the passage id. Throws DataError if the passage has no
/// sentences.
Dialog build_partial_dialog(const Passage& p,
                            const std::string& prompt_template = kDefaultPromptTemplate,
                            const std::string& mask_literal = kMaskLiteral);

std::string passage_to_json(const Passage& p);

/// Load {"id","title","text"} records, segmenting each text. Records whose
/// text contains the mask literal are rejected.
std::vector<Passage> load_passages(const std::string& path,
                                   const SentenceSplitter& splitter,
                                   int max_sentences = kDefaultMaxSentences,
                                   const std::string& mask_literal = kMaskLiteral);

void save_passages(const std::string& path, const std::vector<Passage>& passages);

} // namespace dialogkit
