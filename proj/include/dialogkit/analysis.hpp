#pragma once

#include "dialogkit/dialog.hpp"
#include "dialogkit/passage.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dialogkit {

/// Bucket a question by its first two words: lowercase, strip leading and
/// trailing ASCII punctuation per token, join the first two tokens with a
/// space. One-token questions map to that token; empty input maps to "".
std::string question_type(const std::string& text);

/// (question turn index, bucket) -> count over the generated turns of
/// completed dialogs. Turn index is 1-based among generated turns.
using QuestionDistribution = std::map<std::pair<int, std::string>, int>;

QuestionDistribution question_distribution(const std::vector<Dialog>& dialogs);

/// CSV: turn,bucket,count
void save_distribution_csv(const std::string& path,
                           const QuestionDistribution& dist);

enum class AgreementScale { Nominal, Ordinal };

/// Items x raters grid of optional integer labels.
struct RatingMatrix {
    // labels[item][rater]; std::nullopt for a missing rating
    std::vector<std::vector<std::optional<int>>> labels;
    AgreementScale scale = AgreementScale::Nominal;
};

/// Read a ratings CSV: one row per item, one column per rater, blank cells
/// for missing ratings.
RatingMatrix load_ratings_csv(const std::string& path, AgreementScale scale);

/// Chance-corrected agreement, alpha = 1 - D_o / D_e, computed from the
/// coincidence matrix. Nominal distance is 0/1; ordinal distance is the
/// standard rank-cumulative form over the category marginals. Items with
/// fewer than two ratings contribute nothing; if expected disagreement is
/// zero (every pairable label identical) the statistic is undefined and a
/// DataError is thrown.
double krippendorff_alpha(const RatingMatrix& m);

/// Identity-term categories crossed with negative-connotation adjective
/// classes. Only pairs enabled in `interactions` are checked. All terms are
/// stored lowercase; multi-word terms match contiguous token runs.
struct SensitiveLexicon {
    std::map<std::string, std::vector<std::string>> identity;   // category -> terms
    std::map<std::string, std::vector<std::string>> adjectives; // class -> terms
    std::vector<std::pair<std::string, std::string>> interactions;

    static SensitiveLexicon from_file(const std::string& path);
};

enum class ScanMode {
    CoOccurrence, // flag identity + adjective in the same question
    NotInPassage  // only when the identity term is absent from the passage
};

struct SensitiveFlag {
    std::string dialog_id;
    int question_index = 0; // 1-based among generated turns
    std::string identity_term;
    std::string identity_category;
    std::string adjective_term;
    std::string adjective_class;
};

struct ScanReport {
    std::vector<SensitiveFlag> flags;
    int total_dialogs = 0;
    int total_questions = 0;
    int flagged_dialogs = 0;
    int flagged_questions = 0;

    double dialog_rate() const {
        return total_dialogs ? static_cast<double>(flagged_dialogs) / total_dialogs : 0.0;
    }
    double question_rate() const {
        return total_questions ? static_cast<double>(flagged_questions) / total_questions
                               : 0.0;
    }
};

/// Scan every generated question for enabled identity x adjective term
/// pairs. Matching is case-insensitive on token boundaries. NotInPassage
/// mode needs the source passages and drops matches whose identity term
/// already appears in the passage text.
ScanReport scan_sensitive(const std::vector<Dialog>& dialogs,
                          const SensitiveLexicon& lexicon,
                          const std::vector<Passage>* passages, ScanMode mode);

void save_flags(const std::string& path, const ScanReport& report);

} // namespace dialogkit
