#pragma once

#include "dialogkit/dialog.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dialogkit {

/// One reconstruction training example: the serialized dialog with a single
/// turn masked, and that turn's original text as the target.
struct ReconstructionExample {
    std::string input_text;
    std::string target_text;
    std::string dialog_id;
    int masked_index = 0; // 1-based
};

/// Mask turn t of d and serialize. Throws DataError if t is out of range.
ReconstructionExample make_example(const Dialog& d, int t,
                                   const std::string& mask_literal = kMaskLiteral);

/// For each dialog, emit min(per_dialog, T) examples whose masked turns are
/// drawn uniformly without replacement, ascending. The per-dialog draw is
/// seeded from (seed, dialog id), so output is reproducible and independent
/// of how the input stream is sharded.
std::vector<ReconstructionExample> make_corpus(
    const std::vector<Dialog>& dialogs, std::uint64_t seed, int per_dialog,
    const std::string& mask_literal = kMaskLiteral);

std::string recon_to_json(const ReconstructionExample& ex);

void save_recon(const std::string& path,
                const std::vector<ReconstructionExample>& examples);

} // namespace dialogkit
