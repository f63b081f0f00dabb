#include "dialogkit/recon.hpp"

#include "dialogkit/error.hpp"
#include "dialogkit/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>

namespace dialogkit {

ReconstructionExample make_example(const Dialog& d, int t,
                                   const std::string& mask_literal) {
    if (t < 1 || t > d.turn_count())
        throw DataError("masked turn " + std::to_string(t) +
                        " out of range for dialog '" + d.id + "'");
    ReconstructionExample ex;
    ex.input_text = serialize(mask_utterances(d, MaskSpec{{t}}, mask_literal),
                              mask_literal);
    ex.target_text = d.utterances[t - 1].text;
    ex.dialog_id = d.id;
    ex.masked_index = t;
    return ex;
}

std::vector<ReconstructionExample> make_corpus(const std::vector<Dialog>& dialogs,
                                               std::uint64_t seed, int per_dialog,
                                               const std::string& mask_literal) {
    if (per_dialog < 1) throw DataError("per_dialog must be >= 1");
    std::vector<ReconstructionExample> out;
    for (const auto& d : dialogs) {
        const std::size_t total = static_cast<std::size_t>(d.turn_count());
        const std::size_t take =
            std::min<std::size_t>(total, static_cast<std::size_t>(per_dialog));
        Rng rng(splitmix64(seed ^ fnv1a64(d.id)));
        auto picks = rng.sample_indices(total, take);
        std::sort(picks.begin(), picks.end());
        for (std::size_t idx : picks)
            out.push_back(make_example(d, static_cast<int>(idx) + 1, mask_literal));
    }
    return out;
}

std::string recon_to_json(const ReconstructionExample& ex) {
    nlohmann::json rec = {{"input", ex.input_text},
                          {"target", ex.target_text},
                          {"dialog_id", ex.dialog_id},
                          {"t", ex.masked_index}};
    return rec.dump();
}

void save_recon(const std::string& path,
                const std::vector<ReconstructionExample>& examples) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write examples file: " + path);
    for (const auto& ex : examples) out << recon_to_json(ex) << '\n';
}

} // namespace dialogkit
