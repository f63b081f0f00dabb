#pragma once

#include "dialogkit/encoder.hpp"
#include "dialogkit/passage.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dialogkit {

/// Immutable exact-search index: one unit-normalized embedding per passage,
/// scored by dot product (equals cosine after normalization). Vectors are
/// stored as 32-bit floats, matching the on-disk layout.
struct VectorIndex {
    int dim = 0;
    std::uint64_t params_fingerprint = 0;
    std::vector<std::string> ids;
    std::vector<float> vectors; // row-major, ids.size() x dim

    std::size_t size() const { return ids.size(); }
    const float* vec(std::size_t i) const {
        return vectors.data() + i * static_cast<std::size_t>(dim);
    }
};

struct IndexWarning {
    std::string passage_id;
    std::string reason;
};

struct BuildResult {
    VectorIndex index;
    std::vector<IndexWarning> warnings; // degenerate passages, excluded
};

/// Embed every passage's text with the encoder; degenerate (zero)
/// embeddings are excluded and reported. Duplicate ids are an error.
/// Encoding runs on `workers` threads; assembly order always follows the
/// input order, so the result is identical for any worker count.
BuildResult build_index(const EncoderParams& params,
                        const std::vector<Passage>& passages, int workers = 1);

struct Hit {
    std::string passage_id;
    double score = 0.0;
};

/// Exhaustive top-K by dot product, sorted by score descending with ties
/// broken by ascending id. Throws DataError for K < 1 or a degenerate
/// query.
std::vector<Hit> top_k(const VectorIndex& index, const Embedding& query, int k);

// Binary index file, little-endian throughout:
//   bytes 0..7   magic "DKVIDX01"
//   u32          dim
//   u64          count
//   u64          params fingerprint
//   count x      { u32 id_length, id bytes (UTF-8) }
//   count x dim  f32 vector components, row-major
void save_index(const std::string& path, const VectorIndex& index);
VectorIndex load_index(const std::string& path);

} // namespace dialogkit
