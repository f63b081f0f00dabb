#include "dialogkit/vector_index.hpp"

#include "dialogkit/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>
#include <unordered_set>

namespace dialogkit {

BuildResult build_index(const EncoderParams& params,
                        const std::vector<Passage>& passages, int workers) {
    if (workers < 1) throw DataError("index build needs workers >= 1");
    BuildResult out;
    out.index.dim = params.output_dim;
    out.index.params_fingerprint = dialogkit::params_fingerprint(params);

    {
        std::unordered_set<std::string> seen;
        for (const auto& p : passages)
            if (!seen.insert(p.id).second)
                throw DataError("duplicate passage id in index build: " + p.id);
    }

    std::vector<Embedding> embeddings(passages.size());
    const int threads =
        std::min<int>(workers, std::max<int>(1, static_cast<int>(passages.size())));
    if (threads <= 1) {
        for (std::size_t i = 0; i < passages.size(); ++i)
            embeddings[i] = encode(params, passages[i].text);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= passages.size()) return;
                embeddings[i] = encode(params, passages[i].text);
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (std::size_t i = 0; i < passages.size(); ++i) {
        const Embedding& e = embeddings[i];
        if (e.degenerate || e.norm == 0.0) {
            out.warnings.push_back({passages[i].id, "degenerate embedding, excluded"});
            continue;
        }
        out.index.ids.push_back(passages[i].id);
        for (double v : e.values)
            out.index.vectors.push_back(static_cast<float>(v / e.norm));
    }
    return out;
}

std::vector<Hit> top_k(const VectorIndex& index, const Embedding& query, int k) {
    if (k < 1) throw DataError("top_k needs K >= 1");
    if (query.degenerate || query.norm == 0.0)
        throw DataError("top_k query embedding is degenerate");
    if (static_cast<int>(query.values.size()) != index.dim)
        throw DataError("query dimension does not match the index");

    std::vector<Hit> hits;
    hits.reserve(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        const float* v = index.vec(i);
        double dot = 0.0;
        for (int j = 0; j < index.dim; ++j)
            dot += static_cast<double>(v[j]) *
                   (query.values[static_cast<std::size_t>(j)] / query.norm);
        hits.push_back({index.ids[i], dot});
    }

    auto better = [](const Hit& a, const Hit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.passage_id < b.passage_id;
    };
    const std::size_t take = std::min<std::size_t>(hits.size(),
                                                   static_cast<std::size_t>(k));
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(take),
                      hits.end(), better);
    hits.resize(take);
    return hits;
}

namespace {

constexpr char kMagic[8] = {'D', 'K', 'V', 'I', 'D', 'X', '0', '1'};

template <typename T>
void write_le(std::ofstream& out, T value) {
    unsigned char bytes[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i)
        bytes[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >>
                                               (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return static_cast<T>(v);
}

} // namespace

void save_index(const std::string& path, const VectorIndex& index) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write index file: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(index.dim));
    write_le<std::uint64_t>(out, index.size());
    write_le<std::uint64_t>(out, index.params_fingerprint);
    for (const auto& id : index.ids) {
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
    }
    for (float v : index.vectors) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        write_le<std::uint32_t>(out, bits);
    }
}

VectorIndex load_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open index file: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError("not an index file: " + path);
    VectorIndex index;
    index.dim = static_cast<int>(read_le<std::uint32_t>(in));
    const std::uint64_t count = read_le<std::uint64_t>(in);
    index.params_fingerprint = read_le<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint32_t len = read_le<std::uint32_t>(in);
        std::string id(len, '\0');
        in.read(id.data(), len);
        index.ids.push_back(std::move(id));
    }
    index.vectors.resize(count * static_cast<std::uint64_t>(index.dim));
    for (float& v : index.vectors) {
        const std::uint32_t bits = read_le<std::uint32_t>(in);
        std::memcpy(&v, &bits, sizeof(v));
    }
    if (!in) throw DataError("truncated index file: " + path);
    return index;
}

} // namespace dialogkit
