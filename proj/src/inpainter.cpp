#include "dialogkit/inpainter.hpp"

#include "dialogkit/error.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <fstream>
#include <thread>

using nlohmann::json;

namespace dialogkit {

namespace {

std::string substitute(std::string text, const std::string& key,
                       const std::string& value) {
    std::size_t pos = 0;
    while ((pos = text.find(key, pos)) != std::string::npos) {
        text.replace(pos, key.size(), value);
        pos += value.size();
    }
    return text;
}

/// Trim whitespace and keep the first line: backends owe us exactly one
/// utterance.
std::string postprocess_generation(const std::string& raw) {
    std::string s = raw.substr(0, raw.find('\n'));
    std::size_t begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    std::size_t end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

} // namespace

StubBackend::StubBackend(std::string template_text)
    : template_(std::move(template_text)) {}

std::string StubBackend::generate(const GeneratorRequest& req) {
    std::string out = substitute(template_, "{title}", req.title);
    return substitute(std::move(out), "{step}", std::to_string(req.step));
}

OracleBackend OracleBackend::from_dialogs(const std::vector<Dialog>& dialogs) {
    OracleBackend oracle;
    for (const auto& d : dialogs) {
        int step = 0;
        for (const auto& u : d.utterances)
            if (u.source == Source::Generated) oracle.add(d.id, ++step, u.text);
    }
    return oracle;
}

void OracleBackend::add(const std::string& dialog_id, int step,
                        std::string utterance) {
    answers_[{dialog_id, step}] = std::move(utterance);
}

std::string OracleBackend::generate(const GeneratorRequest& req) {
    auto it = answers_.find({req.dialog_id, req.step});
    if (it == answers_.end())
        throw BackendError(req.dialog_id, req.step,
                           "oracle has no answer for dialog '" + req.dialog_id +
                               "' step " + std::to_string(req.step));
    return it->second;
}

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
    // Split "http://host:port/prefix" into client host and path prefix.
    std::string url = config_.endpoint;
    auto scheme_end = url.find("://");
    std::size_t host_begin = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_begin = url.find('/', host_begin);
    if (path_begin == std::string::npos) {
        host_ = url;
    } else {
        host_ = url.substr(0, path_begin);
        path_prefix_ = url.substr(path_begin);
        if (!path_prefix_.empty() && path_prefix_.back() == '/')
            path_prefix_.pop_back();
    }
}

std::string RemoteBackend::generate(const GeneratorRequest& req) {
    const json body = {{"input", req.input_text},
                       {"max_new_tokens", req.max_new_tokens}};
    const std::string payload = body.dump();
    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        if (attempt > 0) {
            auto delay = std::chrono::milliseconds(
                static_cast<long long>(config_.backoff_base_ms) << (attempt - 1));
            std::this_thread::sleep_for(delay);
        }
        httplib::Client client(host_);
        client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_seconds));
        client.set_read_timeout(std::chrono::duration<double>(config_.timeout_seconds));
        auto res = client.Post(path_prefix_ + "/v1/generate", payload,
                               "application/json");
        if (!res) {
            last_error = "connection failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        try {
            json parsed = json::parse(res->body);
            return parsed.at("output").get<std::string>();
        } catch (const json::exception& e) {
            last_error = std::string("malformed response body: ") + e.what();
        }
    }
    throw BackendError(req.dialog_id, req.step,
                       "generate failed after " +
                           std::to_string(config_.retries + 1) + " attempts (" +
                           last_error + ")");
}

std::string inpaint_step(const Dialog& prefix, GeneratorBackend& backend,
                         int max_new_tokens, const std::string& mask_literal) {
    int masked = 0;
    int step = 0;    // reader-turn index of the masked turn
    int readers = 0; // reader turns seen so far
    for (const auto& u : prefix.utterances) {
        if (u.source == Source::Generated || u.source == Source::Masked) ++readers;
        if (u.source == Source::Masked) {
            ++masked;
            step = readers;
        }
    }
    if (masked != 1)
        throw DataError("inpaint_step needs exactly one masked turn, got " +
                        std::to_string(masked));

    GeneratorRequest req;
    req.input_text = serialize(prefix, mask_literal);
    req.max_new_tokens = max_new_tokens;
    req.dialog_id = prefix.id;
    req.step = step;
    req.title = prefix.title;

    std::string utterance = postprocess_generation(backend.generate(req));
    if (utterance.empty())
        throw BackendError(prefix.id, step, "backend returned an empty utterance");
    if (utterance.find(mask_literal) != std::string::npos)
        throw BackendError(prefix.id, step,
                           "backend returned text containing the mask literal");
    return utterance;
}

Dialog inpaint_document(const Passage& p, GeneratorBackend& backend,
                        const std::string& prompt_template, int max_new_tokens,
                        const std::string& mask_literal) {
    const Dialog full = build_partial_dialog(p, prompt_template, mask_literal);
    const int m = static_cast<int>(p.sentences.size());

    Dialog result = full;
    for (int k = 1; k <= m; ++k) {
        // Prefix ends right after sentence k; later sentences stay out of
        // the conditioning context.
        Dialog prefix = result;
        prefix.utterances.resize(static_cast<std::size_t>(2 * k + 1));
        std::string utterance =
            inpaint_step(prefix, backend, max_new_tokens, mask_literal);
        result.utterances[static_cast<std::size_t>(2 * k - 1)] = {
            1, std::move(utterance), Source::Generated};
    }
    return result;
}

InpaintResult inpaint_corpus(const std::vector<Passage>& passages,
                             GeneratorBackend& backend, int parallelism,
                             const std::string& prompt_template,
                             int max_new_tokens, const std::string& mask_literal) {
    if (parallelism < 1) throw DataError("parallelism must be >= 1");

    struct Slot {
        bool ok = false;
        Dialog dialog;
        RejectRecord reject;
    };
    std::vector<Slot> slots(passages.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= passages.size()) return;
            try {
                slots[i].dialog = inpaint_document(passages[i], backend,
                                                   prompt_template,
                                                   max_new_tokens, mask_literal);
                slots[i].ok = true;
            } catch (const BackendError& e) {
                slots[i].reject = {passages[i].id, e.step, e.what()};
            } catch (const std::exception& e) {
                slots[i].reject = {passages[i].id, 0, e.what()};
            }
        }
    };

    const int threads = std::min<int>(parallelism,
                                      static_cast<int>(passages.size()) > 0
                                          ? static_cast<int>(passages.size())
                                          : 1);
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    InpaintResult out;
    for (auto& slot : slots) {
        if (slot.ok)
            out.dialogs.push_back(std::move(slot.dialog));
        else
            out.rejects.push_back(std::move(slot.reject));
    }
    return out;
}

void save_rejects(const std::string& path, const std::vector<RejectRecord>& rejects) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write reject file: " + path);
    for (const auto& r : rejects) {
        json rec = {{"passage_id", r.passage_id}, {"step", r.step}, {"error", r.error}};
        out << rec.dump() << '\n';
    }
}

} // namespace dialogkit
