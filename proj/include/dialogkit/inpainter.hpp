#pragma once

#include "dialogkit/dialog.hpp"
#include "dialogkit/passage.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace dialogkit {

/// One generation call. input_text is the serialized dialog prefix with a
/// single mask; the remaining fields carry context for oracle lookup,
/// templating, and error reports. Only input and max_new_tokens go on the
/// wire.
struct GeneratorRequest {
    std::string input_text;
    int max_new_tokens = 64;
    std::string dialog_id;
    int step = 0; // 1-based reader-turn index
    std::string title;
};

/// Produces one reader utterance for a masked turn. Implementations must be
/// safe to call from multiple threads.
class GeneratorBackend {
public:
    virtual ~GeneratorBackend() = default;
    /// Raw generated text; the caller trims it to a single line. Throws
    /// BackendError on failure.
    virtual std::string generate(const GeneratorRequest& req) = 0;
};

/// Fixed template with {title} and {step} placeholders. Deterministic.
class StubBackend : public GeneratorBackend {
public:
    explicit StubBackend(std::string template_text = "What about {title}?");
    std::string generate(const GeneratorRequest& req) override;

private:
    std::string template_;
};

/// Answer-key lookup keyed by (dialog id, step). Missing keys throw
/// BackendError.
class OracleBackend : public GeneratorBackend {
public:
    /// Key extracted from completed dialogs: the k-th generated turn of the
    /// dialog with a given id answers (id, k).
    static OracleBackend from_dialogs(const std::vector<Dialog>& dialogs);

    void add(const std::string& dialog_id, int step, std::string utterance);
    std::string generate(const GeneratorRequest& req) override;

private:
    std::map<std::pair<std::string, int>, std::string> answers_;
};

struct RemoteConfig {
    std::string endpoint; // e.g. http://127.0.0.1:8080
    double timeout_seconds = 30.0;
    int retries = 3;            // retries after the initial attempt
    int backoff_base_ms = 500;  // delays: base, 2*base, 4*base, ...
};

/// POST {endpoint}/v1/generate with {"input","max_new_tokens"}; expects
/// 200 and {"output": "..."}. Anything else is retried with exponential
/// backoff, then raised as BackendError.
class RemoteBackend : public GeneratorBackend {
public:
    explicit RemoteBackend(RemoteConfig config);
    std::string generate(const GeneratorRequest& req) override;

private:
    RemoteConfig config_;
    std::string host_;
    std::string path_prefix_;
};

/// Fill the single masked turn of `prefix`. Returns the post-processed
/// utterance (trimmed, first line only); substitution is the caller's job.
std::string inpaint_step(const Dialog& prefix, GeneratorBackend& backend,
                         int max_new_tokens = 64,
                         const std::string& mask_literal = kMaskLiteral);

/// Autoregressively fill every reader turn of the passage's partial dialog.
/// The step-k prefix contains the already-generated turns, ends at sentence
/// k, and never includes later sentences.
Dialog inpaint_document(const Passage& p, GeneratorBackend& backend,
                        const std::string& prompt_template = kDefaultPromptTemplate,
                        int max_new_tokens = 64,
                        const std::string& mask_literal = kMaskLiteral);

struct RejectRecord {
    std::string passage_id;
    int step = 0;
    std::string error;
};

struct InpaintResult {
    std::vector<Dialog> dialogs;   // input order, failures omitted
    std::vector<RejectRecord> rejects;
};

/// Passage-parallel inpainting; output order matches input order no matter
/// the worker count. Per-passage failures become reject records and the
/// stream continues.
InpaintResult inpaint_corpus(const std::vector<Passage>& passages,
                             GeneratorBackend& backend, int parallelism,
                             const std::string& prompt_template = kDefaultPromptTemplate,
                             int max_new_tokens = 64,
                             const std::string& mask_literal = kMaskLiteral);

void save_rejects(const std::string& path, const std::vector<RejectRecord>& rejects);

} // namespace dialogkit
