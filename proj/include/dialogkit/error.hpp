#pragma once

#include <stdexcept>
#include <string>

namespace dialogkit {

/// Malformed or contract-violating input data (bad JSONL, invalid mask
/// indices, degenerate embeddings, ...). Maps to CLI exit code 2.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A generator backend failed after exhausting retries. Maps to CLI exit
/// code 3. Carries enough context to locate the failing step.
struct BackendError : std::runtime_error {
    BackendError(std::string dialog_id_, int step_, const std::string& msg)
        : std::runtime_error(msg), dialog_id(std::move(dialog_id_)), step(step_) {}
    std::string dialog_id;
    int step = 0;
};

} // namespace dialogkit
