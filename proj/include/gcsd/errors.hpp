#pragma once

#include <stdexcept>
#include <string>

namespace gcsd {

// Exit codes used by the CLI: 0 success, 2 config error, 3 data error,
// 4 numeric failure during training.
struct Error : std::runtime_error {
    Error(int exit_code, const std::string& msg) : std::runtime_error(msg), exit_code(exit_code) {}
    int exit_code;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(2, msg) {}
};

struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(3, msg) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(4, msg) {}
};

// corpus
struct AllUtterancesEmpty : DataError {
    AllUtterancesEmpty() : DataError("all utterances empty after cleaning") {}
};
struct NoAssistant : DataError {
    NoAssistant() : DataError("session has no assistant utterance") {}
};
struct NoHuman : DataError {
    NoHuman() : DataError("session has no human utterance") {}
};
struct SchemaError : DataError {
    explicit SchemaError(const std::string& msg) : DataError("schema error: " + msg) {}
};
struct UnknownSpeaker : DataError {
    explicit UnknownSpeaker(const std::string& s) : DataError("unknown speaker: " + s) {}
};
struct CorpusTooSmall : DataError {
    CorpusTooSmall() : DataError("corpus too small to split") {}
};

// pgss
struct InvalidConfig : ConfigError {
    explicit InvalidConfig(const std::string& msg) : ConfigError("invalid scenario config: " + msg) {}
};
struct ApiError : DataError {
    explicit ApiError(const std::string& msg) : DataError("api error: " + msg) {}
};
struct MalformedResponse : DataError {
    explicit MalformedResponse(const std::string& msg) : DataError("malformed api response: " + msg) {}
};
struct ValidationFailed : DataError {
    explicit ValidationFailed(const std::string& report) : DataError("simulated session failed validation: " + report) {}
};

// model / math
struct SequenceTooLong : DataError {
    SequenceTooLong(int len, int limit)
        : DataError("sequence of length " + std::to_string(len) + " exceeds limit " + std::to_string(limit)) {}
};
struct DimensionMismatch : NumericError {
    explicit DimensionMismatch(const std::string& msg) : NumericError("dimension mismatch: " + msg) {}
};
struct ShapeMismatch : NumericError {
    explicit ShapeMismatch(const std::string& msg) : NumericError("shape mismatch: " + msg) {}
};
struct LengthMismatch : NumericError {
    explicit LengthMismatch(const std::string& msg) : NumericError("length mismatch: " + msg) {}
};
struct NonScalarLoss : NumericError {
    NonScalarLoss() : NumericError("backward requires a scalar loss node") {}
};
struct NonFinite : NumericError {
    explicit NonFinite(const std::string& msg) : NumericError("non-finite value: " + msg) {}
};
struct EmptyMask : NumericError {
    EmptyMask() : NumericError("supervision mask selects no positions") {}
};
struct EmptyReference : DataError {
    EmptyReference() : DataError("reference sequence is empty") {}
};
struct IndexOutOfRange : DataError {
    explicit IndexOutOfRange(const std::string& msg) : DataError("index out of range: " + msg) {}
};

}  // namespace gcsd
