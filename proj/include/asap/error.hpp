#pragma once

#include <stdexcept>
#include <string>

namespace asap {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CorpusError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

class UnsupportedLanguage : public Error {
public:
    using Error::Error;
};

class AnalysisError : public Error {
public:
    using Error::Error;
};

/// Raised when no shot count makes a prompt fit its token budget.
class OversizePrompt : public Error {
public:
    OversizePrompt(std::string sample_id, std::size_t estimated, std::size_t limit)
        : Error("prompt for sample '" + sample_id + "' needs " + std::to_string(estimated) +
                " estimated tokens, limit is " + std::to_string(limit)),
          sample_id_(std::move(sample_id)) {}

    const std::string& sample_id() const noexcept { return sample_id_; }

private:
    std::string sample_id_;
};

class MetricError : public Error {
public:
    using Error::Error;
};

class StatsError : public Error {
public:
    using Error::Error;
};

class LlmError : public Error {
public:
    using Error::Error;
};

/// The model returned an empty or whitespace-only completion.
class EmptyCompletion : public LlmError {
public:
    using LlmError::LlmError;
};

class AuthenticationError : public LlmError {
public:
    using LlmError::LlmError;
};

class RetriesExhausted : public LlmError {
public:
    using LlmError::LlmError;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace asap
