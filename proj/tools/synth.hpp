#pragma once

#include <cstddef>
#include <cstdint>

#include "asap/corpus.hpp"

namespace asap::synth {

struct SynthOptions {
    std::size_t projects = 8;
    bool created_at = true;  ///< one day apart within each project
};

/// Deterministic pool of small, parseable functions with template summaries.
/// Supported languages: java, python.
SamplePool make_pool(Language language, std::size_t n, std::uint64_t seed, const SynthOptions& options = {});

}  // namespace asap::synth
