#pragma once

#include <string>
#include <string_view>

namespace asap {

enum class Language { java, python, ruby, javascript, go, php };

std::string_view to_string(Language lang) noexcept;

/// Parses a language name ("java", "python", ...). Throws asap::Error on unknown names.
Language parse_language(std::string_view name);

}  // namespace asap
