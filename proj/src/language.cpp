#include "asap/language.hpp"

#include <array>
#include <utility>

#include "asap/error.hpp"

namespace asap {

namespace {
constexpr std::array<std::pair<Language, std::string_view>, 6> kNames{{
    {Language::java, "java"},
    {Language::python, "python"},
    {Language::ruby, "ruby"},
    {Language::javascript, "javascript"},
    {Language::go, "go"},
    {Language::php, "php"},
}};
}  // namespace

std::string_view to_string(Language lang) noexcept {
    for (const auto& [l, name] : kNames) {
        if (l == lang) return name;
    }
    return "unknown";
}

Language parse_language(std::string_view name) {
    for (const auto& [l, n] : kNames) {
        if (n == name) return l;
    }
    throw Error("unknown language '" + std::string(name) + "'");
}

}  // namespace asap
