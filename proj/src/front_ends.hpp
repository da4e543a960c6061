#pragma once

#include <string_view>

#include "asap/language.hpp"
#include "asap/syntax_tree.hpp"

namespace asap::detail {

SyntaxTree parse_python(std::string_view code);
SyntaxTree parse_java(std::string_view code);
SyntaxTree parse_shallow(std::string_view code, Language language);

}  // namespace asap::detail
