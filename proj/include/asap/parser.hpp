#pragma once

#include <memory>
#include <string_view>

#include "asap/language.hpp"
#include "asap/syntax_tree.hpp"

namespace asap {

/// Grammar front end. Implementations are error tolerant: malformed input yields a tree
/// with `error` nodes, never an exception. Instances are not shared across threads.
class Parser {
public:
    virtual ~Parser() = default;
    virtual Language language() const noexcept = 0;
    virtual SyntaxTree parse(std::string_view code) = 0;
};

/// java and python have full front ends; javascript, go, php and ruby get a shallow
/// statement-level front end.
std::unique_ptr<Parser> make_parser(Language language);

/// Looks a front end up by language name; throws UnsupportedLanguage for unknown names.
std::unique_ptr<Parser> make_parser(std::string_view language_name);

/// Convenience wrapper: make_parser(language)->parse(code).
SyntaxTree parse(std::string_view code, Language language);

}  // namespace asap
