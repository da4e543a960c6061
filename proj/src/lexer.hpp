#pragma once

#include <cstdint>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace asap::detail {

enum class TokKind : std::uint8_t { identifier, keyword, number, string, op, newline, indent, dedent, eof };

struct Token {
    TokKind kind = TokKind::eof;
    std::string_view text;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::uint32_t line = 0;
};

/// Python tokens with NEWLINE/INDENT/DEDENT. Newlines inside brackets are dropped.
std::vector<Token> lex_python(std::string_view src);

struct CLikeProfile {
    std::unordered_set<std::string_view> keywords;
    std::vector<std::string_view> operators;  ///< multi-character operators, longest first
    bool hash_comments = false;               ///< '#' starts a line comment
    bool slash_comments = true;               ///< '//' and '/* */'
    bool dollar_in_identifiers = true;
    bool sigil_identifiers = false;           ///< ruby '@x', '@@x', '$x' and php '$x'
    bool backtick_strings = false;
    bool ruby_block_comments = false;         ///< '=begin' ... '=end'
    bool emit_newlines = false;               ///< statement-terminating newline tokens
    bool java_text_blocks = false;
};

const CLikeProfile& java_profile();
const CLikeProfile& javascript_profile();
const CLikeProfile& go_profile();
const CLikeProfile& php_profile();
const CLikeProfile& ruby_profile();

std::vector<Token> lex_clike(std::string_view src, const CLikeProfile& profile);

}  // namespace asap::detail
