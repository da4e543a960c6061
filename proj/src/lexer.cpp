#include "lexer.hpp"

#include <algorithm>
#include <cctype>

namespace asap::detail {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || static_cast<unsigned char>(c) >= 0x80; }
bool ident_char(char c) { return ident_start(c) || std::isdigit(static_cast<unsigned char>(c)); }
bool digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

class Cursor {
public:
    explicit Cursor(std::string_view src) : src_(src) {}

    bool done() const { return pos_ >= src_.size(); }
    char at(std::size_t k = 0) const { return pos_ + k < src_.size() ? src_[pos_ + k] : '\0'; }
    bool starts_with(std::string_view s) const { return src_.substr(pos_).starts_with(s); }
    std::size_t pos() const { return pos_; }
    std::uint32_t line() const { return line_; }
    void advance(std::size_t n = 1) {
        for (std::size_t i = 0; i < n && pos_ < src_.size(); ++i) {
            if (src_[pos_] == '\n') ++line_;
            ++pos_;
        }
    }
    std::string_view slice(std::size_t from) const { return src_.substr(from, pos_ - from); }

private:
    std::string_view src_;
    std::size_t pos_ = 0;
    std::uint32_t line_ = 0;
};

Token make(TokKind kind, const Cursor& cur, std::size_t from, std::uint32_t line) {
    return Token{kind, cur.slice(from), static_cast<std::uint32_t>(from), static_cast<std::uint32_t>(cur.pos()), line};
}

void lex_number(Cursor& cur) {
    if (cur.at() == '0' && (cur.at(1) == 'x' || cur.at(1) == 'X' || cur.at(1) == 'b' || cur.at(1) == 'B' ||
                            cur.at(1) == 'o' || cur.at(1) == 'O')) {
        cur.advance(2);
        while (std::isxdigit(static_cast<unsigned char>(cur.at())) || cur.at() == '_') cur.advance();
    } else {
        while (digit(cur.at()) || cur.at() == '_') cur.advance();
        if (cur.at() == '.' && digit(cur.at(1))) {
            cur.advance();
            while (digit(cur.at()) || cur.at() == '_') cur.advance();
        } else if (cur.at() == '.' && !ident_start(cur.at(1)) && cur.at(1) != '.') {
            cur.advance();
        }
        if ((cur.at() == 'e' || cur.at() == 'E') &&
            (digit(cur.at(1)) || ((cur.at(1) == '+' || cur.at(1) == '-') && digit(cur.at(2))))) {
            cur.advance(2);
            while (digit(cur.at())) cur.advance();
        }
    }
    // suffixes such as L, f, j, n
    while (std::isalpha(static_cast<unsigned char>(cur.at()))) cur.advance();
}

// Skips a quoted string starting at the opening quote; stops at an unescaped newline
// for single-line strings so unterminated literals cannot swallow the rest of the file.
void lex_quoted(Cursor& cur, char quote, bool multiline) {
    cur.advance();
    while (!cur.done()) {
        char c = cur.at();
        if (c == '\\') {
            cur.advance(2);
            continue;
        }
        if (c == quote) {
            cur.advance();
            return;
        }
        if (c == '\n' && !multiline) return;
        cur.advance();
    }
}

void lex_triple(Cursor& cur, std::string_view delim) {
    cur.advance(delim.size());
    while (!cur.done()) {
        if (cur.at() == '\\') {
            cur.advance(2);
            continue;
        }
        if (cur.starts_with(delim)) {
            cur.advance(delim.size());
            return;
        }
        cur.advance();
    }
}

const std::vector<std::string_view> kPythonOps{"**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "<<", ">>",
                                               "<=", ">=", "==", "!=", "+=", "-=", "*=", "/=", "%=", "&=", "|=",
                                               "^=", "@="};

const std::unordered_set<std::string_view> kPythonKeywords{
    "False", "None",   "True",    "and",   "as",       "assert", "async",  "await",  "break",
    "class", "continue", "def",   "del",   "elif",     "else",   "except", "finally", "for",
    "from",  "global", "if",      "import", "in",      "is",     "lambda", "nonlocal", "not",
    "or",    "pass",   "raise",   "return", "try",     "while",  "with",   "yield"};

}  // namespace

std::vector<Token> lex_python(std::string_view src) {
    Cursor cur(src);
    std::vector<Token> out;
    std::vector<std::size_t> indents{0};
    int depth = 0;
    bool line_start = true;
    auto push_synthetic = [&](TokKind kind) {
        auto p = static_cast<std::uint32_t>(cur.pos());
        out.push_back(Token{kind, {}, p, p, cur.line()});
    };
    while (true) {
        if (line_start && depth == 0) {
            // measure indentation; blank and comment-only lines do not count
            std::size_t width = 0;
            std::size_t probe = 0;
            while (cur.at(probe) == ' ' || cur.at(probe) == '\t' || cur.at(probe) == '\f') {
                width += cur.at(probe) == '\t' ? 8 - (width % 8) : 1;
                ++probe;
            }
            char c = cur.at(probe);
            if (c == '\n' || c == '\r' || c == '#' || (c == '\0' && cur.pos() + probe >= src.size())) {
                cur.advance(probe);
                if (c == '#') {
                    while (!cur.done() && cur.at() != '\n') cur.advance();
                }
                if (cur.done()) break;
                cur.advance();  // newline
                continue;
            }
            cur.advance(probe);
            if (width > indents.back()) {
                indents.push_back(width);
                push_synthetic(TokKind::indent);
            } else {
                while (width < indents.back()) {
                    indents.pop_back();
                    push_synthetic(TokKind::dedent);
                }
                if (width > indents.back()) {
                    // inconsistent dedent: treat as a fresh level
                    indents.push_back(width);
                    push_synthetic(TokKind::indent);
                }
            }
            line_start = false;
        }
        if (cur.done()) break;
        char c = cur.at();
        std::size_t from = cur.pos();
        std::uint32_t line = cur.line();
        if (c == '\n') {
            cur.advance();
            if (depth == 0) {
                out.push_back(Token{TokKind::newline, {}, static_cast<std::uint32_t>(from), static_cast<std::uint32_t>(from), line});
                line_start = true;
            }
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r' || c == '\f') {
            cur.advance();
            continue;
        }
        if (c == '\\' && (cur.at(1) == '\n' || (cur.at(1) == '\r' && cur.at(2) == '\n'))) {
            cur.advance(cur.at(1) == '\r' ? 3 : 2);
            continue;
        }
        if (c == '#') {
            while (!cur.done() && cur.at() != '\n') cur.advance();
            continue;
        }
        // string prefixes: r, b, u, f and two-letter combinations
        std::size_t prefix = 0;
        while (prefix < 2 && std::string_view("rRbBuUfF").find(cur.at(prefix)) != std::string_view::npos) ++prefix;
        if (cur.at(prefix) == '"' || cur.at(prefix) == '\'') {
            char q = cur.at(prefix);
            bool prefix_ok = true;
            for (std::size_t k = 0; k < prefix; ++k) prefix_ok = prefix_ok && ident_start(cur.at(k));
            if (prefix_ok) {
                cur.advance(prefix);
                if (cur.at(1) == q && cur.at(2) == q) {
                    lex_triple(cur, std::string_view(q == '"' ? "\"\"\"" : "'''"));
                } else {
                    lex_quoted(cur, q, false);
                }
                out.push_back(make(TokKind::string, cur, from, line));
                continue;
            }
        }
        if (ident_start(c)) {
            while (ident_char(cur.at())) cur.advance();
            auto text = cur.slice(from);
            out.push_back(make(kPythonKeywords.contains(text) ? TokKind::keyword : TokKind::identifier, cur, from, line));
            continue;
        }
        if (digit(c) || (c == '.' && digit(cur.at(1)))) {
            lex_number(cur);
            out.push_back(make(TokKind::number, cur, from, line));
            continue;
        }
        bool matched = false;
        for (auto op : kPythonOps) {
            if (cur.starts_with(op)) {
                cur.advance(op.size());
                matched = true;
                break;
            }
        }
        if (!matched) cur.advance();
        if (c == '(' || c == '[' || c == '{') ++depth;
        if ((c == ')' || c == ']' || c == '}') && depth > 0) --depth;
        out.push_back(make(TokKind::op, cur, from, line));
    }
    if (!out.empty() && out.back().kind != TokKind::newline && out.back().kind != TokKind::dedent) {
        push_synthetic(TokKind::newline);
    }
    while (indents.size() > 1) {
        indents.pop_back();
        push_synthetic(TokKind::dedent);
    }
    push_synthetic(TokKind::eof);
    return out;
}

const CLikeProfile& java_profile() {
    static const CLikeProfile profile = [] {
        CLikeProfile p;
        p.keywords = {"abstract", "assert",    "boolean",  "break",      "byte",      "case",     "catch",
                      "char",     "class",     "const",    "continue",   "default",   "do",       "double",
                      "else",     "enum",      "extends",  "final",      "finally",   "float",    "for",
                      "goto",     "if",        "implements", "import",   "instanceof", "int",     "interface",
                      "long",     "native",    "new",      "package",    "private",   "protected", "public",
                      "return",   "short",     "static",   "strictfp",   "super",     "switch",   "synchronized",
                      "this",     "throw",     "throws",   "transient",  "try",       "void",     "volatile",
                      "while",    "true",      "false",    "null"};
        // '>>' and '>>>' are left to the parser so generic closers stay single tokens
        p.operators = {"<<=", "...", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", ">=", "+=", "-=",
                       "*=",  "/=",  "%=", "&=", "|=", "^=", "<<"};
        p.java_text_blocks = true;
        return p;
    }();
    return profile;
}

const CLikeProfile& javascript_profile() {
    static const CLikeProfile profile = [] {
        CLikeProfile p;
        p.keywords = {"break", "case",  "catch",  "class",  "const",  "continue", "debugger", "default", "delete",
                      "do",    "else",  "export", "extends", "finally", "for",    "function", "if",      "import",
                      "in",    "instanceof", "let", "new",   "return", "super",   "switch",   "this",    "throw",
                      "try",   "typeof", "var",   "void",   "while",  "with",     "yield",    "async",   "await",
                      "true",  "false", "null",   "undefined", "of"};
        p.operators = {">>>=", "===", "!==", "**=", "<<=", ">>=", ">>>", "...", "=>", "++", "--", "&&", "||", "??",
                       "?.",   "==",  "!=",  "<=",  ">=",  "+=",  "-=",  "*=",  "/=", "%=", "&=", "|=", "^=", "**",
                       "<<",   ">>"};
        p.backtick_strings = true;
        p.emit_newlines = true;
        return p;
    }();
    return profile;
}

const CLikeProfile& go_profile() {
    static const CLikeProfile profile = [] {
        CLikeProfile p;
        p.keywords = {"break", "case",   "chan",   "const", "continue", "default", "defer", "else",  "fallthrough",
                      "for",   "func",   "go",     "goto",  "if",       "import",  "interface", "map", "package",
                      "range", "return", "select", "struct", "switch",  "type",    "var",   "true",  "false", "nil"};
        p.operators = {"&^=", "<<=", ">>=", "...", ":=", "<-", "++", "--", "&&", "||", "==", "!=", "<=", ">=", "+=",
                       "-=",  "*=",  "/=",  "%=",  "&=", "|=", "^=", "<<", ">>", "&^"};
        p.dollar_in_identifiers = false;
        p.backtick_strings = true;
        p.emit_newlines = true;
        return p;
    }();
    return profile;
}

const CLikeProfile& php_profile() {
    static const CLikeProfile profile = [] {
        CLikeProfile p;
        p.keywords = {"abstract", "and",     "array",   "as",       "break",     "callable", "case",   "catch",
                      "class",    "clone",   "const",   "continue", "declare",   "default",  "do",     "echo",
                      "else",     "elseif",  "empty",   "extends",  "final",     "finally",  "fn",     "for",
                      "foreach",  "function", "global", "if",       "implements", "include", "instanceof",
                      "interface", "isset",  "list",    "namespace", "new",      "or",       "print",  "private",
                      "protected", "public", "require", "return",   "static",    "switch",   "throw",  "trait",
                      "try",      "unset",   "use",     "var",      "while",     "xor",      "yield",  "true",
                      "false",    "null",    "self",    "parent"};
        p.operators = {"<=>", "===", "!==", "**=", "\?\?=", "...", "<<=", ">>=", "->", "=>", "::", "++", "--", "&&",
                       "||",  "??",  "==",  "!=",  "<>",  "<=",  ">=",  "+=",  "-=", "*=", "/=", ".=", "%=", "&=",
                       "|=",  "^=",  "**",  "<<",  ">>"};
        p.hash_comments = true;
        p.sigil_identifiers = true;
        p.dollar_in_identifiers = false;
        return p;
    }();
    return profile;
}

const CLikeProfile& ruby_profile() {
    static const CLikeProfile profile = [] {
        CLikeProfile p;
        p.keywords = {"BEGIN", "END",   "alias", "and",    "begin",  "break", "case",   "class",  "def",
                      "defined?", "do", "else",  "elsif",  "end",    "ensure", "false", "for",    "if",
                      "in",    "module", "next", "nil",    "not",    "or",    "redo",   "rescue", "retry",
                      "return", "self", "super", "then",   "true",   "undef", "unless", "until",  "when",
                      "while", "yield"};
        p.operators = {"**=", "<=>", "===", "...", "||=", "&&=", "<<=", ">>=", "..", "::", "->", "=>", "&&", "||",
                       "==",  "!=",  "=~",  "!~",  "<=",  ">=",  "+=",  "-=",  "*=", "/=", "%=", "|=", "&=", "^=",
                       "**",  "<<",  ">>",  "&."};
        p.hash_comments = true;
        p.slash_comments = false;
        p.sigil_identifiers = true;
        p.dollar_in_identifiers = false;
        p.ruby_block_comments = true;
        p.emit_newlines = true;
        return p;
    }();
    return profile;
}

std::vector<Token> lex_clike(std::string_view src, const CLikeProfile& profile) {
    Cursor cur(src);
    std::vector<Token> out;
    bool at_line_start = true;
    while (!cur.done()) {
        char c = cur.at();
        std::size_t from = cur.pos();
        std::uint32_t line = cur.line();
        if (c == '\n') {
            cur.advance();
            if (profile.emit_newlines && !out.empty() && out.back().kind != TokKind::newline) {
                out.push_back(Token{TokKind::newline, {}, static_cast<std::uint32_t>(from), static_cast<std::uint32_t>(from), line});
            }
            at_line_start = true;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            cur.advance();
            continue;
        }
        if (profile.ruby_block_comments && at_line_start && cur.starts_with("=begin")) {
            while (!cur.done()) {
                if (cur.at() == '\n' && src.substr(cur.pos() + 1).starts_with("=end")) {
                    cur.advance(5);
                    while (!cur.done() && cur.at() != '\n') cur.advance();
                    break;
                }
                cur.advance();
            }
            continue;
        }
        at_line_start = false;
        if (profile.slash_comments && cur.starts_with("//")) {
            while (!cur.done() && cur.at() != '\n') cur.advance();
            continue;
        }
        if (profile.slash_comments && cur.starts_with("/*")) {
            cur.advance(2);
            while (!cur.done() && !cur.starts_with("*/")) cur.advance();
            cur.advance(2);
            continue;
        }
        if (profile.hash_comments && c == '#' && !(profile.sigil_identifiers && cur.at(1) == '{')) {
            while (!cur.done() && cur.at() != '\n') cur.advance();
            continue;
        }
        if (profile.java_text_blocks && cur.starts_with("\"\"\"")) {
            lex_triple(cur, "\"\"\"");
            out.push_back(make(TokKind::string, cur, from, line));
            continue;
        }
        if (c == '"' || c == '\'') {
            lex_quoted(cur, c, profile.sigil_identifiers);
            out.push_back(make(TokKind::string, cur, from, line));
            continue;
        }
        if (c == '`' && profile.backtick_strings) {
            lex_quoted(cur, '`', true);
            out.push_back(make(TokKind::string, cur, from, line));
            continue;
        }
        if (profile.sigil_identifiers && (c == '$' || c == '@') && (ident_start(cur.at(1)) || (c == '@' && cur.at(1) == '@'))) {
            cur.advance(c == '@' && cur.at(1) == '@' ? 2 : 1);
            while (ident_char(cur.at())) cur.advance();
            out.push_back(make(TokKind::identifier, cur, from, line));
            continue;
        }
        if (ident_start(c) || (c == '$' && profile.dollar_in_identifiers)) {
            while (ident_char(cur.at()) || (cur.at() == '$' && profile.dollar_in_identifiers)) cur.advance();
            // ruby predicate and bang methods
            if (profile.ruby_block_comments && (cur.at() == '?' || cur.at() == '!') && cur.at(1) != '=') cur.advance();
            auto text = cur.slice(from);
            out.push_back(make(profile.keywords.contains(text) ? TokKind::keyword : TokKind::identifier, cur, from, line));
            continue;
        }
        if (digit(c) || (c == '.' && digit(cur.at(1)))) {
            lex_number(cur);
            out.push_back(make(TokKind::number, cur, from, line));
            continue;
        }
        bool matched = false;
        for (auto op : profile.operators) {
            if (cur.starts_with(op)) {
                cur.advance(op.size());
                matched = true;
                break;
            }
        }
        if (!matched) cur.advance();
        out.push_back(make(TokKind::op, cur, from, line));
    }
    auto p = static_cast<std::uint32_t>(src.size());
    if (profile.emit_newlines && !out.empty() && out.back().kind != TokKind::newline) {
        out.push_back(Token{TokKind::newline, {}, p, p, cur.line()});
    }
    out.push_back(Token{TokKind::eof, {}, p, p, cur.line()});
    return out;
}

}  // namespace asap::detail
