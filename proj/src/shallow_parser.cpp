#include <unordered_set>

#include "front_ends.hpp"
#include "parser_base.hpp"

namespace asap::detail {

namespace {

const CLikeProfile& profile_for(Language lang) {
    switch (lang) {
        case Language::javascript: return javascript_profile();
        case Language::go: return go_profile();
        case Language::php: return php_profile();
        case Language::ruby: return ruby_profile();
        default: break;
    }
    return javascript_profile();
}

bool is_assign_op(std::string_view s) {
    static const std::unordered_set<std::string_view> kOps{
        "=",   ":=",  "+=",  "-=",  "*=",  "/=",  "%=",  "&=",   "|=",  "^=",  "<<=", ">>=",
        ">>>=", "**=", "\?\?=", ".=",  "||=", "&&=", "&^="};
    return kOps.contains(s);
}

// Where an expression sequence stops, beyond closing brackets and commas.
struct Stop {
    bool assign = false;   ///< assignment operators
    bool brace = false;    ///< '{' (go/js headers)
    bool colon = false;    ///< ':' (case labels)
    bool newline = true;   ///< statement-ending newline
    bool keyword_in = false;  ///< js 'of'/'in', php 'as', go 'range' in loop headers
};

/// Statement-level front end for brace languages and ruby. Control flow, functions,
/// assignments, calls and attribute chains are structured; other operators are kept
/// as flat sequences.
class ShallowParser : ParserBase {
public:
    ShallowParser(std::string_view src, Language lang)
        : ParserBase(src, lex_clike(src, profile_for(lang))), lang_(lang) {}

    SyntaxTree run() {
        Builder m = open(NodeKind::module);
        items(m, {});
        while (!eof()) {
            // stray closers at top level
            m.add(error_token());
            items(m, {});
        }
        return finish(close(m));
    }

private:
    bool ruby() const { return lang_ == Language::ruby; }
    bool go() const { return lang_ == Language::go; }
    bool php() const { return lang_ == Language::php; }
    bool js() const { return lang_ == Language::javascript; }

    void skip_separators() {
        while (at_kind(TokKind::newline) || at_op(";")) advance();
    }

    bool at_any_kw(std::initializer_list<std::string_view> kws) const {
        for (auto k : kws)
            if (at_kw(k)) return true;
        return false;
    }

    /// Statements until '}' (brace languages), one of `enders` (ruby) or eof.
    void items(Builder& parent, std::initializer_list<std::string_view> enders) {
        while (true) {
            skip_separators();
            if (eof() || at_op("}")) return;
            for (auto e : enders)
                if (at_kw(e)) return;
            if (ruby() && at_kw("end")) return;
            std::size_t before = pos_;
            NodeId s = statement();
            parent.add(s);
            if (pos_ == before) parent.add(error_token());
        }
    }

    NodeId brace_block() {
        Builder b = open(NodeKind::block);
        skip_newlines();
        if (!accept_op("{")) {
            // braceless body: a single statement
            b.add(statement());
            return close(b);
        }
        items(b, {});
        expect_op("}");
        return close(b);
    }

    NodeId ruby_body(std::initializer_list<std::string_view> enders) {
        Builder b = open(NodeKind::block);
        items(b, enders);
        return close(b);
    }

    void skip_newlines() {
        while (at_kind(TokKind::newline)) advance();
    }

    void skip_php_modifiers() {
        while (at_any_kw({"public", "private", "protected", "static", "abstract", "final"})) advance();
    }

    NodeId statement() {
        if (php()) skip_php_modifiers();
        if (js() && at_kw("async") && at_kw("function", 1)) advance();
        if (js() && at_kw("export")) {
            advance();
            accept_kw("default");
        }
        if (ruby()) return ruby_statement();
        if (at_kw("function") || at_kw("func")) return function_def();
        if (at_kw("class") || at_kw("interface") || at_kw("trait")) return class_def();
        if (at_op("{")) return brace_block();
        if (at_kw("if")) return if_stmt();
        if (at_kw("for") || at_kw("while") || at_kw("foreach")) return loop_stmt();
        if (at_kw("do")) {
            Builder b = open(NodeKind::loop_statement);
            b.text = "do";
            advance();
            b.add(brace_block(), Field::body);
            skip_newlines();
            if (accept_kw("while")) b.add(paren_or_header(), Field::condition);
            return close(b);
        }
        if (at_kw("try")) return try_stmt();
        if (at_kw("switch") || at_kw("select")) return switch_stmt();
        if (at_kw("return")) {
            Builder b = open(NodeKind::return_statement);
            advance();
            if (!statement_end()) b.add(expr_list({}), Field::value);
            return close(b);
        }
        if (at_kw("throw")) {
            Builder b = open(NodeKind::throw_statement);
            advance();
            b.add(expr_list({}), Field::value);
            return close(b);
        }
        if (at_any_kw({"break", "continue", "fallthrough", "goto"})) {
            Builder b = open(NodeKind::jump_statement);
            b.text = std::string(advance().text);
            if (at_ident()) advance();
            return close(b);
        }
        if (at_kw("import") || at_kw("package") || at_kw("use") || at_kw("namespace")) {
            Builder b = open(NodeKind::import_statement);
            while (!statement_end()) {
                if (at_op("(")) {
                    while (!at_op(")") && !eof()) advance();
                }
                const Token& t = advance();
                if (t.kind == TokKind::identifier) b.add(leaf(NodeKind::identifier, t));
            }
            return close(b);
        }
        if (go() && (at_kw("defer") || at_kw("go"))) {
            Builder b = open(NodeKind::expression_statement);
            b.text = std::string(advance().text);
            b.add(expr_list({}));
            return close(b);
        }
        if (at_any_kw({"var", "let", "const"})) return declaration();
        if (at_ident() && at_op(":", 1) && !php()) {
            Builder b = open(NodeKind::labeled_statement);
            advance();
            advance();
            b.add(statement(), Field::body);
            return close(b);
        }
        return simple_statement();
    }

    bool statement_end() const {
        return eof() || at_op(";") || at_op("}") || at_kind(TokKind::newline);
    }

    NodeId declaration() {
        Builder b = open(NodeKind::local_declaration);
        b.text = std::string(advance().text);
        if (go() && at_op("(")) {
            // grouped var/const block
            advance();
            while (!at_op(")") && !eof()) {
                skip_separators();
                if (at_op(")")) break;
                std::size_t before = pos_;
                go_var_spec(b);
                if (pos_ == before) b.add(error_token());
            }
            expect_op(")");
            return close(b);
        }
        if (go()) {
            go_var_spec(b);
            return close(b);
        }
        do {
            skip_newlines();
            Builder d = open(NodeKind::variable_declarator);
            if (at_op("{") || at_op("[")) {
                // destructuring pattern: every identifier in it is declared
                d.add(expr_seq({.assign = true}), Field::name);
            } else if (at_ident()) {
                d.add(leaf(NodeKind::identifier, advance()), Field::name);
            } else {
                break;
            }
            if (accept_op("=")) d.add(expr_seq({}), Field::value);
            b.add(close(d));
        } while (accept_op(","));
        return close(b);
    }

    void go_var_spec(Builder& b) {
        std::vector<NodeId> names;
        while (at_ident()) {
            names.push_back(leaf(NodeKind::identifier, advance()));
            if (!accept_op(",")) break;
        }
        NodeId t = kNoNode;
        if (!at_op("=") && !statement_end() && !at_op(")")) t = go_type({.assign = true});
        std::vector<NodeId> values;
        if (accept_op("=")) {
            do {
                values.push_back(expr_seq({}));
            } while (accept_op(","));
        }
        for (std::size_t i = 0; i < names.size(); ++i) {
            Builder d{NodeKind::variable_declarator, pos_, {}, {}};
            d.add(names[i], Field::name);
            if (i == 0 && t != kNoNode) d.add(t, Field::type);
            if (values.size() == names.size()) {
                d.add(values[i], Field::value);
            } else if (i + 1 == names.size()) {
                for (auto v : values) d.add(v, Field::value);
            }
            b.add(close_from_kids(d));
        }
    }

    // Builder whose extent comes only from its children.
    NodeId close_from_kids(Builder& b) {
        b.start = pos_;
        return close(b);
    }

    NodeId go_type(Stop stop) {
        Builder b = open(NodeKind::type);
        int depth = 0;
        while (!eof()) {
            if (depth == 0 && (at_op(",") || at_op(")") || at_op("]") || at_op("}") || at_op(";") ||
                               at_kind(TokKind::newline) || (stop.assign && at_op("=")) || (stop.brace && at_op("{"))))
                break;
            if (at_op("(") || at_op("[") || at_op("{")) ++depth;
            if (at_op(")") || at_op("]") || at_op("}")) --depth;
            if (at_kw("struct") || at_kw("interface")) {
                advance();
                if (at_op("{")) skip_group("{", "}");
                continue;
            }
            const Token& t = advance();
            if (t.kind == TokKind::identifier) b.add(leaf(NodeKind::identifier, t));
        }
        return close(b);
    }

    void skip_group(std::string_view o, std::string_view c) {
        int depth = 0;
        while (!eof()) {
            if (at_op(o)) ++depth;
            if (at_op(c) && --depth == 0) {
                advance();
                return;
            }
            advance();
        }
    }

    NodeId simple_statement() {
        std::size_t start = pos_;
        NodeId left = expr_list({.assign = true});
        NodeId stmt;
        if (at_kind(TokKind::op) && is_assign_op(peek().text)) {
            std::string op(advance().text);
            Builder b{op == "=" || op == ":=" ? NodeKind::assignment : NodeKind::augmented_assignment, start, {}, op};
            b.add(left, Field::left);
            skip_newlines();
            b.add(right_side(), Field::right);
            stmt = close(b);
        } else if (at_op("++") || at_op("--")) {
            std::string op(advance().text);
            stmt = wrap(NodeKind::update_expression, {{left, Field::operand}}, op);
        } else {
            Builder b{NodeKind::expression_statement, start, {}, {}};
            b.add(left);
            stmt = close(b);
        }
        return ruby() ? ruby_modifiers(start, stmt) : stmt;
    }

    NodeId right_side() {
        std::size_t start = pos_;
        NodeId value = expr_list({.assign = true});
        if (at_kind(TokKind::op) && is_assign_op(peek().text)) {
            // chained assignment
            std::string op(advance().text);
            Builder b{NodeKind::assignment, start, {}, op};
            b.add(value, Field::left);
            b.add(right_side(), Field::right);
            return close(b);
        }
        return value;
    }

    NodeId expr_list(Stop stop) {
        std::size_t start = pos_;
        NodeId first = expr_seq(stop);
        if (!at_op(",")) return first;
        Builder b{NodeKind::collection, start, {}, "list"};
        b.add(first);
        while (accept_op(",")) {
            if (ruby()) skip_newlines();
            b.add(expr_seq(stop));
        }
        return close(b);
    }

    bool at_stop(const Stop& stop, bool nested) const {
        const Token& t = peek();
        if (t.kind == TokKind::eof) return true;
        if (t.kind == TokKind::newline) return !nested && stop.newline && !continues_after_newline();
        if (t.kind == TokKind::op) {
            if (t.text == "," || t.text == ")" || t.text == "]" || t.text == "}" || t.text == ";") return true;
            if (stop.assign && is_assign_op(t.text)) return true;
            if (stop.brace && t.text == "{") return true;
            if (stop.colon && t.text == ":") return true;
            if (js() && t.text == "=>" ) return false;
            if (php() && t.text == "=>" && stop.keyword_in) return true;
        }
        if (t.kind == TokKind::keyword) {
            if (stop.keyword_in && (t.text == "of" || t.text == "in" || t.text == "as" || t.text == "range"))
                return true;
            if (ruby() && (t.text == "then" || t.text == "end" || t.text == "if" || t.text == "unless" ||
                           t.text == "while" || t.text == "until" || t.text == "rescue"))
                return true;
            if (ruby() && t.text == "do") return stop.keyword_in;
        }
        return false;
    }

    // a newline inside an expression continues it when the line so far is incomplete
    bool continues_after_newline() const {
        const Token& p = prev();
        if (p.kind == TokKind::op && p.text != ")" && p.text != "]" && p.text != "}" && p.text != "++" && p.text != "--")
            return true;
        std::size_t k = 1;
        while (peek(k).kind == TokKind::newline) ++k;
        const Token& n = peek(k);
        return n.kind == TokKind::op && (n.text == "." || n.text == "&." || n.text == "?." || n.text == "->" ||
                                         n.text == "&&" || n.text == "||" || n.text == "?" || n.text == ":" ||
                                         (n.text == "+" && !ruby()));
    }

    /// Operand/operator sequence. A single operand is returned as-is; longer sequences
    /// become a flat binary_expression.
    NodeId expr_seq(Stop stop, bool nested = false) {
        std::size_t start = pos_;
        std::vector<NodeId> parts;
        while (!at_stop(stop, nested)) {
            if (at_kind(TokKind::newline)) {
                advance();
                continue;
            }
            std::size_t before = pos_;
            NodeId p = operand(stop);
            if (p != kNoNode) parts.push_back(p);
            if (pos_ == before) advance();  // operator or unhandled token
        }
        if (parts.size() == 1 && covers(parts[0], start)) return parts[0];
        Builder b{NodeKind::binary_expression, start, {}, {}};
        for (auto p : parts) b.add(p);
        if (start == pos_) return kNoNode;
        return close(b);
    }

    // whether node `id` spans every non-newline token consumed since `start`
    bool covers(NodeId id, std::size_t start) const {
        std::size_t last = pos_;
        while (last > start && toks_[last - 1].kind == TokKind::newline) --last;
        if (last == start) return false;
        const auto& n = tree_.node(id);
        return n.begin == toks_[start].begin && n.end == toks_[last - 1].end;
    }

    NodeId operand(const Stop& stop) {
        NodeId node = primary(stop);
        if (node == kNoNode) return node;
        return postfix(node, stop);
    }

    NodeId primary(const Stop& stop) {
        const Token& t = peek();
        switch (t.kind) {
            case TokKind::number:
            case TokKind::string:
                return leaf(NodeKind::literal, advance());
            case TokKind::identifier: {
                if (t.text == "$this") return leaf(NodeKind::literal, advance());
                if (js() && at_op("=>", 1)) return arrow_function();
                NodeId id = leaf(NodeKind::identifier, advance());
                if (go() && at_op("{") && !stop.brace) {
                    // composite literal
                    NodeId body = group("{", "}", "composite");
                    return wrap(NodeKind::new_expression, {{id, Field::type}, {body, Field::arguments}});
                }
                return id;
            }
            case TokKind::keyword:
                if (t.text == "function" || t.text == "func" || t.text == "fn") return function_def();
                if (t.text == "new") return new_expr();
                if (t.text == "this" || t.text == "self" || t.text == "super" || t.text == "null" ||
                    t.text == "nil" || t.text == "true" || t.text == "false" || t.text == "undefined" ||
                    t.text == "parent")
                    return leaf(NodeKind::literal, advance());
                if (ruby() && t.text == "do") return ruby_block("end");
                if (t.text == "array" && at_op("(", 1)) {
                    advance();
                    return group("(", ")", "array");
                }
                if (go() && (t.text == "map" || t.text == "chan" || t.text == "struct" || t.text == "interface")) {
                    NodeId ty = go_type({.assign = true, .brace = true});
                    if (at_op("{") && !stop.brace) {
                        NodeId body = group("{", "}", "composite");
                        return wrap(NodeKind::new_expression, {{ty, Field::type}, {body, Field::arguments}});
                    }
                    return ty;
                }
                return kNoNode;
            case TokKind::op:
                if (t.text == "(") {
                    if (js() && is_arrow_params()) return arrow_function();
                    return group("(", ")", "paren");
                }
                if (t.text == "[") return group("[", "]", "list");
                if (t.text == "{") {
                    if (ruby()) return ruby_block("}");
                    return group("{", "}", "object");
                }
                if (t.text == "->" && ruby()) {
                    advance();
                    if (at_op("(")) group("(", ")", "paren");
                    return kNoNode;
                }
                return kNoNode;
            default:
                return kNoNode;
        }
    }

    NodeId postfix(NodeId node, const Stop& stop) {
        while (true) {
            if ((at_op(".") || at_op("->") || at_op("::") || at_op("?.") || at_op("&.")) &&
                (at_ident(1) || at_kind(TokKind::keyword, 1))) {
                advance();
                const Token& n = advance();
                NodeId name = leaf(n.kind == TokKind::identifier ? NodeKind::identifier : NodeKind::literal, n);
                node = wrap(NodeKind::attribute, {{node, Field::object}, {name, Field::attribute}});
            } else if (at_kind(TokKind::newline) && continues_after_newline() && member_access_follows()) {
                advance();
            } else if (at_op("(") && adjacent_to_prev()) {
                NodeId args = call_arguments();
                node = wrap(NodeKind::call, {{node, Field::function}, {args, Field::arguments}});
                if (ruby() && (at_kw("do") || at_op("{"))) node = attach_block(node);
            } else if ((at_op("++") || at_op("--")) && adjacent_to_prev()) {
                std::string op(advance().text);
                node = wrap(NodeKind::update_expression, {{node, Field::operand}}, op);
            } else if (at_op("[") && adjacent_to_prev()) {
                advance();
                NodeId index = expr_list({.newline = false});
                expect_op("]");
                node = wrap(NodeKind::subscript, {{node, Field::object}, {index, Field::index}});
            } else if (ruby() && at_kw("do") && !stop.keyword_in) {
                node = attach_block(node);
            } else if (ruby() && at_op("{") && adjacent_or_spaced_call(node)) {
                node = attach_block(node);
            } else {
                return node;
            }
        }
    }

    bool member_access_follows() const {
        std::size_t k = 0;
        while (peek(k).kind == TokKind::newline) ++k;
        const Token& n = peek(k);
        return n.kind == TokKind::op && (n.text == "." || n.text == "&." || n.text == "?." || n.text == "->");
    }

    bool adjacent_to_prev() const { return pos_ > 0 && toks_[pos_ - 1].end == peek().begin; }

    bool adjacent_or_spaced_call(NodeId node) const {
        auto k = tree_.node(node).kind;
        return k == NodeKind::call || k == NodeKind::attribute || k == NodeKind::identifier;
    }

    NodeId attach_block(NodeId callee) {
        NodeId block = at_kw("do") ? ruby_block("end") : ruby_block("}");
        Builder args{NodeKind::arguments, pos_, {}, {}};
        args.add(block);
        NodeId a = close_from_kids(args);
        if (tree_.node(callee).kind == NodeKind::call) {
            tree_.append_child(callee, a, Field::arguments);
            tree_.set_extent(callee, tree_.node(callee).begin, tree_.node(block).end, tree_.node(callee).line);
            return callee;
        }
        return wrap(NodeKind::call, {{callee, Field::function}, {a, Field::arguments}});
    }

    NodeId ruby_block(std::string_view closer) {
        Builder b = open(NodeKind::lambda);
        advance();  // do / {
        Builder params = open(NodeKind::parameters);
        if (accept_op("|")) {
            while (!at_op("|") && !eof() && !at_kind(TokKind::newline)) {
                std::size_t before = pos_;
                if (at_ident()) {
                    Builder p = open(NodeKind::parameter);
                    p.add(leaf(NodeKind::identifier, advance()), Field::name);
                    params.add(close(p));
                } else {
                    advance();
                }
                if (pos_ == before) break;
            }
            expect_op("|");
        }
        b.add(close(params), Field::parameters);
        Builder body = open(NodeKind::block);
        if (closer == "end") {
            items(body, {});
            b.add(close(body), Field::body);
            if (!accept_kw("end")) expect_op("end");
        } else {
            items(body, {});
            b.add(close(body), Field::body);
            expect_op("}");
        }
        return close(b);
    }

    NodeId call_arguments() {
        Builder b = open(NodeKind::arguments);
        advance();  // (
        while (!at_op(")") && !eof()) {
            skip_newlines();
            if (at_op(")")) break;
            std::size_t before = pos_;
            if (at_ident() && (at_op(":", 1) && ruby())) {
                // ruby keyword argument
                Builder k = open(NodeKind::keyword_argument);
                k.add(leaf(NodeKind::identifier, advance()), Field::name);
                advance();
                k.add(expr_seq({.newline = false}, true), Field::value);
                b.add(close(k));
            } else {
                b.add(expr_seq({.newline = false}, true));
            }
            skip_newlines();
            if (pos_ == before) {
                if (at_op("}") || at_op(";")) break;
                b.add(error_token());
                continue;
            }
            if (!accept_op(",")) break;
        }
        expect_op(")");
        return close(b);
    }

    NodeId group(std::string_view o, std::string_view c, std::string kind) {
        Builder b = open(o == "(" ? NodeKind::parenthesized : NodeKind::collection);
        if (o != "(") b.text = std::move(kind);
        advance();
        while (!at_op(c) && !eof()) {
            std::size_t before = pos_;
            skip_newlines();
            if (at_op(c)) break;
            if (o == "{" && (at_ident() || at_kind(TokKind::string)) && at_op(":", 1)) {
                // object key
                Builder pr = open(NodeKind::pair);
                const Token& key = advance();
                pr.add(leaf(key.kind == TokKind::identifier ? NodeKind::identifier : NodeKind::literal, key), Field::name);
                advance();
                pr.add(expr_seq({.newline = false}, true), Field::value);
                b.add(close(pr));
            } else {
                b.add(expr_seq({.newline = false}, true));
            }
            skip_newlines();
            if (pos_ == before) {
                if (at_op(")") || at_op("]") || at_op("}")) break;
                b.add(error_token());
                continue;
            }
            if (!accept_op(",") && !accept_op(";")) {
                if (at_op(c)) break;
                if (at_op(")") || at_op("]") || at_op("}")) break;
            }
        }
        expect_op(c);
        return close(b);
    }

    NodeId new_expr() {
        Builder b = open(NodeKind::new_expression);
        advance();
        Builder t = open(NodeKind::type);
        while (at_ident() || at_op("\\")) {
            const Token& tk = advance();
            if (tk.kind == TokKind::identifier) t.add(leaf(NodeKind::identifier, tk));
            if (!(at_op(".") || at_op("\\") || at_op("::"))) break;
            if (!at_op("\\")) advance();
        }
        b.add(close(t), Field::type);
        if (at_op("(")) b.add(call_arguments(), Field::arguments);
        return close(b);
    }

    bool is_arrow_params() const {
        int depth = 0;
        for (std::size_t k = 0;; ++k) {
            const Token& t = peek(k);
            if (t.kind == TokKind::eof) return false;
            if (t.kind == TokKind::op && t.text == "(") ++depth;
            if (t.kind == TokKind::op && t.text == ")" && --depth == 0) {
                return peek(k + 1).kind == TokKind::op && peek(k + 1).text == "=>";
            }
        }
    }

    NodeId arrow_function() {
        Builder b = open(NodeKind::lambda);
        if (at_ident()) {
            Builder ps = open(NodeKind::parameters);
            Builder p = open(NodeKind::parameter);
            p.add(leaf(NodeKind::identifier, advance()), Field::name);
            ps.add(close(p));
            b.add(close(ps), Field::parameters);
        } else {
            b.add(parameter_list(), Field::parameters);
        }
        expect_op("=>");
        skip_newlines();
        if (at_op("{")) {
            b.add(brace_block(), Field::body);
        } else {
            b.add(expr_seq({}), Field::body);
        }
        return close(b);
    }

    // ---- functions and classes ------------------------------------------------

    NodeId function_def() {
        Builder b = open(NodeKind::function_definition);
        advance();  // function / func / fn
        if (at_op("*")) advance();  // js generators
        if (at_op("&")) advance();  // php by-reference return
        NodeId receiver = kNoNode;
        if (go() && at_op("(")) receiver = parameter_list();
        if (at_ident()) b.add(leaf(NodeKind::identifier, advance()), Field::name);
        if (go() && at_op("[")) skip_group("[", "]");  // type parameters
        NodeId params = at_op("(") ? parameter_list() : kNoNode;
        if (receiver != kNoNode && params != kNoNode) {
            // receiver first, then the declared parameters
            for (NodeId c : std::vector<NodeId>(tree_.children(params).begin(), tree_.children(params).end()))
                tree_.append_child(receiver, c);
            params = receiver;
        } else if (params == kNoNode) {
            params = receiver;
        }
        b.add(params, Field::parameters);
        if (php() && accept_kw("use")) group("(", ")", "paren");
        if ((php() || js()) && accept_op(":")) b.add(return_type(), Field::type);
        if (go() && !at_op("{") && !statement_end()) b.add(go_type({.brace = true}), Field::type);
        if (at_op("{")) {
            b.add(brace_block(), Field::body);
        } else if (php() && at_op("=>")) {
            advance();
            b.add(expr_seq({}), Field::body);
        }
        return close(b);
    }

    NodeId return_type() {
        Builder t = open(NodeKind::type);
        while (at_ident() || at_op("?") || at_op("|") || at_op("\\") || at_kw("array") || at_kw("self") ||
               at_kw("static")) {
            const Token& tk = advance();
            if (tk.kind == TokKind::identifier) t.add(leaf(NodeKind::identifier, tk));
        }
        return close(t);
    }

    /// '(' ... ')' parameter list for every shallow language.
    NodeId parameter_list() {
        Builder b = open(NodeKind::parameters);
        advance();  // (
        struct Group {
            std::size_t first;
            std::size_t last;
        };
        std::vector<Group> groups;
        std::size_t group_start = pos_;
        int depth = 0;
        while (!eof()) {
            if (depth == 0 && (at_op(",") || at_op(")"))) {
                groups.push_back({group_start, pos_});
                if (at_op(")")) break;
                advance();
                group_start = pos_;
                continue;
            }
            if (at_op("(") || at_op("[") || at_op("{")) ++depth;
            if (at_op(")") || at_op("]") || at_op("}")) --depth;
            advance();
        }
        std::size_t end = pos_;
        bool go_named = false;
        if (go()) {
            for (const auto& g : groups) go_named = go_named || (g.last - g.first) >= 2;
        }
        for (const auto& g : groups) {
            if (g.first == g.last) continue;
            pos_ = g.first;
            Builder p = open(NodeKind::parameter);
            param_group(p, g.last, go_named);
            pos_ = g.last;
            b.add(close(p));
        }
        pos_ = end;
        expect_op(")");
        return close(b);
    }

    void param_group(Builder& p, std::size_t last, bool go_named) {
        if (go()) {
            if (go_named && at_ident()) p.add(leaf(NodeKind::identifier, advance()), Field::name);
            if (pos_ < last) {
                Builder t = open(NodeKind::type);
                while (pos_ < last) {
                    const Token& tk = advance();
                    if (tk.kind == TokKind::identifier) t.add(leaf(NodeKind::identifier, tk));
                }
                p.add(close(t), Field::type);
            }
            return;
        }
        if (php()) {
            skip_php_modifiers();
            Builder t = open(NodeKind::type);
            bool any_type = false;
            while (pos_ < last && !(at_ident() && peek().text.starts_with('$'))) {
                const Token& tk = advance();
                if (tk.kind == TokKind::identifier) {
                    t.add(leaf(NodeKind::identifier, tk));
                    any_type = true;
                }
            }
            if (any_type) p.add(close(t), Field::type);
            if (pos_ < last && at_ident()) p.add(leaf(NodeKind::identifier, advance()), Field::name);
        } else {
            while (pos_ < last && (at_op("...") || at_op("*") || at_op("**") || at_op("&"))) advance();
            if (at_op("{") || at_op("[")) {
                // destructured parameter: every identifier is bound
                while (pos_ < last && !at_op("=")) {
                    const Token& tk = advance();
                    if (tk.kind == TokKind::identifier) p.add(leaf(NodeKind::identifier, tk), Field::name);
                }
            } else if (at_ident()) {
                p.add(leaf(NodeKind::identifier, advance()), Field::name);
            }
            if (ruby() && at_op(":")) advance();
        }
        if (pos_ < last && (accept_op("=") || (ruby() && at_op(":")))) {
            std::size_t start = pos_;
            Builder v = open(NodeKind::binary_expression);
            while (pos_ < last) {
                std::size_t before = pos_;
                NodeId x = operand({.newline = false});
                if (x != kNoNode) v.add(x);
                if (pos_ == before) advance();
            }
            if (v.kids.size() == 1 && covers(v.kids[0].first, start)) {
                p.add(v.kids[0].first, Field::value);
            } else if (pos_ > start) {
                p.add(close(v), Field::value);
            }
        }
    }

    NodeId class_def() {
        Builder b = open(NodeKind::class_definition);
        b.text = std::string(advance().text);
        if (at_ident()) b.add(leaf(NodeKind::identifier, advance()), Field::name);
        while (!at_op("{") && !statement_end()) {
            if (at_ident()) {
                Builder s = open(NodeKind::type);
                s.add(leaf(NodeKind::identifier, advance()));
                b.add(close(s), Field::superclass);
            } else {
                advance();
            }
        }
        if (!at_op("{")) return close(b);
        Builder body = open(NodeKind::block);
        advance();
        while (true) {
            skip_separators();
            if (eof() || at_op("}")) break;
            std::size_t before = pos_;
            body.add(class_member());
            if (pos_ == before) body.add(error_token());
        }
        expect_op("}");
        b.add(close(body), Field::body);
        return close(b);
    }

    NodeId class_member() {
        if (php()) {
            skip_php_modifiers();
            if (at_kw("function")) return function_def();
            if (at_kw("const") || at_kw("var")) advance();
            return simple_statement();
        }
        // js method: [static|async|get|set] name(params) { ... }
        while ((at_kw("static") || at_kw("async") || (at_ident() && (peek().text == "get" || peek().text == "set"))) &&
               !at_op("(", 1))
            advance();
        if (at_op("*")) advance();
        if (at_ident() && at_op("(", 1)) {
            Builder f = open(NodeKind::function_definition);
            f.add(leaf(NodeKind::identifier, advance()), Field::name);
            f.add(parameter_list(), Field::parameters);
            f.add(brace_block(), Field::body);
            return close(f);
        }
        return simple_statement();
    }

    // ---- control flow ----------------------------------------------------------

    NodeId paren_or_header() {
        if (go()) return expr_seq({.brace = true});
        if (at_op("(")) {
            advance();
            NodeId e = expr_list({.newline = false});
            expect_op(")");
            return e;
        }
        return expr_seq({.brace = true});
    }

    NodeId if_stmt() {
        Builder b = open(NodeKind::if_statement);
        advance();  // if / elseif
        if (go()) {
            // optional init statement: if v, ok := m[k]; ok {
            std::size_t save = pos_;
            NodeId init = simple_statement();
            if (accept_op(";")) {
                b.add(init, Field::init);
            } else {
                pos_ = save;
            }
        }
        b.add(paren_or_header(), Field::condition);
        if (php() && accept_op(":")) {
            // alternative syntax: if (...): ... endif;
            Builder blk = open(NodeKind::block);
            items(blk, {});
            b.add(close(blk), Field::consequence);
            return close(b);
        }
        b.add(brace_block(), Field::consequence);
        std::size_t save = pos_;
        skip_newlines();
        if (at_kw("else") && (at_kw("if", 1))) {
            Builder e = open(NodeKind::else_clause);
            advance();
            e.add(if_stmt());
            b.add(close(e), Field::alternative);
        } else if (at_kw("elseif")) {
            Builder e = open(NodeKind::else_clause);
            e.add(if_stmt());
            b.add(close(e), Field::alternative);
        } else if (at_kw("else")) {
            Builder e = open(NodeKind::else_clause);
            advance();
            e.add(brace_block(), Field::body);
            b.add(close(e), Field::alternative);
        } else {
            pos_ = save;
        }
        return close(b);
    }

    NodeId loop_stmt() {
        std::size_t start = pos_;
        std::string kw(advance().text);
        bool parens = !go() && at_op("(");
        if (parens) advance();
        // for-each forms: js "for (x of xs)", php "foreach ($xs as $k => $v)", go "for k, v := range xs"
        std::size_t header = pos_;
        if (js() && at_any_kw({"const", "let", "var"})) advance();
        bool each = false;
        Builder b{NodeKind::for_each_statement, start, {}, kw};
        if (kw == "foreach") {
            b.add(expr_seq({.newline = false, .keyword_in = true}), Field::iterable);
            if (accept_kw("as")) {
                NodeId target = expr_seq({.newline = false, .keyword_in = true});
                if (accept_op("=>")) {
                    NodeId value = expr_seq({.newline = false});
                    target = wrap(NodeKind::collection, {{target, Field::none}, {value, Field::none}}, "list");
                }
                b.add(target, Field::target);
            }
            each = true;
        } else if (kw == "for") {
            std::size_t save = pos_;
            NodeId target = expr_list({.assign = true, .brace = true, .newline = false, .keyword_in = true});
            if (go() && (at_op(":=") || at_op("=")) && at_kw("range", 1)) {
                advance();
                advance();
                b.add(target, Field::target);
                b.add(expr_seq({.brace = true}), Field::iterable);
                each = true;
            } else if (go() && at_kw("range")) {
                advance();
                b.add(expr_seq({.brace = true}), Field::iterable);
                each = true;
            } else if (js() && (at_kw("of") || at_kw("in"))) {
                advance();
                b.add(target, Field::target);
                b.add(expr_seq({.newline = false}), Field::iterable);
                each = true;
            } else {
                pos_ = save;
            }
        }
        if (each) {
            if (parens) expect_op(")");
            b.add(brace_block(), Field::body);
            return close(b);
        }
        pos_ = header;
        b.kind = NodeKind::loop_statement;
        if (kw == "while") {
            b.add(parens ? expr_list({.newline = false}) : expr_seq({.brace = true}), Field::condition);
        } else if (go() && !at_op("{")) {
            // go: for init; cond; post {  or  for cond {
            std::size_t save = pos_;
            NodeId first = at_op(";") ? kNoNode : simple_statement_in_header();
            if (accept_op(";")) {
                b.add(first, Field::init);
                if (!at_op(";")) b.add(expr_seq({.brace = true}), Field::condition);
                expect_op(";");
                if (!at_op("{")) b.add(simple_statement_in_header(), Field::update);
            } else {
                pos_ = save;
                b.add(expr_seq({.brace = true}), Field::condition);
            }
        } else if (parens) {
            if (!at_op(";")) b.add(at_any_kw({"var", "let", "const"}) ? declaration() : simple_statement(), Field::init);
            expect_op(";");
            if (!at_op(";")) b.add(expr_list({.newline = false}), Field::condition);
            expect_op(";");
            if (!at_op(")")) b.add(simple_statement(), Field::update);
        }
        if (parens) expect_op(")");
        b.add(brace_block(), Field::body);
        return close(b);
    }

    NodeId simple_statement_in_header() {
        std::size_t start = pos_;
        NodeId left = expr_list({.assign = true, .brace = true});
        if (at_kind(TokKind::op) && is_assign_op(peek().text)) {
            std::string op(advance().text);
            Builder b{op == "=" || op == ":=" ? NodeKind::assignment : NodeKind::augmented_assignment, start, {}, op};
            b.add(left, Field::left);
            b.add(expr_list({.brace = true}), Field::right);
            return close(b);
        }
        if (at_op("++") || at_op("--")) {
            std::string op(advance().text);
            return wrap(NodeKind::update_expression, {{left, Field::operand}}, op);
        }
        return left;
    }

    NodeId try_stmt() {
        Builder b = open(NodeKind::try_statement);
        advance();
        b.add(brace_block(), Field::body);
        skip_newlines();
        while (at_kw("catch")) {
            Builder c = open(NodeKind::catch_clause);
            advance();
            if (accept_op("(")) {
                std::vector<Token> inside;
                while (!at_op(")") && !eof()) inside.push_back(advance());
                expect_op(")");
                // last identifier is the bound name, earlier ones are types
                for (std::size_t i = 0; i < inside.size(); ++i) {
                    if (inside[i].kind != TokKind::identifier) continue;
                    bool last = true;
                    for (std::size_t j = i + 1; j < inside.size(); ++j) last = last && inside[j].kind != TokKind::identifier;
                    if (last) {
                        c.add(leaf(NodeKind::identifier, inside[i]), Field::name);
                    } else {
                        c.add(wrap(NodeKind::type, {{leaf(NodeKind::identifier, inside[i]), Field::none}}), Field::type);
                    }
                }
            }
            c.add(brace_block(), Field::body);
            b.add(close(c));
            skip_newlines();
        }
        if (at_kw("finally")) {
            Builder f = open(NodeKind::finally_clause);
            advance();
            f.add(brace_block(), Field::body);
            b.add(close(f));
        }
        return close(b);
    }

    NodeId switch_stmt() {
        Builder b = open(NodeKind::switch_statement);
        advance();
        if (!at_op("{")) b.add(paren_or_header(), Field::condition);
        skip_newlines();
        if (!expect_op("{")) return close(b);
        while (true) {
            skip_separators();
            if (eof() || at_op("}")) break;
            std::size_t before = pos_;
            if (at_kw("case") || at_kw("default")) {
                Builder c = open(NodeKind::switch_case);
                bool dflt = at_kw("default");
                advance();
                if (!dflt) c.add(expr_list({.colon = true, .newline = false}), Field::value);
                expect_op(":");
                while (true) {
                    skip_separators();
                    if (eof() || at_op("}") || at_kw("case") || at_kw("default")) break;
                    std::size_t inner = pos_;
                    c.add(statement());
                    if (pos_ == inner) c.add(error_token());
                }
                b.add(close(c));
            } else {
                b.add(statement());
            }
            if (pos_ == before) b.add(error_token());
        }
        expect_op("}");
        return close(b);
    }

    // ---- ruby ---------------------------------------------------------------------

    NodeId ruby_statement() {
        if (at_kw("def")) return ruby_def();
        if (at_kw("class") || at_kw("module")) {
            Builder b = open(NodeKind::class_definition);
            b.text = std::string(advance().text);
            if (at_op("<<")) advance();
            if (at_ident() || at_kw("self")) {
                const Token& t = advance();
                if (t.kind == TokKind::identifier) b.add(leaf(NodeKind::identifier, t), Field::name);
            }
            while (at_op("::") && at_ident(1)) {
                advance();
                advance();
            }
            if (accept_op("<")) b.add(expr_seq({}), Field::superclass);
            b.add(ruby_body({}), Field::body);
            if (!accept_kw("end")) expect_op("end");
            return close(b);
        }
        if (at_kw("if") || at_kw("unless")) return ruby_if();
        if (at_kw("while") || at_kw("until")) {
            Builder b = open(NodeKind::loop_statement);
            b.text = std::string(advance().text);
            b.add(expr_seq({.keyword_in = true}), Field::condition);
            accept_kw("do");
            b.add(ruby_body({}), Field::body);
            if (!accept_kw("end")) expect_op("end");
            return close(b);
        }
        if (at_kw("for")) {
            Builder b = open(NodeKind::for_each_statement);
            advance();
            b.add(expr_list({.keyword_in = true}), Field::target);
            accept_kw("in");
            b.add(expr_seq({.keyword_in = true}), Field::iterable);
            accept_kw("do");
            b.add(ruby_body({}), Field::body);
            if (!accept_kw("end")) expect_op("end");
            return close(b);
        }
        if (at_kw("case")) {
            Builder b = open(NodeKind::switch_statement);
            advance();
            if (!at_kind(TokKind::newline)) b.add(expr_seq({}), Field::condition);
            skip_separators();
            while (at_kw("when") || at_kw("in")) {
                Builder c = open(NodeKind::switch_case);
                advance();
                c.add(expr_list({}), Field::value);
                accept_kw("then");
                c.add(ruby_body({"when", "else", "in"}), Field::body);
                b.add(close(c));
            }
            if (at_kw("else")) {
                Builder c = open(NodeKind::switch_case);
                advance();
                c.add(ruby_body({}), Field::body);
                b.add(close(c));
            }
            if (!accept_kw("end")) expect_op("end");
            return close(b);
        }
        if (at_kw("begin")) {
            advance();
            NodeId t = ruby_rescue_body(pos_);
            if (!accept_kw("end")) expect_op("end");
            return t;
        }
        if (at_kw("return")) {
            Builder b = open(NodeKind::return_statement);
            advance();
            if (!statement_end() && !at_kw("if") && !at_kw("unless")) b.add(expr_list({}), Field::value);
            return ruby_modifiers(b.start, close(b));
        }
        if (at_any_kw({"break", "next", "redo", "retry"})) {
            Builder b = open(NodeKind::jump_statement);
            b.text = std::string(advance().text);
            return ruby_modifiers(b.start, close(b));
        }
        if (at_kw("rescue") || at_kw("ensure") || at_kw("else") || at_kw("elsif") || at_kw("when") || at_kw("then")) {
            // clause keyword outside its construct
            return error_token();
        }
        return simple_statement();
    }

    // body with optional rescue/else/ensure clauses, as a try_statement
    NodeId ruby_rescue_body(std::size_t start) {
        Builder t{NodeKind::try_statement, start, {}, {}};
        t.add(ruby_body({"rescue", "else", "ensure"}), Field::body);
        while (at_kw("rescue")) {
            Builder c = open(NodeKind::catch_clause);
            advance();
            while (!at_kind(TokKind::newline) && !at_op("=>") && !at_kw("then") && !eof()) {
                const Token& tk = advance();
                if (tk.kind == TokKind::identifier)
                    c.add(wrap(NodeKind::type, {{leaf(NodeKind::identifier, tk), Field::none}}), Field::type);
                else if (!(tk.kind == TokKind::op && (tk.text == "," || tk.text == "::")))
                    break;
            }
            if (accept_op("=>") && at_ident()) c.add(leaf(NodeKind::identifier, advance()), Field::name);
            accept_kw("then");
            c.add(ruby_body({"rescue", "else", "ensure"}), Field::body);
            t.add(close(c));
        }
        if (at_kw("else")) {
            Builder e = open(NodeKind::else_clause);
            advance();
            e.add(ruby_body({"ensure"}), Field::body);
            t.add(close(e), Field::alternative);
        }
        if (at_kw("ensure")) {
            Builder f = open(NodeKind::finally_clause);
            advance();
            f.add(ruby_body({}), Field::body);
            t.add(close(f));
        }
        return close(t);
    }

    NodeId ruby_def() {
        Builder b = open(NodeKind::function_definition);
        advance();  // def
        if ((at_kw("self") || at_ident()) && at_op(".", 1)) {
            advance();
            advance();
        }
        if (at_ident() || at_kind(TokKind::keyword)) {
            const Token& t = advance();
            b.add(leaf(NodeKind::identifier, t), Field::name);
            if (at_op("=") && adjacent_to_prev()) advance();  // setter name
        } else if (at_kind(TokKind::op)) {
            advance();  // operator method
        }
        if (at_op("(")) {
            b.add(parameter_list(), Field::parameters);
        } else if (!at_kind(TokKind::newline) && !at_op(";")) {
            // parameters without parentheses run to the end of the line
            Builder ps = open(NodeKind::parameters);
            while (!at_kind(TokKind::newline) && !eof()) {
                Builder p = open(NodeKind::parameter);
                while (at_op("*") || at_op("**") || at_op("&")) advance();
                if (at_ident()) p.add(leaf(NodeKind::identifier, advance()), Field::name);
                if (accept_op("=") || accept_op(":")) {
                    if (!at_op(",") && !at_kind(TokKind::newline)) p.add(expr_seq({}), Field::value);
                }
                ps.add(close(p));
                if (!accept_op(",")) break;
            }
            b.add(close(ps), Field::parameters);
        } else {
            Builder ps = open(NodeKind::parameters);
            b.add(close(ps), Field::parameters);
        }
        if (accept_op("=")) {
            // endless def
            b.add(expr_seq({}), Field::body);
            return close(b);
        }
        std::size_t body_start = pos_;
        NodeId body = ruby_rescue_body(body_start);
        // a plain body without rescue clauses is just the block
        if (tree_.children(body).size() == 1) body = tree_.children(body)[0];
        b.add(body, Field::body);
        if (!accept_kw("end")) expect_op("end");
        return close(b);
    }

    NodeId ruby_if() {
        Builder b = open(NodeKind::if_statement);
        b.text = std::string(advance().text);  // if / unless / elsif
        b.add(expr_seq({.keyword_in = true}), Field::condition);
        accept_kw("then");
        b.add(ruby_body({"elsif", "else"}), Field::consequence);
        if (at_kw("elsif")) {
            Builder e = open(NodeKind::else_clause);
            e.add(ruby_if_tail());
            b.add(close(e), Field::alternative);
            return close(b);
        }
        if (at_kw("else")) {
            Builder e = open(NodeKind::else_clause);
            advance();
            e.add(ruby_body({}), Field::body);
            b.add(close(e), Field::alternative);
        }
        if (!accept_kw("end")) expect_op("end");
        return close(b);
    }

    // elsif chain shares the closing 'end' of the outer if
    NodeId ruby_if_tail() {
        Builder b = open(NodeKind::if_statement);
        b.text = std::string(advance().text);
        b.add(expr_seq({.keyword_in = true}), Field::condition);
        accept_kw("then");
        b.add(ruby_body({"elsif", "else"}), Field::consequence);
        if (at_kw("elsif")) {
            Builder e = open(NodeKind::else_clause);
            e.add(ruby_if_tail());
            b.add(close(e), Field::alternative);
            return close(b);
        }
        if (at_kw("else")) {
            Builder e = open(NodeKind::else_clause);
            advance();
            e.add(ruby_body({}), Field::body);
            b.add(close(e), Field::alternative);
        }
        if (!accept_kw("end")) expect_op("end");
        return close(b);
    }

    // statement modifiers: "x = 1 if cond", "retry unless ok", "i += 1 while busy"
    NodeId ruby_modifiers(std::size_t start, NodeId stmt) {
        while (at_kw("if") || at_kw("unless") || at_kw("while") || at_kw("until") || at_kw("rescue")) {
            std::string kw(advance().text);
            NodeId cond = expr_seq({.keyword_in = true});
            Builder b{kw == "if" || kw == "unless" ? NodeKind::if_statement
                      : kw == "rescue"             ? NodeKind::try_statement
                                                   : NodeKind::loop_statement,
                      start, {}, kw};
            if (kw == "rescue") {
                b.add(stmt, Field::body);
                b.add(cond);
            } else {
                b.add(cond, Field::condition);
                b.add(stmt, b.kind == NodeKind::if_statement ? Field::consequence : Field::body);
            }
            stmt = close(b);
        }
        return stmt;
    }

    Language lang_;
};

}  // namespace

SyntaxTree parse_shallow(std::string_view code, Language language) { return ShallowParser(code, language).run(); }

}  // namespace asap::detail
