#include <array>

#include "front_ends.hpp"
#include "parser_base.hpp"

namespace asap::detail {

namespace {

constexpr std::size_t kNpos = static_cast<std::size_t>(-1);

bool is_primitive(std::string_view s) {
    static constexpr std::array<std::string_view, 9> kPrims{"boolean", "byte", "char",  "short", "int",
                                                           "long",    "float", "double", "void"};
    for (auto p : kPrims)
        if (s == p) return true;
    return false;
}

bool is_modifier(std::string_view s) {
    static constexpr std::array<std::string_view, 12> kMods{"public",   "protected", "private",      "static",
                                                           "abstract", "final",     "native",       "synchronized",
                                                           "transient", "volatile", "strictfp",     "default"};
    for (auto m : kMods)
        if (s == m) return true;
    return false;
}

class JavaParser : ParserBase {
public:
    explicit JavaParser(std::string_view src) : ParserBase(src, lex_clike(src, java_profile())) {}

    SyntaxTree run() {
        Builder m = open(NodeKind::module);
        while (!eof()) {
            std::size_t before = pos_;
            if (at_kw("package") || at_kw("import")) {
                m.add(import_decl());
            } else if (at_op(";")) {
                advance();
            } else if (is_member_start(pos_)) {
                m.add(member());
            } else {
                m.add(statement());
            }
            if (pos_ == before) m.add(error_token());
        }
        return finish(close(m));
    }

private:
    // ---- lookahead scanning over token indices (no nodes) -------------------

    const Token& tok(std::size_t i) const { return i < toks_.size() ? toks_[i] : toks_.back(); }
    bool op_at(std::size_t i, std::string_view op) const { return tok(i).kind == TokKind::op && tok(i).text == op; }
    bool kw_at(std::size_t i, std::string_view kw) const {
        return tok(i).kind == TokKind::keyword && tok(i).text == kw;
    }
    bool ident_at(std::size_t i) const { return tok(i).kind == TokKind::identifier; }

    std::size_t skip_annotation(std::size_t i) const {
        // '@' Name ('.' Name)* [ '(' ... ')' ]
        if (!op_at(i, "@") || !ident_at(i + 1)) return kNpos;
        i += 2;
        while (op_at(i, ".") && ident_at(i + 1)) i += 2;
        if (op_at(i, "(")) i = skip_balanced(i, "(", ")");
        return i;
    }

    std::size_t skip_balanced(std::size_t i, std::string_view open_tok, std::string_view close_tok) const {
        int depth = 0;
        for (; tok(i).kind != TokKind::eof; ++i) {
            if (op_at(i, open_tok)) ++depth;
            if (op_at(i, close_tok) && --depth == 0) return i + 1;
        }
        return i;
    }

    std::size_t skip_modifiers(std::size_t i, bool* any = nullptr) const {
        while (true) {
            if (tok(i).kind == TokKind::keyword && is_modifier(tok(i).text)) {
                if (any) *any = true;
                ++i;
            } else if (op_at(i, "@") && !kw_at(i + 1, "interface")) {
                std::size_t j = skip_annotation(i);
                if (j == kNpos) return i;
                if (any) *any = true;
                i = j;
            } else {
                return i;
            }
        }
    }

    std::size_t skip_type_args(std::size_t i) const {
        if (!op_at(i, "<")) return kNpos;
        int depth = 0;
        for (; tok(i).kind != TokKind::eof; ++i) {
            const Token& t = tok(i);
            if (t.kind == TokKind::op) {
                if (t.text == "<") {
                    ++depth;
                } else if (t.text == ">") {
                    if (--depth == 0) return i + 1;
                } else if (t.text != "," && t.text != "." && t.text != "?" && t.text != "&" && t.text != "[" &&
                           t.text != "]" && t.text != "@") {
                    return kNpos;
                }
            } else if (t.kind == TokKind::keyword) {
                if (t.text != "extends" && t.text != "super" && !is_primitive(t.text)) return kNpos;
            } else if (t.kind != TokKind::identifier) {
                return kNpos;
            }
        }
        return kNpos;
    }

    /// Index just past a type starting at i, or kNpos.
    std::size_t skip_type(std::size_t i) const {
        while (op_at(i, "@")) {
            std::size_t j = skip_annotation(i);
            if (j == kNpos) return kNpos;
            i = j;
        }
        if (tok(i).kind == TokKind::keyword && is_primitive(tok(i).text)) {
            ++i;
        } else if (ident_at(i)) {
            ++i;
            if (op_at(i, "<")) {
                i = skip_type_args(i);
                if (i == kNpos) return kNpos;
            }
            while (op_at(i, ".") && ident_at(i + 1)) {
                i += 2;
                if (op_at(i, "<")) {
                    i = skip_type_args(i);
                    if (i == kNpos) return kNpos;
                }
            }
        } else {
            return kNpos;
        }
        while (op_at(i, "[") && op_at(i + 1, "]")) i += 2;
        return i;
    }

    bool is_member_start(std::size_t i) const {
        bool mods = false;
        i = skip_modifiers(i, &mods);
        if (kw_at(i, "class") || kw_at(i, "interface") || kw_at(i, "enum")) return true;
        if (op_at(i, "@") && kw_at(i + 1, "interface")) return true;
        if (ident_at(i) && tok(i).text == "record" && ident_at(i + 1) && (op_at(i + 2, "(") || op_at(i + 2, "<")))
            return true;
        if (op_at(i, "<")) return true;
        if (ident_at(i) && op_at(i + 1, "(")) {
            std::size_t j = skip_balanced(i + 1, "(", ")");
            return op_at(j, "{") || kw_at(j, "throws");
        }
        std::size_t j = skip_type(i);
        if (j == kNpos || !ident_at(j)) return false;
        if (op_at(j + 1, "(")) return true;
        return mods;
    }

    bool is_local_decl(std::size_t i) const {
        i = skip_modifiers(i);
        std::size_t j = skip_type(i);
        if (j == kNpos || !ident_at(j)) return false;
        return op_at(j + 1, "=") || op_at(j + 1, ";") || op_at(j + 1, ",") || op_at(j + 1, "[") ||
               op_at(j + 1, ":") || tok(j + 1).kind == TokKind::eof;
    }

    // ---- types ---------------------------------------------------------------

    NodeId type() {
        Builder b = open(NodeKind::type);
        while (at_op("@")) skip_annotation_tokens();
        if (at_kind(TokKind::keyword) && is_primitive(peek().text)) {
            b.text = std::string(advance().text);
        } else if (at_ident()) {
            b.add(leaf(NodeKind::identifier, advance()));
            if (at_op("<")) type_arguments(b);
            while (at_op(".") && at_ident(1)) {
                advance();
                b.add(leaf(NodeKind::identifier, advance()));
                if (at_op("<")) type_arguments(b);
            }
        } else if (at_op("?")) {
            advance();
            if (accept_kw("extends") || accept_kw("super")) b.add(type());
        } else {
            b.add(error_token());
            return close(b);
        }
        while (at_op("[") && at_op("]", 1)) {
            advance();
            advance();
        }
        return close(b);
    }

    void type_arguments(Builder& b) {
        advance();  // <
        while (!at_op(">") && !eof()) {
            std::size_t before = pos_;
            b.add(type());
            while (accept_op("&")) b.add(type());
            if (pos_ == before) break;
            if (!accept_op(",")) break;
        }
        expect_op(">");
    }

    void skip_annotation_tokens() {
        std::size_t j = skip_annotation(pos_);
        if (j == kNpos) {
            advance();
            return;
        }
        pos_ = j;
    }

    void skip_modifier_tokens() { pos_ = skip_modifiers(pos_); }

    // ---- declarations --------------------------------------------------------

    NodeId import_decl() {
        Builder b = open(NodeKind::import_statement);
        while (!at_op(";") && !eof()) {
            const Token& t = advance();
            if (t.kind == TokKind::identifier) b.add(leaf(NodeKind::identifier, t));
        }
        accept_op(";");
        return close(b);
    }

    NodeId member() {
        std::size_t start = pos_;
        skip_modifier_tokens();
        if (at_kw("class") || at_kw("interface") || at_kw("enum") || (at_op("@") && at_kw("interface", 1)) ||
            (at_ident() && peek().text == "record" && at_ident(1))) {
            return class_decl(start);
        }
        Builder b{NodeKind::function_definition, start, {}, {}};
        if (at_op("<")) {
            // type parameters of a generic method
            pos_ = skip_type_args(pos_) == kNpos ? pos_ + 1 : skip_type_args(pos_);
        }
        if (at_ident() && at_op("(", 1)) {
            b.add(leaf(NodeKind::identifier, advance()), Field::name);
            return method_rest(b);
        }
        NodeId t = type();
        if (at_ident() && at_op("(", 1)) {
            b.add(t, Field::type);
            b.add(leaf(NodeKind::identifier, advance()), Field::name);
            return method_rest(b);
        }
        // field declaration
        b.kind = NodeKind::local_declaration;
        b.add(t, Field::type);
        declarators(b);
        if (!accept_op(";")) expect_op(";");
        return close(b);
    }

    NodeId method_rest(Builder& b) {
        b.add(formal_parameters(), Field::parameters);
        while (at_op("[") && at_op("]", 1)) {
            advance();
            advance();
        }
        if (accept_kw("throws")) {
            do {
                b.add(type());
            } while (accept_op(","));
        }
        if (accept_kw("default")) b.add(expression());
        if (at_op("{")) {
            b.add(block(), Field::body);
        } else {
            expect_op(";");
        }
        return close(b);
    }

    NodeId formal_parameters() {
        Builder b = open(NodeKind::parameters);
        expect_op("(");
        while (!at_op(")") && !eof()) {
            std::size_t before = pos_;
            Builder p = open(NodeKind::parameter);
            skip_modifier_tokens();
            p.add(type(), Field::type);
            if (accept_op("...")) p.text = "...";
            if (at_ident()) {
                p.add(leaf(NodeKind::identifier, advance()), Field::name);
            } else if (at_kw("this")) {
                advance();
            }
            while (at_op("[") && at_op("]", 1)) {
                advance();
                advance();
            }
            b.add(close(p));
            if (pos_ == before) {
                b.add(error_token());
                continue;
            }
            if (!accept_op(",")) break;
        }
        expect_op(")");
        return close(b);
    }

    NodeId class_decl(std::size_t start) {
        Builder b{NodeKind::class_definition, start, {}, {}};
        bool is_enum = at_kw("enum");
        if (at_op("@")) advance();
        b.text = std::string(advance().text);
        if (at_ident()) b.add(leaf(NodeKind::identifier, advance()), Field::name);
        if (at_op("<")) {
            std::size_t j = skip_type_args(pos_);
            pos_ = j == kNpos ? pos_ + 1 : j;
        }
        if (at_op("(")) b.add(formal_parameters(), Field::parameters);  // record components
        while (at_kw("extends") || at_kw("implements") || (at_ident() && peek().text == "permits")) {
            advance();
            do {
                b.add(type(), Field::superclass);
            } while (accept_op(","));
        }
        b.add(class_body(is_enum), Field::body);
        return close(b);
    }

    NodeId class_body(bool is_enum) {
        Builder b = open(NodeKind::block);
        if (!expect_op("{")) return close(b);
        if (is_enum) {
            while (at_ident() || at_op("@")) {
                skip_modifier_tokens();
                if (!at_ident()) break;
                b.add(leaf(NodeKind::identifier, advance()));
                if (at_op("(")) b.add(arguments());
                if (at_op("{")) b.add(class_body(false));
                if (!accept_op(",")) break;
            }
            accept_op(";");
        }
        while (!at_op("}") && !eof()) {
            std::size_t before = pos_;
            if (accept_op(";")) continue;
            if (at_op("{")) {
                b.add(block());
            } else if (at_kw("static") && at_op("{", 1)) {
                advance();
                b.add(block());
            } else {
                b.add(member());
            }
            if (pos_ == before) b.add(error_token());
        }
        expect_op("}");
        return close(b);
    }

    void declarators(Builder& b) {
        do {
            if (!at_ident()) {
                b.add(error_token());
                break;
            }
            Builder d = open(NodeKind::variable_declarator);
            d.add(leaf(NodeKind::identifier, advance()), Field::name);
            while (at_op("[") && at_op("]", 1)) {
                advance();
                advance();
            }
            if (accept_op("=")) d.add(at_op("{") ? array_initializer() : expression(), Field::value);
            b.add(close(d));
        } while (accept_op(","));
    }

    NodeId local_declaration() {
        Builder b = open(NodeKind::local_declaration);
        skip_modifier_tokens();
        b.add(type(), Field::type);
        declarators(b);
        return close(b);
    }

    // ---- statements ----------------------------------------------------------

    NodeId block() {
        Builder b = open(NodeKind::block);
        expect_op("{");
        while (!at_op("}") && !eof()) {
            std::size_t before = pos_;
            b.add(statement());
            if (pos_ == before) b.add(error_token());
        }
        expect_op("}");
        return close(b);
    }

    NodeId statement() {
        if (at_op("{")) return block();
        if (at_op(";")) {
            Builder b = open(NodeKind::expression_statement);
            advance();
            return close(b);
        }
        if (at_kw("if")) return if_stmt();
        if (at_kw("while")) {
            Builder b = open(NodeKind::loop_statement);
            b.text = "while";
            advance();
            b.add(paren_condition(), Field::condition);
            b.add(statement(), Field::body);
            return close(b);
        }
        if (at_kw("do")) {
            Builder b = open(NodeKind::loop_statement);
            b.text = "do";
            advance();
            b.add(statement(), Field::body);
            if (accept_kw("while")) b.add(paren_condition(), Field::condition);
            expect_op(";");
            return close(b);
        }
        if (at_kw("for")) return for_stmt();
        if (at_kw("try")) return try_stmt();
        if (at_kw("switch")) return switch_block();
        if (at_kw("return")) {
            Builder b = open(NodeKind::return_statement);
            advance();
            if (!at_op(";") && !at_op("}")) b.add(expression(), Field::value);
            expect_op(";");
            return close(b);
        }
        if (at_kw("throw")) {
            Builder b = open(NodeKind::throw_statement);
            advance();
            b.add(expression(), Field::value);
            expect_op(";");
            return close(b);
        }
        if (at_kw("break") || at_kw("continue")) {
            Builder b = open(NodeKind::jump_statement);
            b.text = std::string(advance().text);
            accept_label();
            expect_op(";");
            return close(b);
        }
        if (at_kw("synchronized") && at_op("(", 1)) {
            Builder b = open(NodeKind::with_statement);
            b.text = "synchronized";
            advance();
            Builder item = open(NodeKind::with_item);
            item.add(paren_condition(), Field::value);
            b.add(close(item));
            b.add(block(), Field::body);
            return close(b);
        }
        if (at_kw("assert")) {
            Builder b = open(NodeKind::expression_statement);
            b.text = "assert";
            advance();
            b.add(expression());
            if (accept_op(":")) b.add(expression());
            expect_op(";");
            return close(b);
        }
        if (at_ident() && peek().text == "yield" && !at_op("=", 1) && !at_op("(", 1) && !at_op(".", 1)) {
            Builder b = open(NodeKind::return_statement);
            b.text = "yield";
            advance();
            b.add(expression(), Field::value);
            expect_op(";");
            return close(b);
        }
        if (at_ident() && at_op(":", 1)) {
            Builder b = open(NodeKind::labeled_statement);
            advance();
            advance();
            b.add(statement(), Field::body);
            return close(b);
        }
        if (at_kw("class") || at_kw("interface") || at_kw("enum") || (at_kw("final") && at_kw("class", 1)) ||
            (at_kw("abstract") && at_kw("class", 1)) || (at_kw("static") && at_kw("class", 1))) {
            return member();
        }
        if (is_local_decl(pos_)) {
            NodeId d = local_declaration();
            expect_op(";");
            return d;
        }
        Builder b = open(NodeKind::expression_statement);
        if (at_op("}") || at_op(")")) return kNoNode;
        b.add(expression());
        expect_op(";");
        return close(b);
    }

    void accept_label() {
        if (at_ident()) advance();
    }

    NodeId paren_condition() {
        if (!expect_op("(")) return expression();
        NodeId e = expression();
        expect_op(")");
        return e;
    }

    NodeId if_stmt() {
        Builder b = open(NodeKind::if_statement);
        advance();
        b.add(paren_condition(), Field::condition);
        b.add(statement(), Field::consequence);
        if (at_kw("else")) {
            Builder e = open(NodeKind::else_clause);
            advance();
            e.add(statement(), Field::body);
            b.add(close(e), Field::alternative);
        }
        return close(b);
    }

    NodeId for_stmt() {
        std::size_t start = pos_;
        advance();  // for
        expect_op("(");
        // enhanced for: [mods] Type name ':' expr
        std::size_t i = skip_modifiers(pos_);
        std::size_t j = skip_type(i);
        if (j != kNpos && ident_at(j) && op_at(j + 1, ":")) {
            Builder b{NodeKind::for_each_statement, start, {}, {}};
            skip_modifier_tokens();
            b.add(type(), Field::type);
            b.add(leaf(NodeKind::identifier, advance()), Field::target);
            advance();  // :
            b.add(expression(), Field::iterable);
            expect_op(")");
            b.add(statement(), Field::body);
            return close(b);
        }
        Builder b{NodeKind::loop_statement, start, {}, "for"};
        if (!at_op(";")) {
            if (is_local_decl(pos_)) {
                b.add(local_declaration(), Field::init);
            } else {
                do {
                    b.add(expression(), Field::init);
                } while (accept_op(","));
            }
        }
        expect_op(";");
        if (!at_op(";")) b.add(expression(), Field::condition);
        expect_op(";");
        while (!at_op(")") && !eof()) {
            std::size_t before = pos_;
            b.add(expression(), Field::update);
            if (pos_ == before || !accept_op(",")) break;
        }
        expect_op(")");
        b.add(statement(), Field::body);
        return close(b);
    }

    NodeId try_stmt() {
        Builder b = open(NodeKind::try_statement);
        advance();
        if (accept_op("(")) {
            // resources are declarations that run before the body
            while (!at_op(")") && !eof()) {
                std::size_t before = pos_;
                if (is_local_decl(pos_)) {
                    b.add(local_declaration(), Field::init);
                } else {
                    b.add(expression(), Field::init);
                }
                if (pos_ == before) break;
                if (!accept_op(";")) break;
            }
            expect_op(")");
        }
        b.add(block(), Field::body);
        while (at_kw("catch")) {
            Builder c = open(NodeKind::catch_clause);
            advance();
            expect_op("(");
            skip_modifier_tokens();
            c.add(type(), Field::type);
            while (accept_op("|")) c.add(type(), Field::type);
            if (at_ident()) c.add(leaf(NodeKind::identifier, advance()), Field::name);
            expect_op(")");
            c.add(block(), Field::body);
            b.add(close(c));
        }
        if (at_kw("finally")) {
            Builder f = open(NodeKind::finally_clause);
            advance();
            f.add(block(), Field::body);
            b.add(close(f));
        }
        return close(b);
    }

    NodeId switch_block() {
        Builder b = open(NodeKind::switch_statement);
        advance();
        b.add(paren_condition(), Field::condition);
        if (!expect_op("{")) return close(b);
        while (!at_op("}") && !eof()) {
            std::size_t before = pos_;
            if (at_kw("case") || at_kw("default")) {
                Builder c = open(NodeKind::switch_case);
                bool is_default = at_kw("default");
                advance();
                if (!is_default) {
                    do {
                        c.add(ternary(), Field::value);
                    } while (accept_op(","));
                }
                if (accept_op("->")) {
                    if (at_op("{")) {
                        c.add(block(), Field::body);
                    } else if (at_kw("throw")) {
                        c.add(statement(), Field::body);
                    } else {
                        Builder s = open(NodeKind::expression_statement);
                        s.add(expression());
                        expect_op(";");
                        c.add(close(s), Field::body);
                    }
                } else {
                    expect_op(":");
                    while (!at_kw("case") && !at_kw("default") && !at_op("}") && !eof()) {
                        std::size_t inner = pos_;
                        c.add(statement());
                        if (pos_ == inner) c.add(error_token());
                    }
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

    // ---- expressions ---------------------------------------------------------

    // Assignment operators, with '>>=' and '>>>=' assembled from adjacent tokens.
    bool assignment_op(std::string& op, std::size_t& width) const {
        const Token& t = peek();
        if (t.kind != TokKind::op) return false;
        static constexpr std::array<std::string_view, 10> kOps{"=",  "+=", "-=", "*=", "/=",
                                                              "%=", "&=", "|=", "^=", "<<="};
        for (auto o : kOps) {
            if (t.text == o) {
                op = std::string(o);
                width = 1;
                return true;
            }
        }
        if (t.text == ">" && adjacent(0) && at_op(">=", 1)) {
            op = ">>=";
            width = 2;
            return true;
        }
        if (t.text == ">" && adjacent(0) && at_op(">", 1) && adjacent(1) && at_op(">=", 2)) {
            op = ">>>=";
            width = 3;
            return true;
        }
        return false;
    }

    bool adjacent(std::size_t k) const { return peek(k).end == peek(k + 1).begin; }

    NodeId expression() {
        if (is_lambda_start()) return lambda();
        std::size_t start = pos_;
        NodeId left = ternary();
        std::string op;
        std::size_t width = 1;
        if (assignment_op(op, width)) {
            for (std::size_t i = 0; i < width; ++i) advance();
            Builder b{op == "=" ? NodeKind::assignment : NodeKind::augmented_assignment, start, {}, op};
            b.add(left, Field::left);
            b.add(at_op("{") ? array_initializer() : expression(), Field::right);
            return close(b);
        }
        return left;
    }

    bool is_lambda_start() const {
        if (at_ident() && at_op("->", 1)) return true;
        if (!at_op("(")) return false;
        std::size_t j = skip_balanced(pos_, "(", ")");
        return op_at(j, "->");
    }

    NodeId lambda() {
        Builder b = open(NodeKind::lambda);
        Builder params = open(NodeKind::parameters);
        if (at_ident()) {
            Builder p = open(NodeKind::parameter);
            p.add(leaf(NodeKind::identifier, advance()), Field::name);
            params.add(close(p));
        } else {
            advance();  // (
            while (!at_op(")") && !eof()) {
                std::size_t before = pos_;
                Builder p = open(NodeKind::parameter);
                skip_modifier_tokens();
                std::size_t j = skip_type(pos_);
                if (j != kNpos && ident_at(j)) p.add(type(), Field::type);
                if (at_ident()) p.add(leaf(NodeKind::identifier, advance()), Field::name);
                params.add(close(p));
                if (pos_ == before) {
                    params.add(error_token());
                    continue;
                }
                if (!accept_op(",")) break;
            }
            expect_op(")");
        }
        b.add(close(params), Field::parameters);
        expect_op("->");
        b.add(at_op("{") ? block() : expression(), Field::body);
        return close(b);
    }

    NodeId ternary() {
        std::size_t start = pos_;
        NodeId cond = binary(0);
        if (!at_op("?")) return cond;
        advance();
        Builder b{NodeKind::conditional_expression, start, {}, {}};
        b.add(cond, Field::condition);
        b.add(is_lambda_start() ? lambda() : ternary(), Field::consequence);
        expect_op(":");
        b.add(is_lambda_start() ? lambda() : ternary(), Field::alternative);
        return close(b);
    }

    // precedence from loosest (0) to tightest (9); -1 when no binary operator follows
    int binary_op(std::string& op, std::size_t& width) const {
        const Token& t = peek();
        width = 1;
        if (t.kind == TokKind::keyword && t.text == "instanceof") return op = "instanceof", 6;
        if (t.kind != TokKind::op) return -1;
        op = std::string(t.text);
        if (op == "||") return 0;
        if (op == "&&") return 1;
        if (op == "|") return 2;
        if (op == "^") return 3;
        if (op == "&") return 4;
        if (op == "==" || op == "!=") return 5;
        if (op == ">") {
            if (adjacent(0) && at_op(">", 1)) {
                if (adjacent(1) && at_op(">", 2)) {
                    if (adjacent(2) && at_op(">=", 3)) return -1;
                    return width = 3, op = ">>>", 7;
                }
                if (adjacent(1) && at_op(">=", 2)) return -1;
                return width = 2, op = ">>", 7;
            }
            if (adjacent(0) && at_op(">=", 1)) return -1;
            return 6;
        }
        if (op == "<" || op == "<=" || op == ">=") return 6;
        if (op == "<<") return 7;
        if (op == "+" || op == "-") return 8;
        if (op == "*" || op == "/" || op == "%") return 9;
        return -1;
    }

    NodeId binary(int min_level) {
        NodeId left = unary();
        while (true) {
            std::string op;
            std::size_t width = 1;
            int level = binary_op(op, width);
            if (level < 0 || level < min_level) return left;
            for (std::size_t i = 0; i < width; ++i) advance();
            if (op == "instanceof") {
                Builder b{NodeKind::instanceof_expression, pos_, {}, {}};
                b.add(left, Field::left);
                accept_kw("final");
                b.add(type(), Field::type);
                if (at_ident()) b.add(leaf(NodeKind::identifier, advance()), Field::name);
                left = close(b);
                continue;
            }
            NodeId right = binary(level + 1);
            left = wrap(NodeKind::binary_expression, {{left, Field::left}, {right, Field::right}}, op);
        }
    }

    bool is_cast() const {
        if (!at_op("(")) return false;
        std::size_t i = pos_ + 1;
        bool primitive = tok(i).kind == TokKind::keyword && is_primitive(tok(i).text);
        std::size_t j = skip_type(i);
        if (j == kNpos) return false;
        while (op_at(j, "&")) {
            j = skip_type(j + 1);
            if (j == kNpos) return false;
        }
        if (!op_at(j, ")")) return false;
        if (primitive) return true;
        const Token& n = tok(j + 1);
        switch (n.kind) {
            case TokKind::identifier:
            case TokKind::number:
            case TokKind::string:
                return true;
            case TokKind::keyword:
                return n.text == "this" || n.text == "super" || n.text == "new" || n.text == "true" ||
                       n.text == "false" || n.text == "null" || n.text == "switch";
            case TokKind::op:
                return n.text == "(" || n.text == "!" || n.text == "~";
            default:
                return false;
        }
    }

    NodeId unary() {
        if (at_op("++") || at_op("--")) {
            Builder b = open(NodeKind::update_expression);
            b.text = std::string(advance().text);
            b.add(unary(), Field::operand);
            return close(b);
        }
        if (at_op("+") || at_op("-") || at_op("!") || at_op("~")) {
            Builder b = open(NodeKind::unary_expression);
            b.text = std::string(advance().text);
            b.add(unary(), Field::operand);
            return close(b);
        }
        if (is_cast()) {
            Builder b = open(NodeKind::cast_expression);
            advance();
            b.add(type(), Field::type);
            while (accept_op("&")) b.add(type(), Field::type);
            expect_op(")");
            b.add(is_lambda_start() ? lambda() : unary(), Field::value);
            return close(b);
        }
        return postfix(primary());
    }

    NodeId postfix(NodeId node) {
        while (true) {
            if (at_op(".")) {
                advance();
                if (at_op("<")) {
                    std::size_t j = skip_type_args(pos_);
                    pos_ = j == kNpos ? pos_ + 1 : j;
                }
                if (at_kw("new")) {
                    NodeId created = creator();
                    node = wrap(NodeKind::attribute, {{node, Field::object}, {created, Field::attribute}});
                    continue;
                }
                if (at_kw("class") || at_kw("this") || at_kw("super")) {
                    NodeId lit = leaf(NodeKind::literal, advance());
                    node = wrap(NodeKind::attribute, {{node, Field::object}, {lit, Field::attribute}});
                    continue;
                }
                if (!at_ident()) {
                    expect_op("identifier");
                    return node;
                }
                NodeId name = leaf(NodeKind::identifier, advance());
                node = wrap(NodeKind::attribute, {{node, Field::object}, {name, Field::attribute}});
                if (at_op("(")) {
                    NodeId args = arguments();
                    node = wrap(NodeKind::call, {{node, Field::function}, {args, Field::arguments}});
                }
            } else if (at_op("[")) {
                advance();
                NodeId index = expression();
                expect_op("]");
                node = wrap(NodeKind::subscript, {{node, Field::object}, {index, Field::index}});
            } else if (at_op("++") || at_op("--")) {
                std::string op(advance().text);
                node = wrap(NodeKind::update_expression, {{node, Field::operand}}, op);
            } else if (at_op("::")) {
                advance();
                NodeId name = at_ident() || at_kw("new") ? leaf(at_ident() ? NodeKind::identifier : NodeKind::literal,
                                                                advance())
                                                         : kNoNode;
                node = name == kNoNode ? node
                                       : wrap(NodeKind::method_reference, {{node, Field::object}, {name, Field::attribute}});
            } else {
                return node;
            }
        }
    }

    NodeId primary() {
        const Token& t = peek();
        if (t.kind == TokKind::number || t.kind == TokKind::string) return leaf(NodeKind::literal, advance());
        if (t.kind == TokKind::identifier) {
            // generic type used as a method reference target: List<String>::new
            if (at_op("<", 1)) {
                std::size_t j = skip_type(pos_);
                if (j != kNpos && op_at(j, "::")) return type();
            }
            NodeId id = leaf(NodeKind::identifier, advance());
            if (at_op("(")) {
                NodeId args = arguments();
                return wrap(NodeKind::call, {{id, Field::function}, {args, Field::arguments}});
            }
            return id;
        }
        if (t.kind == TokKind::keyword) {
            if (t.text == "true" || t.text == "false" || t.text == "null") return leaf(NodeKind::literal, advance());
            if (t.text == "this" || t.text == "super") {
                NodeId lit = leaf(NodeKind::literal, advance());
                if (at_op("(")) {
                    NodeId args = arguments();
                    return wrap(NodeKind::call, {{lit, Field::function}, {args, Field::arguments}});
                }
                return lit;
            }
            if (t.text == "new") return creator();
            if (t.text == "switch") return switch_block();
            if (is_primitive(t.text)) {
                // int.class, int[].class
                return type();
            }
        }
        if (t.kind == TokKind::op) {
            if (t.text == "(") {
                Builder b = open(NodeKind::parenthesized);
                advance();
                b.add(expression());
                expect_op(")");
                return close(b);
            }
            if (t.text == "{") return array_initializer();
        }
        return tree_.add_node(NodeKind::error, t.begin, t.begin, t.line);
    }

    NodeId creator() {
        Builder b = open(NodeKind::new_expression);
        advance();  // new
        if (at_op("<")) {
            std::size_t j = skip_type_args(pos_);
            pos_ = j == kNpos ? pos_ + 1 : j;
        }
        Builder t = open(NodeKind::type);
        while (at_op("@")) skip_annotation_tokens();
        if (at_kind(TokKind::keyword) && is_primitive(peek().text)) {
            t.text = std::string(advance().text);
        } else {
            while (at_ident()) {
                t.add(leaf(NodeKind::identifier, advance()));
                if (at_op("<")) type_arguments(t);
                if (!(at_op(".") && at_ident(1))) break;
                advance();
            }
        }
        b.add(close(t), Field::type);
        if (at_op("[")) {
            Builder dims = open(NodeKind::arguments);
            while (at_op("[")) {
                advance();
                if (!at_op("]")) dims.add(expression());
                expect_op("]");
            }
            b.add(close(dims), Field::arguments);
            if (at_op("{")) b.add(array_initializer(), Field::value);
            return close(b);
        }
        if (at_op("(")) b.add(arguments(), Field::arguments);
        if (at_op("{")) b.add(class_body(false), Field::body);
        return close(b);
    }

    NodeId array_initializer() {
        Builder b = open(NodeKind::collection);
        b.text = "array";
        advance();  // {
        while (!at_op("}") && !eof()) {
            std::size_t before = pos_;
            b.add(at_op("{") ? array_initializer() : expression());
            if (pos_ == before) {
                b.add(error_token());
                continue;
            }
            if (!accept_op(",")) break;
        }
        expect_op("}");
        return close(b);
    }

    NodeId arguments() {
        Builder b = open(NodeKind::arguments);
        advance();  // (
        while (!at_op(")") && !eof()) {
            std::size_t before = pos_;
            b.add(expression());
            if (pos_ == before) {
                if (at_op(";") || at_op("{") || at_op("}")) break;
                b.add(error_token());
                continue;
            }
            if (!accept_op(",")) break;
        }
        expect_op(")");
        return close(b);
    }
};

}  // namespace

SyntaxTree parse_java(std::string_view code) { return JavaParser(code).run(); }

}  // namespace asap::detail
