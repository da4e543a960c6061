#include "front_ends.hpp"

#include <array>

#include "parser_base.hpp"

namespace asap::detail {

namespace {

class PythonParser : ParserBase {
public:
    explicit PythonParser(std::string_view src) : ParserBase(src, lex_python(src)) {}

    SyntaxTree run() {
        Builder m = open(NodeKind::module);
        while (!eof()) {
            if (at_kind(TokKind::newline) || at_kind(TokKind::indent) || at_kind(TokKind::dedent)) {
                advance();
                continue;
            }
            statement(m);
        }
        return finish(close(m));
    }

private:
    bool at_line_end() const {
        return at_kind(TokKind::newline) || at_kind(TokKind::eof) || at_kind(TokKind::dedent);
    }

    void statement(Builder& parent) {
        std::size_t before = pos_;
        if (at_op("@")) {
            parent.add(decorated());
        } else if (at_kw("def") || (at_kw("async") && at_kw("def", 1))) {
            parent.add(function_def({}));
        } else if (at_kw("class")) {
            parent.add(class_def({}));
        } else if (at_kw("if")) {
            parent.add(if_stmt());
        } else if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
            parent.add(for_stmt());
        } else if (at_kw("while")) {
            parent.add(while_stmt());
        } else if (at_kw("try")) {
            parent.add(try_stmt());
        } else if (at_kw("with") || (at_kw("async") && at_kw("with", 1))) {
            parent.add(with_stmt());
        } else {
            simple_statements(parent);
        }
        if (pos_ == before) parent.add(error_token());
    }

    void simple_statements(Builder& parent) {
        while (true) {
            std::size_t before = pos_;
            NodeId s = simple_statement();
            if (s != kNoNode) parent.add(s);
            if (accept_op(";")) {
                if (at_line_end()) break;
                continue;
            }
            if (!at_line_end()) {
                // unparsed tail of the logical line (e.g. python 2 print statements)
                Builder err = open(NodeKind::error);
                while (!at_line_end()) {
                    const Token& t = advance();
                    if (t.kind == TokKind::identifier) err.add(leaf(NodeKind::identifier, t));
                }
                parent.add(close(err));
            }
            if (pos_ == before && !at_line_end()) parent.add(error_token());
            break;
        }
        if (at_kind(TokKind::newline)) advance();
    }

    NodeId simple_statement() {
        if (at_kw("pass") || at_kw("break") || at_kw("continue")) {
            Builder b = open(NodeKind::jump_statement);
            b.text = std::string(advance().text);
            return close(b);
        }
        if (at_kw("return")) {
            Builder b = open(NodeKind::return_statement);
            advance();
            if (!at_line_end() && !at_op(";")) b.add(star_expressions(), Field::value);
            return close(b);
        }
        if (at_kw("raise")) {
            Builder b = open(NodeKind::throw_statement);
            advance();
            if (!at_line_end() && !at_op(";")) {
                b.add(test(), Field::value);
                if (accept_kw("from")) b.add(test());
            }
            return close(b);
        }
        if (at_kw("global") || at_kw("nonlocal")) {
            Builder b = open(NodeKind::global_statement);
            advance();
            while (at_ident()) {
                b.add(leaf(NodeKind::identifier, advance()));
                if (!accept_op(",")) break;
            }
            return close(b);
        }
        if (at_kw("import") || at_kw("from")) {
            Builder b = open(NodeKind::import_statement);
            while (!at_line_end() && !at_op(";")) {
                const Token& t = advance();
                if (t.kind == TokKind::identifier) b.add(leaf(NodeKind::identifier, t));
            }
            return close(b);
        }
        if (at_kw("assert") || at_kw("del")) {
            Builder b = open(NodeKind::expression_statement);
            b.text = std::string(advance().text);
            b.add(test());
            while (accept_op(",")) b.add(test());
            return close(b);
        }
        NodeId e = expression_statement();
        if (tree_.node(e).kind == NodeKind::expression_statement || tree_.node(e).kind == NodeKind::local_declaration)
            return e;
        return wrap(NodeKind::expression_statement, {{e, Field::none}});
    }

    NodeId expression_statement() {
        std::size_t start = pos_;
        NodeId first = star_expressions();
        if (at_op(":") ) {
            // annotated assignment: target: annotation [= value]
            advance();
            Builder b{NodeKind::assignment, start, {}, "="};
            b.add(first, Field::left);
            b.add(type_of(test()), Field::type);
            if (accept_op("=")) {
                b.add(at_kw("yield") ? yield_expr() : star_expressions(), Field::right);
                return close(b);
            }
            b.kind = NodeKind::local_declaration;
            return close(b);
        }
        static constexpr std::array<std::string_view, 13> kAugmented{"+=", "-=", "*=", "/=", "//=", "%=", "**=",
                                                                      ">>=", "<<=", "&=", "|=", "^=", "@="};
        for (auto op : kAugmented) {
            if (at_op(op)) {
                advance();
                Builder b{NodeKind::augmented_assignment, start, {}, std::string(op)};
                b.add(first, Field::left);
                b.add(at_kw("yield") ? yield_expr() : star_expressions(), Field::right);
                return close(b);
            }
        }
        if (at_op("=")) {
            // chained targets: a = b = value nests to the right
            std::vector<NodeId> targets{first};
            advance();
            NodeId value = at_kw("yield") ? yield_expr() : star_expressions();
            while (accept_op("=")) {
                targets.push_back(value);
                value = at_kw("yield") ? yield_expr() : star_expressions();
            }
            NodeId right = value;
            for (std::size_t i = targets.size(); i-- > 0;)
                right = wrap(NodeKind::assignment, {{targets[i], Field::left}, {right, Field::right}}, "=");
            return right;
        }
        Builder b{NodeKind::expression_statement, start, {}, {}};
        b.add(first);
        return close(b);
    }

    NodeId type_of(NodeId expr) { return wrap(NodeKind::type, {{expr, Field::none}}); }

    NodeId decorated() {
        std::vector<NodeId> decorators;
        while (at_op("@")) {
            Builder d = open(NodeKind::decorator);
            advance();
            d.add(test());
            decorators.push_back(close(d));
            if (at_kind(TokKind::newline)) advance();
        }
        if (at_kw("class")) return class_def(decorators);
        if (at_kw("def") || at_kw("async")) return function_def(decorators);
        Builder b = open(NodeKind::error);
        for (auto d : decorators) b.add(d);
        return close(b);
    }

    NodeId function_def(const std::vector<NodeId>& decorators) {
        Builder b = open(NodeKind::function_definition);
        for (auto d : decorators) b.add(d);
        accept_kw("async");
        advance();  // def
        if (at_ident()) b.add(leaf(NodeKind::identifier, advance()), Field::name);
        b.add(parameters("(", ")", true), Field::parameters);
        if (accept_op("->")) b.add(type_of(test()), Field::type);
        expect_op(":");
        b.add(suite(), Field::body);
        return close(b);
    }

    NodeId class_def(const std::vector<NodeId>& decorators) {
        Builder b = open(NodeKind::class_definition);
        for (auto d : decorators) b.add(d);
        advance();  // class
        if (at_ident()) b.add(leaf(NodeKind::identifier, advance()), Field::name);
        if (at_op("(")) b.add(arguments(), Field::superclass);
        expect_op(":");
        b.add(suite(), Field::body);
        return close(b);
    }

    // Parameter list of def (parenthesized, annotated) or lambda (bare, up to ':').
    NodeId parameters(std::string_view open_tok, std::string_view close_tok, bool annotations) {
        Builder b = open(NodeKind::parameters);
        bool parens = !open_tok.empty();
        if (parens && !expect_op(open_tok)) return close(b);
        auto at_end = [&] { return parens ? (at_op(close_tok) || at_line_end()) : (at_op(":") || at_line_end()); };
        while (!at_end()) {
            Builder p = open(NodeKind::parameter);
            if (at_op("*") || at_op("**")) {
                p.text = std::string(advance().text);
            } else if (at_op("/")) {
                advance();
                if (!accept_op(",")) break;
                continue;
            }
            if (at_ident()) {
                p.add(leaf(NodeKind::identifier, advance()), Field::name);
                if (annotations && accept_op(":")) p.add(type_of(test()), Field::type);
                if (accept_op("=")) p.add(test(), Field::value);
            } else if (p.text.empty()) {
                p.add(error_token());
            }
            b.add(close(p));
            if (!accept_op(",")) break;
        }
        if (parens) expect_op(close_tok);
        return close(b);
    }

    NodeId suite() {
        Builder b = open(NodeKind::block);
        if (at_kind(TokKind::newline)) {
            advance();
            if (!at_kind(TokKind::indent)) return close(b);
            advance();
            while (!eof() && !at_kind(TokKind::dedent)) {
                if (at_kind(TokKind::newline)) {
                    advance();
                    continue;
                }
                statement(b);
            }
            if (at_kind(TokKind::dedent)) advance();
        } else if (!eof()) {
            simple_statements(b);
        }
        return close(b);
    }

    NodeId if_stmt() {
        Builder b = open(NodeKind::if_statement);
        advance();  // if / elif
        b.add(named_test(), Field::condition);
        expect_op(":");
        b.add(suite(), Field::consequence);
        if (at_kw("elif")) {
            Builder e = open(NodeKind::else_clause);
            e.add(if_stmt());
            b.add(close(e), Field::alternative);
        } else if (at_kw("else")) {
            Builder e = open(NodeKind::else_clause);
            advance();
            expect_op(":");
            e.add(suite(), Field::body);
            b.add(close(e), Field::alternative);
        }
        return close(b);
    }

    NodeId for_stmt() {
        Builder b = open(NodeKind::for_each_statement);
        accept_kw("async");
        advance();  // for
        b.add(target_list(), Field::target);
        if (!accept_kw("in")) missing_.push_back(tree_.add_node(NodeKind::error, peek().begin, peek().begin, peek().line, "in"));
        b.add(star_expressions(), Field::iterable);
        expect_op(":");
        b.add(suite(), Field::body);
        if (at_kw("else")) {
            Builder e = open(NodeKind::else_clause);
            advance();
            expect_op(":");
            e.add(suite(), Field::body);
            b.add(close(e), Field::alternative);
        }
        return close(b);
    }

    NodeId while_stmt() {
        Builder b = open(NodeKind::loop_statement);
        b.text = "while";
        advance();
        b.add(named_test(), Field::condition);
        expect_op(":");
        b.add(suite(), Field::body);
        if (at_kw("else")) {
            Builder e = open(NodeKind::else_clause);
            advance();
            expect_op(":");
            e.add(suite(), Field::body);
            b.add(close(e), Field::alternative);
        }
        return close(b);
    }

    NodeId try_stmt() {
        Builder b = open(NodeKind::try_statement);
        advance();
        expect_op(":");
        b.add(suite(), Field::body);
        while (at_kw("except")) {
            Builder c = open(NodeKind::catch_clause);
            advance();
            accept_op("*");
            if (!at_op(":")) {
                c.add(type_of(test()), Field::type);
                if (accept_kw("as") || accept_op(",")) {
                    if (at_ident()) c.add(leaf(NodeKind::identifier, advance()), Field::name);
                }
            }
            expect_op(":");
            c.add(suite(), Field::body);
            b.add(close(c));
        }
        if (at_kw("else")) {
            Builder e = open(NodeKind::else_clause);
            advance();
            expect_op(":");
            e.add(suite(), Field::body);
            b.add(close(e), Field::alternative);
        }
        if (at_kw("finally")) {
            Builder f = open(NodeKind::finally_clause);
            advance();
            expect_op(":");
            f.add(suite(), Field::body);
            b.add(close(f));
        }
        return close(b);
    }

    NodeId with_stmt() {
        Builder b = open(NodeKind::with_statement);
        accept_kw("async");
        advance();
        bool parens = at_op("(") && with_items_parenthesized();
        if (parens) advance();
        while (!at_op(":") && !at_line_end()) {
            Builder item = open(NodeKind::with_item);
            item.add(test(), Field::value);
            if (accept_kw("as")) item.add(target(), Field::target);
            b.add(close(item));
            if (!accept_op(",")) break;
        }
        if (parens) expect_op(")");
        expect_op(":");
        b.add(suite(), Field::body);
        return close(b);
    }

    // "with (a as b, c as d):" vs "with (a, b):" - only the former uses grouping parens
    bool with_items_parenthesized() const {
        int depth = 0;
        for (std::size_t k = 0;; ++k) {
            const Token& t = peek(k);
            if (t.kind == TokKind::eof || t.kind == TokKind::newline) return false;
            if (t.kind == TokKind::op && (t.text == "(" || t.text == "[" || t.text == "{")) ++depth;
            if (t.kind == TokKind::op && (t.text == ")" || t.text == "]" || t.text == "}")) {
                if (--depth == 0) return peek(k + 1).kind == TokKind::op && peek(k + 1).text == ":";
            }
            if (depth == 1 && t.kind == TokKind::keyword && t.text == "as") return true;
        }
    }

    // ---- expressions -------------------------------------------------------

    NodeId star_expressions() {
        std::size_t start = pos_;
        NodeId first = star_or_test();
        if (!at_op(",")) return first;
        Builder b{NodeKind::collection, start, {}, "tuple"};
        b.add(first);
        while (accept_op(",")) {
            if (at_line_end() || at_op("=") || at_op(")") || at_op(":") || at_op(";") || is_assign_op()) break;
            b.add(star_or_test());
        }
        return close(b);
    }

    bool is_assign_op() const {
        const auto& t = peek();
        return t.kind == TokKind::op && t.text.size() >= 2 && t.text.back() == '=' && t.text != "==" &&
               t.text != "!=" && t.text != "<=" && t.text != ">=";
    }

    NodeId star_or_test() {
        if (at_op("*")) {
            Builder b = open(NodeKind::unary_expression);
            b.text = "*";
            advance();
            b.add(bit_or(), Field::operand);
            return close(b);
        }
        return test();
    }

    NodeId named_test() {
        if (at_ident() && at_op(":=", 1)) {
            std::size_t start = pos_;
            NodeId name = leaf(NodeKind::identifier, advance());
            advance();
            Builder b{NodeKind::assignment, start, {}, ":="};
            b.add(name, Field::left);
            b.add(test(), Field::right);
            return close(b);
        }
        return test();
    }

    NodeId yield_expr() {
        Builder b = open(NodeKind::unary_expression);
        b.text = "yield";
        advance();
        accept_kw("from");
        if (!at_line_end() && !at_op(")") && !at_op(";")) b.add(star_expressions(), Field::operand);
        return close(b);
    }

    NodeId test() {
        if (at_kw("lambda")) return lambda();
        if (at_kw("yield")) return yield_expr();
        std::size_t start = pos_;
        NodeId body = or_test();
        if (at_kw("if")) {
            // "x if c else y"; a bare "if" here belongs to a comprehension
            std::size_t save = pos_;
            advance();
            NodeId cond = or_test();
            if (accept_kw("else")) {
                Builder b{NodeKind::conditional_expression, start, {}, {}};
                b.add(body, Field::consequence);
                b.add(cond, Field::condition);
                b.add(test(), Field::alternative);
                return close(b);
            }
            pos_ = save;
        }
        return body;
    }

    NodeId lambda() {
        Builder b = open(NodeKind::lambda);
        advance();
        b.add(parameters({}, {}, false), Field::parameters);
        expect_op(":");
        b.add(test(), Field::body);
        return close(b);
    }

    NodeId or_test() { return binary_level(0); }

    // precedence levels from loosest to tightest
    int op_level(std::string& op, std::size_t& width) const {
        const Token& t = peek();
        width = 1;
        if (t.kind == TokKind::keyword) {
            if (t.text == "or") return op = "or", 0;
            if (t.text == "and") return op = "and", 1;
            if (t.text == "in") return op = "in", 3;
            if (t.text == "not" && at_kw("in", 1)) return width = 2, op = "not in", 3;
            if (t.text == "is") {
                if (at_kw("not", 1)) return width = 2, op = "is not", 3;
                return op = "is", 3;
            }
            return -1;
        }
        if (t.kind != TokKind::op) return -1;
        op = std::string(t.text);
        if (op == "<" || op == ">" || op == "==" || op == ">=" || op == "<=" || op == "!=" || op == "<>") return 3;
        if (op == "|") return 4;
        if (op == "^") return 5;
        if (op == "&") return 6;
        if (op == "<<" || op == ">>") return 7;
        if (op == "+" || op == "-") return 8;
        if (op == "*" || op == "/" || op == "//" || op == "%" || op == "@") return 9;
        return -1;
    }

    NodeId binary_level(int min_level) {
        NodeId left = unary(min_level);
        while (true) {
            std::string op;
            std::size_t width = 1;
            int level = op_level(op, width);
            if (level < min_level || level < 0) return left;
            for (std::size_t i = 0; i < width; ++i) advance();
            NodeId right = binary_level(level + 1);
            left = wrap(NodeKind::binary_expression, {{left, Field::left}, {right, Field::right}}, op);
        }
    }

    NodeId unary(int min_level) {
        if (at_kw("not") && min_level <= 2) {
            Builder b = open(NodeKind::unary_expression);
            b.text = "not";
            advance();
            b.add(binary_level(2), Field::operand);
            return close(b);
        }
        if (at_op("-") || at_op("+") || at_op("~")) {
            Builder b = open(NodeKind::unary_expression);
            b.text = std::string(advance().text);
            b.add(unary(10), Field::operand);
            return close(b);
        }
        return power();
    }

    NodeId bit_or() { return binary_level(4); }

    NodeId power() {
        NodeId base;
        if (at_kw("await")) {
            Builder b = open(NodeKind::unary_expression);
            b.text = "await";
            advance();
            b.add(primary(), Field::operand);
            base = close(b);
        } else {
            base = primary();
        }
        if (accept_op("**")) {
            NodeId exp = unary(10);
            return wrap(NodeKind::binary_expression, {{base, Field::left}, {exp, Field::right}}, "**");
        }
        return base;
    }

    NodeId primary() {
        NodeId node = atom();
        while (true) {
            if (at_op("(")) {
                NodeId args = arguments();
                node = wrap(NodeKind::call, {{node, Field::function}, {args, Field::arguments}});
            } else if (at_op("[")) {
                advance();
                NodeId index = subscript_list();
                expect_op("]");
                node = wrap(NodeKind::subscript, {{node, Field::object}, {index, Field::index}});
            } else if (at_op(".")) {
                advance();
                if (!at_ident()) return node;
                NodeId name = leaf(NodeKind::identifier, advance());
                node = wrap(NodeKind::attribute, {{node, Field::object}, {name, Field::attribute}});
            } else {
                return node;
            }
        }
    }

    NodeId subscript_list() {
        Builder b = open(NodeKind::collection);
        b.text = "slice";
        while (!at_op("]") && !eof()) {
            if (at_op(":")) {
                advance();
                continue;
            }
            std::size_t before = pos_;
            b.add(star_or_test());
            if (pos_ == before) break;
            if (!at_op(":") && !accept_op(",")) break;
        }
        return close(b);
    }

    NodeId arguments() {
        Builder b = open(NodeKind::arguments);
        advance();  // (
        while (!at_op(")") && !eof()) {
            std::size_t before = pos_;
            if (at_op("*") || at_op("**")) {
                Builder u = open(NodeKind::unary_expression);
                u.text = std::string(advance().text);
                u.add(test(), Field::operand);
                b.add(close(u));
            } else if (at_ident() && at_op("=", 1)) {
                Builder k = open(NodeKind::keyword_argument);
                k.add(leaf(NodeKind::identifier, advance()), Field::name);
                advance();
                k.add(test(), Field::value);
                b.add(close(k));
            } else {
                NodeId value = named_test();
                if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) value = comprehension(value, "generator");
                b.add(value);
            }
            if (pos_ == before) {
                b.add(error_token());
                continue;
            }
            if (!accept_op(",")) break;
        }
        expect_op(")");
        return close(b);
    }

    NodeId comprehension(NodeId element, std::string kind) {
        Builder b{NodeKind::comprehension, pos_, {}, std::move(kind)};
        b.add(element, Field::value);
        while (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
            Builder c = open(NodeKind::comprehension_clause);
            accept_kw("async");
            advance();
            c.add(target_list(), Field::target);
            accept_kw("in");
            c.add(or_test(), Field::iterable);
            while (at_kw("if")) {
                advance();
                c.add(or_test(), Field::condition);
            }
            b.add(close(c));
        }
        return close(b);
    }

    NodeId target() { return star_or_bitor(); }

    NodeId star_or_bitor() {
        if (at_op("*")) {
            Builder b = open(NodeKind::unary_expression);
            b.text = "*";
            advance();
            b.add(bit_or(), Field::operand);
            return close(b);
        }
        return bit_or();
    }

    NodeId target_list() {
        std::size_t start = pos_;
        NodeId first = star_or_bitor();
        if (!at_op(",")) return first;
        Builder b{NodeKind::collection, start, {}, "tuple"};
        b.add(first);
        while (accept_op(",")) {
            if (at_kw("in") || at_op("=") || at_line_end()) break;
            b.add(star_or_bitor());
        }
        return close(b);
    }

    NodeId atom() {
        const Token& t = peek();
        switch (t.kind) {
            case TokKind::identifier:
                return leaf(NodeKind::identifier, advance());
            case TokKind::number:
                return leaf(NodeKind::literal, advance());
            case TokKind::string: {
                Builder b = open(NodeKind::literal);
                while (at_kind(TokKind::string)) advance();
                b.text = "string";
                return close(b);
            }
            case TokKind::keyword:
                if (t.text == "None" || t.text == "True" || t.text == "False") return leaf(NodeKind::literal, advance());
                if (t.text == "lambda") return lambda();
                break;
            case TokKind::op:
                if (t.text == "(") return paren_atom();
                if (t.text == "[") return bracket_atom("[", "]", "list");
                if (t.text == "{") return bracket_atom("{", "}", "dict");
                if (t.text == "...") return leaf(NodeKind::literal, advance());
                break;
            default:
                break;
        }
        // missing operand: zero-width error, caller decides how to recover
        return tree_.add_node(NodeKind::error, t.begin, t.begin, t.line);
    }

    NodeId paren_atom() {
        Builder b = open(NodeKind::parenthesized);
        advance();
        if (accept_op(")")) {
            b.kind = NodeKind::collection;
            b.text = "tuple";
            return close(b);
        }
        NodeId first = at_kw("yield") ? yield_expr() : (at_op("*") ? star_or_test() : named_test());
        if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
            b.add(comprehension(first, "generator"));
        } else if (at_op(",")) {
            b.kind = NodeKind::collection;
            b.text = "tuple";
            b.add(first);
            while (accept_op(",")) {
                if (at_op(")")) break;
                b.add(at_op("*") ? star_or_test() : named_test());
            }
        } else {
            b.add(first);
        }
        expect_op(")");
        return close(b);
    }

    NodeId bracket_atom(std::string_view open_tok, std::string_view close_tok, std::string kind) {
        Builder b = open(NodeKind::collection);
        b.text = kind;
        advance();
        while (!at_op(close_tok) && !eof()) {
            std::size_t before = pos_;
            NodeId item;
            if (at_op("**")) {
                Builder u = open(NodeKind::unary_expression);
                u.text = "**";
                advance();
                u.add(bit_or(), Field::operand);
                item = close(u);
            } else {
                item = at_op("*") ? star_or_test() : named_test();
                if (open_tok == "{" && accept_op(":")) {
                    NodeId value = test();
                    item = wrap(NodeKind::pair, {{item, Field::name}, {value, Field::value}});
                }
            }
            if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
                b.add(comprehension(item, kind));
                break;
            }
            b.add(item);
            if (pos_ == before) {
                b.add(error_token());
                continue;
            }
            if (!accept_op(",")) break;
        }
        expect_op(close_tok);
        return close(b);
    }
};

}  // namespace

SyntaxTree parse_python(std::string_view code) { return PythonParser(code).run(); }

}  // namespace asap::detail
