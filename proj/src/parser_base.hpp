#pragma once

#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "asap/syntax_tree.hpp"
#include "lexer.hpp"

namespace asap::detail {

/// Token cursor plus tree-building helpers shared by the recursive-descent front ends.
class ParserBase {
protected:
    ParserBase(std::string_view source, std::vector<Token> tokens) : tree_(std::string(source)), toks_(std::move(tokens)) {}

    struct Builder {
        NodeKind kind;
        std::size_t start;
        std::vector<std::pair<NodeId, Field>> kids;
        std::string text;

        void add(NodeId id, Field f = Field::none) {
            if (id != kNoNode) kids.emplace_back(id, f);
        }
    };

    const Token& peek(std::size_t k = 0) const {
        std::size_t i = pos_ + k;
        return i < toks_.size() ? toks_[i] : toks_.back();
    }
    const Token& prev() const { return toks_[pos_ == 0 ? 0 : pos_ - 1]; }
    bool eof() const { return peek().kind == TokKind::eof; }
    bool at_op(std::string_view op, std::size_t k = 0) const {
        const auto& t = peek(k);
        return t.kind == TokKind::op && t.text == op;
    }
    bool at_kw(std::string_view kw, std::size_t k = 0) const {
        const auto& t = peek(k);
        return t.kind == TokKind::keyword && t.text == kw;
    }
    bool at_kind(TokKind kind, std::size_t k = 0) const { return peek(k).kind == kind; }
    bool at_ident(std::size_t k = 0) const { return peek(k).kind == TokKind::identifier; }

    const Token& advance() {
        const Token& t = peek();
        if (t.kind != TokKind::eof) ++pos_;
        return t;
    }
    bool accept_op(std::string_view op) {
        if (!at_op(op)) return false;
        advance();
        return true;
    }
    bool accept_kw(std::string_view kw) {
        if (!at_kw(kw)) return false;
        advance();
        return true;
    }
    /// Consumes `op` or records a zero-width error for the missing token.
    bool expect_op(std::string_view op) {
        if (accept_op(op)) return true;
        missing_.push_back(tree_.add_node(NodeKind::error, peek().begin, peek().begin, peek().line, std::string(op)));
        return false;
    }

    Builder open(NodeKind kind) const { return Builder{kind, pos_, {}, {}}; }

    NodeId close(Builder& b) {
        std::uint32_t begin;
        std::uint32_t line;
        std::uint32_t end;
        if (b.start < pos_) {
            begin = toks_[b.start].begin;
            line = toks_[b.start].line;
            end = toks_[pos_ - 1].end;
        } else if (!b.kids.empty()) {
            const auto& first = tree_.node(b.kids.front().first);
            begin = first.begin;
            line = first.line;
            end = tree_.node(b.kids.back().first).end;
        } else {
            begin = end = peek().begin;
            line = peek().line;
        }
        // children parsed before the builder opened (left operands) widen the extent
        if (!b.kids.empty()) {
            const auto& first = tree_.node(b.kids.front().first);
            if (first.begin < begin) {
                begin = first.begin;
                line = first.line;
            }
        }
        NodeId id = tree_.add_node(b.kind, begin, end, line, std::move(b.text));
        for (auto& [kid, field] : b.kids) tree_.append_child(id, kid, field);
        return id;
    }

    NodeId leaf(NodeKind kind, const Token& t) {
        return tree_.add_node(kind, t.begin, t.end, t.line, std::string(t.text));
    }

    /// Wraps `first` (already parsed) and following children into a new node.
    NodeId wrap(NodeKind kind, std::initializer_list<std::pair<NodeId, Field>> kids, std::string text = {}) {
        Builder b{kind, pos_, {}, std::move(text)};
        for (const auto& [k, f] : kids) b.add(k, f);
        std::uint32_t begin = tree_.node(b.kids.front().first).begin;
        std::uint32_t line = tree_.node(b.kids.front().first).line;
        std::uint32_t end = tree_.node(b.kids.back().first).end;
        if (pos_ > 0 && toks_[pos_ - 1].end > end) end = toks_[pos_ - 1].end;
        NodeId id = tree_.add_node(kind, begin, end, line, std::move(b.text));
        for (auto& [kid, field] : b.kids) tree_.append_child(id, kid, field);
        return id;
    }

    /// Consumes one token into an error node; identifiers inside stay visible as leaves.
    NodeId error_token() {
        Builder b = open(NodeKind::error);
        const Token& t = advance();
        if (t.kind == TokKind::identifier) b.add(leaf(NodeKind::identifier, t));
        return close(b);
    }

    SyntaxTree finish(NodeId root) {
        for (NodeId m : missing_) tree_.append_child(root, m);
        tree_.set_root(root);
        return std::move(tree_);
    }

    SyntaxTree tree_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::vector<NodeId> missing_;
};

}  // namespace asap::detail
