#include "asap/syntax_tree.hpp"

#include <array>

namespace asap {

namespace {

constexpr std::array<std::string_view, static_cast<std::size_t>(NodeKind::error) + 1> kKindNames{
    "module",
    "function_definition",
    "class_definition",
    "decorator",
    "parameters",
    "parameter",
    "block",
    "expression_statement",
    "local_declaration",
    "variable_declarator",
    "assignment",
    "augmented_assignment",
    "update_expression",
    "if_statement",
    "else_clause",
    "loop_statement",
    "for_each_statement",
    "try_statement",
    "catch_clause",
    "finally_clause",
    "switch_statement",
    "switch_case",
    "with_statement",
    "with_item",
    "return_statement",
    "jump_statement",
    "throw_statement",
    "import_statement",
    "global_statement",
    "labeled_statement",
    "call",
    "arguments",
    "keyword_argument",
    "attribute",
    "subscript",
    "binary_expression",
    "unary_expression",
    "conditional_expression",
    "lambda",
    "new_expression",
    "cast_expression",
    "instanceof_expression",
    "parenthesized",
    "collection",
    "comprehension",
    "comprehension_clause",
    "pair",
    "method_reference",
    "type",
    "identifier",
    "literal",
    "ERROR",
};

constexpr std::array<std::string_view, static_cast<std::size_t>(Field::superclass) + 1> kFieldNames{
    "",          "name",     "parameters", "body",     "type",      "value",  "left",   "right",
    "condition", "consequence", "alternative", "function", "arguments", "object", "attribute", "target",
    "iterable",  "init",     "update",     "operand",  "index",     "superclass",
};

}  // namespace

std::string_view to_string(NodeKind kind) noexcept { return kKindNames[static_cast<std::size_t>(kind)]; }
std::string_view to_string(Field field) noexcept { return kFieldNames[static_cast<std::size_t>(field)]; }

SyntaxTree::SyntaxTree(std::string source) : source_(std::move(source)) {}

NodeId SyntaxTree::child(NodeId id, Field field) const {
    for (NodeId c : nodes_.at(id).children) {
        if (nodes_[c].field == field) return c;
    }
    return kNoNode;
}

std::string_view SyntaxTree::text_of(NodeId id) const {
    const auto& n = nodes_.at(id);
    if (n.end <= n.begin || n.end > source_.size()) return {};
    return std::string_view(source_).substr(n.begin, n.end - n.begin);
}

std::size_t SyntaxTree::error_count() const noexcept {
    // walk from the root: speculative parses may leave unattached nodes behind
    std::size_t count = 0;
    if (root_ == kNoNode) return count;
    std::vector<NodeId> stack{root_};
    while (!stack.empty()) {
        const auto& n = nodes_[stack.back()];
        stack.pop_back();
        count += n.kind == NodeKind::error ? 1 : 0;
        stack.insert(stack.end(), n.children.begin(), n.children.end());
    }
    return count;
}

std::vector<NodeId> SyntaxTree::identifiers() const {
    std::vector<NodeId> out;
    if (root_ == kNoNode) return out;
    std::vector<NodeId> stack{root_};
    while (!stack.empty()) {
        NodeId id = stack.back();
        stack.pop_back();
        const auto& n = nodes_[id];
        if (n.kind == NodeKind::identifier) out.push_back(id);
        for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) stack.push_back(*it);
    }
    return out;
}

std::string SyntaxTree::to_sexp() const {
    std::string out;
    if (root_ == kNoNode) return out;
    auto rec = [&](auto&& self, NodeId id) -> void {
        const auto& n = nodes_[id];
        if (n.field != Field::none) {
            out += to_string(n.field);
            out += ": ";
        }
        out += '(';
        out += to_string(n.kind);
        for (NodeId c : n.children) {
            out += ' ';
            self(self, c);
        }
        out += ')';
    };
    rec(rec, root_);
    return out;
}

NodeId SyntaxTree::add_node(NodeKind kind, std::uint32_t begin, std::uint32_t end, std::uint32_t line, std::string text) {
    SyntaxNode n;
    n.kind = kind;
    n.begin = begin;
    n.end = end;
    n.line = line;
    n.text = std::move(text);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

void SyntaxTree::append_child(NodeId parent, NodeId child, Field field) {
    if (child == kNoNode) return;
    nodes_.at(child).parent = parent;
    if (field != Field::none) nodes_[child].field = field;
    nodes_.at(parent).children.push_back(child);
}

void SyntaxTree::set_extent(NodeId id, std::uint32_t begin, std::uint32_t end, std::uint32_t line) {
    auto& n = nodes_.at(id);
    n.begin = begin;
    n.end = end;
    n.line = line;
}

}  // namespace asap
