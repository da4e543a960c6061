#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace asap {

/// Node kinds shared by every language front end, so extractors walk one vocabulary.
enum class NodeKind : std::uint8_t {
    module,
    function_definition,
    class_definition,
    decorator,
    parameters,
    parameter,
    block,
    expression_statement,
    local_declaration,
    variable_declarator,
    assignment,
    augmented_assignment,
    update_expression,
    if_statement,
    else_clause,
    loop_statement,
    for_each_statement,
    try_statement,
    catch_clause,
    finally_clause,
    switch_statement,
    switch_case,
    with_statement,
    with_item,
    return_statement,
    jump_statement,
    throw_statement,
    import_statement,
    global_statement,
    labeled_statement,
    call,
    arguments,
    keyword_argument,
    attribute,
    subscript,
    binary_expression,
    unary_expression,
    conditional_expression,
    lambda,
    new_expression,
    cast_expression,
    instanceof_expression,
    parenthesized,
    collection,
    comprehension,
    comprehension_clause,
    pair,
    method_reference,
    type,
    identifier,
    literal,
    error,
};

/// Role of a child within its parent.
enum class Field : std::uint8_t {
    none,
    name,
    parameters,
    body,
    type,
    value,
    left,
    right,
    condition,
    consequence,
    alternative,
    function,
    arguments,
    object,
    attribute,
    target,
    iterable,
    init,
    update,
    operand,
    index,
    superclass,
};

std::string_view to_string(NodeKind kind) noexcept;
std::string_view to_string(Field field) noexcept;

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = 0xffffffffu;

struct SyntaxNode {
    NodeKind kind = NodeKind::error;
    Field field = Field::none;
    std::uint32_t begin = 0;  ///< byte offset
    std::uint32_t end = 0;    ///< byte offset, exclusive
    std::uint32_t line = 0;   ///< 0-based line of `begin`
    NodeId parent = kNoNode;
    std::vector<NodeId> children;
    std::string text;  ///< identifier/literal spelling, operator of expressions
};

/// Concrete syntax tree over one source text. Leaves are identifiers and literals;
/// punctuation is not materialized. Error regions become `error` nodes.
class SyntaxTree {
public:
    explicit SyntaxTree(std::string source);

    const std::string& source() const noexcept { return source_; }
    NodeId root() const noexcept { return root_; }
    const SyntaxNode& node(NodeId id) const { return nodes_.at(id); }
    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::span<const NodeId> children(NodeId id) const { return nodes_.at(id).children; }

    /// First child carrying `field`, or kNoNode.
    NodeId child(NodeId id, Field field) const;
    std::string_view text_of(NodeId id) const;
    std::size_t error_count() const noexcept;
    bool has_error() const noexcept { return error_count() > 0; }

    /// Identifier leaves in source order.
    std::vector<NodeId> identifiers() const;

    /// tree-sitter style S-expression, e.g. "(module (function_definition name: (identifier) ...))".
    std::string to_sexp() const;

    // builder interface used by the front ends
    NodeId add_node(NodeKind kind, std::uint32_t begin, std::uint32_t end, std::uint32_t line, std::string text = {});
    void append_child(NodeId parent, NodeId child, Field field = Field::none);
    void set_field(NodeId id, Field field) { nodes_.at(id).field = field; }
    void set_root(NodeId id) { root_ = id; }
    void set_extent(NodeId id, std::uint32_t begin, std::uint32_t end, std::uint32_t line);
    void set_text(NodeId id, std::string text) { nodes_.at(id).text = std::move(text); }

private:
    std::string source_;
    std::vector<SyntaxNode> nodes_;
    NodeId root_ = kNoNode;
};

}  // namespace asap
