#include <algorithm>
#include <map>
#include <unordered_map>

#include "asap/analysis.hpp"

namespace asap {

namespace {

using DefSet = std::vector<std::size_t>;            // sorted occurrence indices
using Env = std::map<std::string, DefSet, std::less<>>;  // name -> reaching definitions

DefSet unite(const DefSet& a, const DefSet& b) {
    DefSet out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

Env join(const Env& a, const Env& b) {
    Env out = a;
    for (const auto& [name, defs] : b) {
        auto it = out.find(name);
        if (it == out.end()) {
            out.emplace(name, defs);
        } else {
            it->second = unite(it->second, defs);
        }
    }
    return out;
}

bool variable_like(IdentifierTag tag) {
    return tag == IdentifierTag::identifier || tag == IdentifierTag::local_variable ||
           tag == IdentifierTag::parameter;
}

/// Intra-procedural reaching definitions over the normalized tree. Branches join by
/// union; loop bodies run zero or one time; no aliasing.
class DfgBuilder {
public:
    DfgBuilder(const SyntaxTree& tree, const std::vector<TaggedIdentifier>& tags) : tree_(tree), tags_(tags) {
        auto ids = tree.identifiers();
        for (std::size_t i = 0; i < ids.size(); ++i) index_.emplace(ids[i], i);
    }

    std::vector<DfgEdge> run() {
        Env env;
        if (tree_.root() != kNoNode) visit(tree_.root(), env);
        std::stable_sort(edges_.begin(), edges_.end(), [](const DfgEdge& a, const DfgEdge& b) {
            if (a.target_index != b.target_index) return a.target_index < b.target_index;
            return a.kind == DfgEdgeKind::comes_from && b.kind == DfgEdgeKind::computed_from;
        });
        return std::move(edges_);
    }

private:
    const SyntaxNode& node(NodeId id) const { return tree_.node(id); }
    NodeId child(NodeId id, Field f) const { return tree_.child(id, f); }

    std::size_t occurrence(NodeId id) const { return index_.at(id); }
    IdentifierTag tag(NodeId id) const { return tags_.at(occurrence(id)).tag; }

    void visit_children(NodeId id, Env& env) {
        for (NodeId c : tree_.children(id)) visit(c, env);
    }

    DfgEdge edge(std::string name, std::size_t idx, DfgEdgeKind kind, DefSet sources) const {
        DfgEdge e{std::move(name), idx, kind, std::move(sources), {}};
        for (std::size_t s : e.source_indices) e.source_names.push_back(tags_.at(s).name);
        return e;
    }

    void use(NodeId id, const Env& env) {
        if (!variable_like(tag(id))) return;
        auto it = env.find(node(id).text);
        if (it == env.end()) return;
        std::size_t idx = occurrence(id);
        DefSet sources;
        for (std::size_t d : it->second)
            if (d < idx) sources.push_back(d);
        if (sources.empty()) return;
        edges_.push_back(edge(node(id).text, idx, DfgEdgeKind::comes_from, std::move(sources)));
    }

    void define(NodeId id, Env& env, const DefSet& computed_from) {
        std::size_t idx = occurrence(id);
        if (!computed_from.empty()) edges_.push_back(edge(node(id).text, idx, DfgEdgeKind::computed_from, computed_from));
        env[node(id).text] = DefSet{idx};
    }

    // variable occurrences inside a value expression
    void collect_sources(NodeId id, DefSet& out) const {
        if (id == kNoNode) return;
        const SyntaxNode& n = node(id);
        if (n.kind == NodeKind::identifier) {
            if (variable_like(tag(id))) out.push_back(occurrence(id));
            return;
        }
        if (n.kind == NodeKind::type) return;
        for (NodeId c : n.children) collect_sources(c, out);
    }

    DefSet sources_of(NodeId value) const {
        DefSet out;
        collect_sources(value, out);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    /// Binds every identifier of a target pattern; other targets (a.b, a[i]) are uses.
    void bind_target(NodeId id, Env& env, const DefSet& sources) {
        if (id == kNoNode) return;
        const SyntaxNode& n = node(id);
        switch (n.kind) {
            case NodeKind::identifier:
                define(id, env, sources);
                return;
            case NodeKind::collection:
            case NodeKind::parenthesized:
                for (NodeId c : n.children) bind_target(c, env, sources);
                return;
            case NodeKind::unary_expression:
                if (n.text == "*" || n.text == "**" || n.text == "...") {
                    for (NodeId c : n.children) bind_target(c, env, sources);
                    return;
                }
                break;
            case NodeKind::pair:
                bind_target(child(id, Field::value), env, sources);
                return;
            case NodeKind::binary_expression:
                // shallow front ends keep unstructured targets as flat sequences
                if (n.text.empty()) {
                    for (NodeId c : n.children) bind_target(c, env, sources);
                    return;
                }
                break;
            default:
                break;
        }
        visit(id, env);
    }

    void visit(NodeId id, Env& env) {
        if (id == kNoNode) return;
        const SyntaxNode& n = node(id);
        switch (n.kind) {
            case NodeKind::identifier:
                use(id, env);
                return;
            case NodeKind::literal:
            case NodeKind::type:
            case NodeKind::import_statement:
            case NodeKind::global_statement:
                return;
            case NodeKind::function_definition:
            case NodeKind::lambda:
                visit_function(id, env);
                return;
            case NodeKind::class_definition: {
                for (NodeId c : n.children)
                    if (node(c).field == Field::superclass) visit(c, env);
                Env inner = env;
                visit(child(id, Field::body), inner);
                return;
            }
            case NodeKind::parameter:
                visit(child(id, Field::value), env);
                for (NodeId c : n.children)
                    if (node(c).field == Field::name) bind_target(c, env, {});
                return;
            case NodeKind::variable_declarator: {
                NodeId value = child(id, Field::value);
                visit(value, env);
                if (value == kNoNode) return;  // declaration without initializer defines nothing yet
                DefSet src = sources_of(value);
                for (NodeId c : n.children)
                    if (node(c).field == Field::name) bind_target(c, env, src);
                return;
            }
            case NodeKind::local_declaration:
                for (NodeId c : n.children)
                    if (node(c).kind == NodeKind::variable_declarator) visit(c, env);
                return;
            case NodeKind::assignment: {
                NodeId right = child(id, Field::right);
                visit(right, env);
                bind_target(child(id, Field::left), env, sources_of(right));
                return;
            }
            case NodeKind::augmented_assignment: {
                NodeId right = child(id, Field::right);
                NodeId left = child(id, Field::left);
                visit(right, env);
                if (left != kNoNode && node(left).kind == NodeKind::identifier) {
                    use(left, env);
                    define(left, env, sources_of(right));
                } else {
                    visit(left, env);
                }
                return;
            }
            case NodeKind::update_expression: {
                NodeId operand = child(id, Field::operand);
                if (operand != kNoNode && node(operand).kind == NodeKind::identifier) {
                    use(operand, env);
                    define(operand, env, {});
                } else {
                    visit(operand, env);
                }
                return;
            }
            case NodeKind::if_statement:
            case NodeKind::conditional_expression:
                visit_branches(id, env);
                return;
            case NodeKind::loop_statement:
                visit_loop(id, env);
                return;
            case NodeKind::for_each_statement:
                visit_for_each(id, env);
                return;
            case NodeKind::switch_statement:
                visit_switch(id, env);
                return;
            case NodeKind::try_statement:
                visit_try(id, env);
                return;
            case NodeKind::catch_clause:
                for (NodeId c : n.children)
                    if (node(c).field == Field::name) bind_target(c, env, {});
                visit(child(id, Field::body), env);
                return;
            case NodeKind::with_item: {
                NodeId value = child(id, Field::value);
                visit(value, env);
                bind_target(child(id, Field::target), env, sources_of(value));
                return;
            }
            case NodeKind::instanceof_expression:
                visit(child(id, Field::left), env);
                if (NodeId name = child(id, Field::name); name != kNoNode) define(name, env, {});
                return;
            case NodeKind::comprehension: {
                // own scope, visited in source order
                Env inner = env;
                visit(child(id, Field::value), inner);
                for (NodeId c : n.children) {
                    if (node(c).kind != NodeKind::comprehension_clause) continue;
                    NodeId iterable = child(c, Field::iterable);
                    visit(iterable, inner);
                    bind_target(child(c, Field::target), inner, sources_of(iterable));
                    for (NodeId cond : tree_.children(c))
                        if (node(cond).field == Field::condition) visit(cond, inner);
                }
                return;
            }
            case NodeKind::keyword_argument:
                visit(child(id, Field::value), env);
                return;
            case NodeKind::attribute:
            case NodeKind::method_reference:
                visit(child(id, Field::object), env);
                return;
            default:
                visit_children(id, env);
                return;
        }
    }

    void visit_function(NodeId id, Env& env) {
        // nested scopes see the enclosing definitions but never leak their own
        Env inner = env;
        for (NodeId c : tree_.children(id)) {
            const SyntaxNode& k = node(c);
            if (k.field == Field::name || k.kind == NodeKind::decorator || k.field == Field::type) continue;
            visit(c, inner);
        }
    }

    void visit_branches(NodeId id, Env& env) {
        visit(child(id, Field::init), env);
        visit(child(id, Field::condition), env);
        Env then_env = env;
        visit(child(id, Field::consequence), then_env);
        Env else_env = env;
        visit(child(id, Field::alternative), else_env);
        env = join(then_env, else_env);
    }

    void visit_loop(NodeId id, Env& env) {
        const SyntaxNode& n = node(id);
        if (n.text == "do") {
            visit(child(id, Field::body), env);
            visit(child(id, Field::condition), env);
            return;
        }
        for (NodeId c : n.children)
            if (node(c).field == Field::init) visit(c, env);
        visit(child(id, Field::condition), env);
        Env body = env;
        visit(child(id, Field::body), body);
        for (NodeId c : n.children)
            if (node(c).field == Field::update) visit(c, body);
        env = join(env, body);
        visit(child(id, Field::alternative), env);
    }

    void visit_for_each(NodeId id, Env& env) {
        NodeId iterable = child(id, Field::iterable);
        NodeId target = child(id, Field::target);
        visit(iterable, env);
        Env body = env;
        bind_target(target, body, sources_of(iterable));
        visit(child(id, Field::body), body);
        env = join(env, body);
        visit(child(id, Field::alternative), env);
    }

    void visit_switch(NodeId id, Env& env) {
        visit(child(id, Field::condition), env);
        Env out = env;
        for (NodeId c : tree_.children(id)) {
            if (node(c).kind != NodeKind::switch_case) {
                if (node(c).field != Field::condition) visit(c, out);
                continue;
            }
            Env arm = env;
            visit_children(c, arm);
            out = join(out, arm);
        }
        env = std::move(out);
    }

    void visit_try(NodeId id, Env& env) {
        const SyntaxNode& n = node(id);
        for (NodeId c : n.children)
            if (node(c).field == Field::init) visit(c, env);
        Env in = env;
        visit(child(id, Field::body), env);
        Env try_out = env;
        Env handler_in = join(in, try_out);
        Env out = try_out;
        NodeId alternative = child(id, Field::alternative);
        if (alternative != kNoNode) visit(alternative, out);
        NodeId finally = kNoNode;
        for (NodeId c : n.children) {
            const SyntaxNode& k = node(c);
            if (k.kind == NodeKind::catch_clause) {
                Env h = handler_in;
                visit(c, h);
                out = join(out, h);
            } else if (k.kind == NodeKind::finally_clause) {
                finally = c;
            } else if (k.field == Field::none && k.kind != NodeKind::block) {
                // ruby "expr rescue fallback"
                Env h = handler_in;
                visit(c, h);
                out = join(out, h);
            }
        }
        env = std::move(out);
        visit(finally, env);
    }

    const SyntaxTree& tree_;
    const std::vector<TaggedIdentifier>& tags_;
    std::unordered_map<NodeId, std::size_t> index_;
    std::vector<DfgEdge> edges_;
};

}  // namespace

std::vector<DfgEdge> build_dfg(const SyntaxTree& tree, Language, const std::vector<TaggedIdentifier>& tags) {
    return DfgBuilder(tree, tags).run();
}

}  // namespace asap
