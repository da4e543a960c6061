#include "asap/analysis.hpp"

#include <algorithm>
#include <sstream>

#include "asap/error.hpp"
#include "asap/parser.hpp"

namespace asap {

std::string_view to_string(IdentifierTag tag) noexcept {
    switch (tag) {
        case IdentifierTag::function_name: return "function_name";
        case IdentifierTag::parameter: return "parameter";
        case IdentifierTag::local_variable: return "local_variable";
        case IdentifierTag::call: return "call";
        case IdentifierTag::type: return "type";
        case IdentifierTag::attribute: return "attribute";
        case IdentifierTag::identifier: return "identifier";
    }
    return "identifier";
}

std::string_view to_string(DfgEdgeKind kind) noexcept {
    return kind == DfgEdgeKind::comes_from ? "comes_from" : "computed_from";
}

Components parse_components(std::string_view spec) {
    Components c = Components::none();
    if (spec == "all") return Components::all();
    if (spec == "none") return c;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        std::size_t comma = spec.find(',', pos);
        if (comma == std::string_view::npos) comma = spec.size();
        auto part = spec.substr(pos, comma - pos);
        while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
        while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
        if (part == "repo") {
            c.repo = true;
        } else if (part == "id" || part == "identifiers") {
            c.identifiers = true;
        } else if (part == "dfg") {
            c.dfg = true;
        } else if (!part.empty()) {
            throw ConfigError("unknown analysis component '" + std::string(part) + "'");
        }
        pos = comma + 1;
    }
    return c;
}

std::string to_string(const Components& c) {
    std::string out;
    auto add = [&](bool on, const char* name) {
        if (!on) return;
        if (!out.empty()) out += ',';
        out += name;
    };
    add(c.repo, "repo");
    add(c.identifiers, "id");
    add(c.dfg, "dfg");
    return out.empty() ? "none" : out;
}

namespace {

bool binding_language(Language lang) {
    // assignment creates a local binding without a declaration
    return lang == Language::python || lang == Language::ruby || lang == Language::php;
}

// Climbs through destructuring wrappers; returns the first ancestor that is not one.
NodeId pattern_root(const SyntaxTree& t, NodeId id) {
    NodeId cur = id;
    while (true) {
        NodeId p = t.node(cur).parent;
        if (p == kNoNode) return cur;
        auto k = t.node(p).kind;
        bool wrapper = k == NodeKind::collection || k == NodeKind::parenthesized || k == NodeKind::pair ||
                       (k == NodeKind::unary_expression && (t.node(p).text == "*" || t.node(p).text == "**"));
        if (!wrapper) return cur;
        cur = p;
    }
}

IdentifierTag tag_of(const SyntaxTree& t, NodeId id, Language lang) {
    for (NodeId a = t.node(id).parent; a != kNoNode; a = t.node(a).parent) {
        if (t.node(a).kind == NodeKind::type) return IdentifierTag::type;
    }
    const SyntaxNode& n = t.node(id);
    const SyntaxNode& p = t.node(n.parent);
    Field f = n.field;
    switch (p.kind) {
        case NodeKind::function_definition:
            if (f == Field::name) return IdentifierTag::function_name;
            break;
        case NodeKind::class_definition:
            if (f == Field::name) return IdentifierTag::type;
            break;
        case NodeKind::parameter:
            if (f == Field::name) return IdentifierTag::parameter;
            break;
        case NodeKind::catch_clause:
        case NodeKind::instanceof_expression:
            if (f == Field::name) return IdentifierTag::local_variable;
            break;
        case NodeKind::call:
            if (f == Field::function) return IdentifierTag::call;
            break;
        case NodeKind::attribute:
            if (f == Field::attribute) {
                const SyntaxNode& gp = t.node(p.parent);
                bool called = gp.kind == NodeKind::call && t.node(n.parent).field == Field::function;
                return called ? IdentifierTag::call : IdentifierTag::attribute;
            }
            break;
        case NodeKind::method_reference:
            if (f == Field::attribute) return IdentifierTag::call;
            break;
        case NodeKind::keyword_argument:
            if (f == Field::name) return IdentifierTag::attribute;
            break;
        default:
            break;
    }
    if (p.kind == NodeKind::pair && f == Field::name) {
        // object keys are attributes unless the object is a destructuring pattern
        NodeId root = pattern_root(t, id);
        const SyntaxNode& r = t.node(root);
        bool in_pattern = r.parent != kNoNode && t.node(r.parent).kind == NodeKind::variable_declarator &&
                          r.field == Field::name;
        if (!in_pattern) return IdentifierTag::attribute;
    }

    NodeId root = pattern_root(t, id);
    const SyntaxNode& r = t.node(root);
    if (r.parent == kNoNode) return IdentifierTag::identifier;
    const SyntaxNode& owner = t.node(r.parent);
    switch (owner.kind) {
        case NodeKind::variable_declarator:
            if (r.field == Field::name) return IdentifierTag::local_variable;
            break;
        case NodeKind::parameter:
            if (r.field == Field::name) return IdentifierTag::parameter;
            break;
        case NodeKind::assignment:
        case NodeKind::augmented_assignment:
            if (r.field == Field::left) {
                if (binding_language(lang) || owner.text == ":=") return IdentifierTag::local_variable;
                // ruby-style "a, b = ..." in local_declaration-less languages stays an identifier
            }
            break;
        case NodeKind::local_declaration:
            // python annotated declaration without a value: "x: int"
            if (r.field == Field::left) return IdentifierTag::local_variable;
            break;
        case NodeKind::for_each_statement:
        case NodeKind::comprehension_clause:
        case NodeKind::with_item:
            if (r.field == Field::target) return IdentifierTag::local_variable;
            break;
        default:
            break;
    }
    return IdentifierTag::identifier;
}

}  // namespace

std::vector<TaggedIdentifier> tag_identifiers(const SyntaxTree& tree, Language language) {
    std::vector<TaggedIdentifier> out;
    auto ids = tree.identifiers();
    out.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out.push_back({tree.node(ids[i]).text, tag_of(tree, ids[i], language), i});
    }
    return out;
}

std::vector<TaggedIdentifier> tag_identifiers(std::string_view code, Language language) {
    return tag_identifiers(parse(code, language), language);
}

std::vector<DfgEdge> build_dfg(std::string_view code, Language language) {
    SyntaxTree tree = parse(code, language);
    return build_dfg(tree, language, tag_identifiers(tree, language));
}

std::vector<TaggedIdentifier> collapse_tags(std::vector<TaggedIdentifier> ids) {
    for (auto& id : ids) {
        if (id.tag != IdentifierTag::function_name && id.tag != IdentifierTag::parameter)
            id.tag = IdentifierTag::identifier;
    }
    return ids;
}

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

std::string signature_line(const Sample& s) {
    std::string short_name = s.func_name;
    if (auto dot = short_name.find_last_of(".:"); dot != std::string::npos) short_name = short_name.substr(dot + 1);
    std::istringstream in(s.code);
    std::string line;
    std::string first;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty()) continue;
        if (first.empty()) first = t;
        if (!short_name.empty() && t.find(short_name) != std::string::npos && t.front() != '@') return t;
    }
    return first;
}

// An extractor fails when the parse recovered nothing function-shaped around its errors.
bool unparseable(const SyntaxTree& tree) {
    if (!tree.has_error()) return false;
    for (std::size_t i = 0; i < tree.node_count(); ++i) {
        auto k = tree.node(static_cast<NodeId>(i)).kind;
        if (k == NodeKind::function_definition || k == NodeKind::lambda) return false;
    }
    return true;
}

}  // namespace

RepoFact make_repo_fact(const Sample& sample, bool tokenized) {
    return RepoFact{sample.repo, sample.path, sample.func_name, signature_line(sample), tokenized};
}

AnalysisProduct analyze(const Sample& sample, const Components& components) {
    if (!components.any()) throw AnalysisError("no analysis components requested");
    AnalysisProduct product;
    std::size_t failed = 0;
    std::size_t requested = 0;
    if (components.repo) {
        ++requested;
        if (std::count(sample.repo.begin(), sample.repo.end(), '/') == 1) {
            product.repo_fact = make_repo_fact(sample);
        } else {
            ++failed;
            product.warnings.push_back("repo: '" + sample.repo + "' is not owner/name");
        }
    }
    if (components.identifiers || components.dfg) {
        std::optional<SyntaxTree> tree;
        std::string parse_problem;
        try {
            tree.emplace(parse(sample.code, sample.language));
            if (unparseable(*tree)) parse_problem = "code did not parse";
        } catch (const std::exception& e) {
            parse_problem = e.what();
        }
        std::vector<TaggedIdentifier> tags;
        if (parse_problem.empty()) tags = tag_identifiers(*tree, sample.language);
        if (components.identifiers) {
            ++requested;
            if (parse_problem.empty()) {
                product.identifiers = tags;
            } else {
                ++failed;
                product.warnings.push_back("id: " + parse_problem);
            }
        }
        if (components.dfg) {
            ++requested;
            if (parse_problem.empty()) {
                try {
                    product.dfg = build_dfg(*tree, sample.language, tags);
                } catch (const std::exception& e) {
                    ++failed;
                    product.warnings.push_back(std::string("dfg: ") + e.what());
                }
            } else {
                ++failed;
                product.warnings.push_back("dfg: " + parse_problem);
            }
        }
    }
    if (failed == requested) {
        std::string msg = "all analysis extractors failed for sample '" + sample.id + "'";
        for (const auto& w : product.warnings) msg += "; " + w;
        throw AnalysisError(msg);
    }
    return product;
}

AnalysisProduct analyze_prefix(std::string_view code_prefix, Language language, std::optional<RepoFact> repo_fact,
                               const Components& components) {
    AnalysisProduct product;
    if (components.repo) product.repo_fact = std::move(repo_fact);
    bool blank = std::all_of(code_prefix.begin(), code_prefix.end(),
                             [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; });
    if (blank || !(components.identifiers || components.dfg)) return product;
    SyntaxTree tree = parse(code_prefix, language);
    auto tags = tag_identifiers(tree, language);
    if (components.dfg) product.dfg = build_dfg(tree, language, tags);
    if (components.identifiers) product.identifiers = std::move(tags);
    return product;
}

}  // namespace asap
