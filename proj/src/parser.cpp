#include "asap/parser.hpp"

#include "asap/error.hpp"
#include "front_ends.hpp"

namespace asap {

namespace {

class FrontEnd final : public Parser {
public:
    explicit FrontEnd(Language lang) : lang_(lang) {}
    Language language() const noexcept override { return lang_; }
    SyntaxTree parse(std::string_view code) override {
        switch (lang_) {
            case Language::python: return detail::parse_python(code);
            case Language::java: return detail::parse_java(code);
            default: return detail::parse_shallow(code, lang_);
        }
    }

private:
    Language lang_;
};

}  // namespace

std::unique_ptr<Parser> make_parser(Language language) { return std::make_unique<FrontEnd>(language); }

std::unique_ptr<Parser> make_parser(std::string_view language_name) {
    try {
        return make_parser(parse_language(language_name));
    } catch (const Error&) {
        throw UnsupportedLanguage("no grammar for language '" + std::string(language_name) + "'");
    }
}

SyntaxTree parse(std::string_view code, Language language) { return make_parser(language)->parse(code); }

}  // namespace asap
