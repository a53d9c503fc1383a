// Python-style step list:
//
//   steps = [
//       {'name': 'agent', 'args': ['task_description'], 'output': 'out'},
//   ]
//
// Recognized by a dedicated tokenizer; the text is never evaluated.

#include <cctype>

#include "sew/representations.hpp"

namespace sew::detail {
namespace {

enum class Tok { Ident, String, Punct, End };

struct Token {
    Tok kind;
    std::string_view text;  // string tokens: contents without quotes
    std::size_t offset;
};

class PyStepsParser {
public:
    explicit PyStepsParser(std::string_view src) : src_(src) { advance(); }

    WorkflowIR run() {
        expect_ident("steps");
        expect_punct('=');
        expect_punct('[');
        WorkflowIR ir;
        while (!is_punct(']')) {
            ir.steps.push_back(step());
            if (is_punct(',')) {
                advance();
            } else if (!is_punct(']')) {
                error(FailureKind::Structural, "expected ',' or ']' after step");
            }
        }
        advance();
        if (tok_.kind != Tok::End) {
            error(FailureKind::Structural, "unexpected content after closing ']'");
        }
        return ir;
    }

private:
    StepSpec step() {
        expect_punct('{');
        StepSpec s;
        key("name");
        s.name = string_value();
        expect_punct(',');
        key("args");
        expect_punct('[');
        while (!is_punct(']')) {
            s.args.push_back(string_value());
            if (is_punct(',')) {
                advance();
            } else if (!is_punct(']')) {
                error(FailureKind::Structural, "expected ',' or ']' in args");
            }
        }
        advance();
        expect_punct(',');
        key("output");
        s.output = string_value();
        if (is_punct(',')) {
            advance();
        }
        expect_punct('}');
        return s;
    }

    void key(std::string_view name) {
        if (tok_.kind != Tok::String || tok_.text != name) {
            error(FailureKind::Structural, "expected key '" + std::string(name) + "'");
        }
        advance();
        expect_punct(':');
    }

    std::string string_value() {
        if (tok_.kind != Tok::String) {
            error(FailureKind::Structural, "expected a single-quoted string");
        }
        std::string v(tok_.text);
        advance();
        return v;
    }

    bool is_punct(char c) const { return tok_.kind == Tok::Punct && tok_.text[0] == c; }

    void expect_punct(char c) {
        if (!is_punct(c)) {
            error(FailureKind::Structural, std::string("expected '") + c + "'");
        }
        advance();
    }

    void expect_ident(std::string_view name) {
        if (tok_.kind != Tok::Ident || tok_.text != name) {
            error(FailureKind::Structural, "expected '" + std::string(name) + "'");
        }
        advance();
    }

    void advance() {
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') {
                    ++pos_;
                }
            } else {
                break;
            }
        }
        if (pos_ >= src_.size()) {
            tok_ = {Tok::End, {}, src_.size()};
            return;
        }
        const std::size_t start = pos_;
        const char c = src_[pos_];
        if (c == '\'') {
            ++pos_;
            while (pos_ < src_.size() && src_[pos_] != '\'') {
                if (src_[pos_] == '\n' || src_[pos_] == '\\') {
                    fail(Scheme::PySteps, src_, pos_, FailureKind::Lexical,
                         src_[pos_] == '\n' ? "unterminated string" : "escape sequences are not supported");
                }
                ++pos_;
            }
            if (pos_ >= src_.size()) {
                fail(Scheme::PySteps, src_, start, FailureKind::Lexical, "unterminated string");
            }
            tok_ = {Tok::String, src_.substr(start + 1, pos_ - start - 1), start};
            ++pos_;
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
                ++pos_;
            }
            tok_ = {Tok::Ident, src_.substr(start, pos_ - start), start};
        } else if (std::string_view("=[]{}:,").find(c) != std::string_view::npos) {
            ++pos_;
            tok_ = {Tok::Punct, src_.substr(start, 1), start};
        } else {
            fail(Scheme::PySteps, src_, start, FailureKind::Lexical,
                 std::string("unexpected character '") + c + "'");
        }
    }

    [[noreturn]] void error(FailureKind kind, std::string reason) const {
        fail(Scheme::PySteps, src_, tok_.offset, kind, std::move(reason));
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    Token tok_{Tok::End, {}, 0};
};

}  // namespace

WorkflowIR parse_pysteps(std::string_view text) {
    return PyStepsParser(text).run();
}

std::string serialize_pysteps(const WorkflowIR& workflow) {
    require_writable(workflow, Scheme::PySteps, "'\\");
    std::string out = "steps = [\n";
    for (const auto& step : workflow.steps) {
        out += "    {'name': '" + step.name + "', 'args': [";
        for (std::size_t i = 0; i < step.args.size(); ++i) {
            out += (i ? ", '" : "'") + step.args[i] + "'";
        }
        out += "], 'output': '" + step.output + "'},\n";
    }
    out += "]\n";
    return out;
}

}  // namespace sew::detail
