// Restricted YAML: a top-level block sequence of mappings with exactly the
// keys `name`, `args` and `output`. No anchors, tags, flow collections
// (other than `[]` for an empty arg list) or block scalars.

#include <cctype>
#include <optional>

#include "sew/representations.hpp"

namespace sew::detail {
namespace {

struct Line {
    std::string_view text;  // without newline and trailing comment
    std::size_t offset;     // offset of the first character of the line
    std::size_t indent;
};

[[noreturn]] void yaml_fail(std::string_view src, std::size_t offset, FailureKind kind, std::string reason) {
    fail(Scheme::Yaml, src, offset, kind, std::move(reason));
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<Line> split_lines(std::string_view src) {
    std::vector<Line> lines;
    std::size_t pos = 0;
    while (pos <= src.size()) {
        std::size_t eol = src.find('\n', pos);
        if (eol == std::string_view::npos) {
            eol = src.size();
        }
        std::string_view raw = src.substr(pos, eol - pos);
        if (!raw.empty() && raw.back() == '\r') {
            raw.remove_suffix(1);
        }
        std::size_t indent = 0;
        while (indent < raw.size() && raw[indent] == ' ') {
            ++indent;
        }
        if (indent < raw.size() && raw[indent] == '\t') {
            yaml_fail(src, pos + indent, FailureKind::Lexical, "tab characters are not allowed in indentation");
        }
        // Strip comments: a '#' at line start or preceded by whitespace.
        std::string_view body = raw;
        for (std::size_t i = indent; i < raw.size(); ++i) {
            if (raw[i] == '#' && (i == indent || raw[i - 1] == ' ')) {
                body = raw.substr(0, i);
                break;
            }
        }
        if (!trim(body).empty()) {
            while (!body.empty() && body.back() == ' ') {
                body.remove_suffix(1);
            }
            lines.push_back({body, pos, indent});
        }
        if (eol == src.size()) {
            break;
        }
        pos = eol + 1;
    }
    return lines;
}

class YamlParser {
public:
    explicit YamlParser(std::string_view src) : src_(src), lines_(split_lines(src)) {}

    WorkflowIR run() {
        WorkflowIR ir;
        while (i_ < lines_.size()) {
            ir.steps.push_back(item());
        }
        return ir;
    }

private:
    StepSpec item() {
        const Line& head = lines_[i_];
        if (head.indent != 0 || !head.text.starts_with("- ")) {
            yaml_fail(src_, head.offset + head.indent, FailureKind::Structural,
                      "expected a sequence item '- name: ...' at column 1");
        }
        std::optional<std::string> name;
        std::optional<std::vector<std::string>> args;
        std::optional<std::string> output;

        auto entry = [&](std::string_view text, std::size_t offset) {
            const auto colon = text.find(':');
            if (colon == std::string_view::npos) {
                yaml_fail(src_, offset, FailureKind::Structural, "expected 'key: value'");
            }
            const std::string_view key = text.substr(0, colon);
            std::string_view rest = text.substr(colon + 1);
            if (!rest.empty() && rest.front() != ' ') {
                yaml_fail(src_, offset + colon, FailureKind::Structural, "expected a space after ':'");
            }
            rest = trim(rest);
            const std::size_t value_offset = offset + colon + 1;
            if (key == "name" || key == "output") {
                auto& slot = key == "name" ? name : output;
                if (slot) {
                    yaml_fail(src_, offset, FailureKind::Structural, "duplicate key '" + std::string(key) + "'");
                }
                slot = scalar(rest, value_offset);
                ++i_;
            } else if (key == "args") {
                if (args) {
                    yaml_fail(src_, offset, FailureKind::Structural, "duplicate key 'args'");
                }
                ++i_;
                args = arg_list(rest, value_offset);
            } else {
                yaml_fail(src_, offset, FailureKind::Structural, "unknown key '" + std::string(key) + "'");
            }
        };

        entry(head.text.substr(2), head.offset + 2);
        while (i_ < lines_.size() && lines_[i_].indent == 2) {
            const Line& l = lines_[i_];
            entry(l.text.substr(2), l.offset + 2);
        }
        if (i_ < lines_.size() && lines_[i_].indent != 0) {
            yaml_fail(src_, lines_[i_].offset + lines_[i_].indent, FailureKind::Structural, "unexpected indentation");
        }
        if (!name || !args || !output) {
            yaml_fail(src_, head.offset, FailureKind::Structural, "item must define name, args and output");
        }
        return {std::move(*name), std::move(*args), std::move(*output)};
    }

    std::vector<std::string> arg_list(std::string_view rest, std::size_t offset) {
        if (rest == "[]") {
            return {};
        }
        if (!rest.empty()) {
            yaml_fail(src_, offset, FailureKind::Structural, "args must be a block sequence or []");
        }
        std::vector<std::string> out;
        std::optional<std::size_t> item_indent;
        while (i_ < lines_.size() && lines_[i_].indent >= 2 && lines_[i_].text.substr(lines_[i_].indent).starts_with("-")) {
            const Line& l = lines_[i_];
            if (l.indent != 2 && l.indent != 4) {
                yaml_fail(src_, l.offset, FailureKind::Structural, "args items must be indented by 2 or 4 spaces");
            }
            if (item_indent && *item_indent != l.indent) {
                yaml_fail(src_, l.offset, FailureKind::Structural, "inconsistent indentation in args");
            }
            item_indent = l.indent;
            const std::string_view body = l.text.substr(l.indent);
            if (!body.starts_with("- ")) {
                yaml_fail(src_, l.offset + l.indent, FailureKind::Structural, "expected '- value'");
            }
            out.push_back(scalar(trim(body.substr(2)), l.offset + l.indent + 2));
            ++i_;
        }
        if (out.empty()) {
            yaml_fail(src_, offset, FailureKind::Structural, "args has no items (use [] for none)");
        }
        return out;
    }

    std::string scalar(std::string_view value, std::size_t offset) const {
        if (value.empty()) {
            yaml_fail(src_, offset, FailureKind::Structural, "missing value");
        }
        const char c = value.front();
        if (c == '\'' || c == '"') {
            if (value.size() < 2 || value.back() != c) {
                yaml_fail(src_, offset, FailureKind::Lexical, "unterminated quoted scalar");
            }
            std::string_view inner = value.substr(1, value.size() - 2);
            if (inner.find(c) != std::string_view::npos || inner.find('\\') != std::string_view::npos) {
                yaml_fail(src_, offset, FailureKind::Lexical, "escapes in quoted scalars are not supported");
            }
            return std::string(inner);
        }
        if (std::string_view("&*!|>[]{}%@`,-?:").find(c) != std::string_view::npos) {
            yaml_fail(src_, offset, FailureKind::Structural,
                      std::string("unsupported YAML construct starting with '") + c + "'");
        }
        if (value.find(": ") != std::string_view::npos || value.back() == ':') {
            yaml_fail(src_, offset, FailureKind::Structural, "nested mappings are not supported");
        }
        return std::string(value);
    }

    std::string_view src_;
    std::vector<Line> lines_;
    std::size_t i_ = 0;
};

}  // namespace

WorkflowIR parse_yaml(std::string_view text) {
    return YamlParser(text).run();
}

std::string serialize_yaml(const WorkflowIR& workflow) {
    require_writable(workflow, Scheme::Yaml, ":#'\"&*!|>[]{}%@`,?-");
    std::string out;
    for (std::size_t i = 0; i < workflow.steps.size(); ++i) {
        const auto& step = workflow.steps[i];
        if (i) {
            out += "\n";
        }
        out += "- name: " + step.name + "\n";
        if (step.args.empty()) {
            out += "  args: []\n";
        } else {
            out += "  args:\n";
            for (const auto& arg : step.args) {
                out += "    - " + arg + "\n";
            }
        }
        out += "  output: " + step.output + "\n";
    }
    return out;
}

}  // namespace sew::detail
