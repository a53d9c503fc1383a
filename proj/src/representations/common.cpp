#include <algorithm>
#include <cctype>

#include "sew/errors.hpp"
#include "sew/representations.hpp"

namespace sew {

std::string_view to_string(Scheme scheme) {
    switch (scheme) {
    case Scheme::Bpmn: return "BPMN";
    case Scheme::Core: return "CORE";
    case Scheme::PySteps: return "PYSTEPS";
    case Scheme::Yaml: return "YAML";
    case Scheme::Pseudo: return "PSEUDO";
    }
    return "UNKNOWN";
}

std::optional<Scheme> scheme_from_string(std::string_view tag) {
    std::string upper(tag);
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    for (Scheme s : kAllSchemes) {
        if (to_string(s) == upper) {
            return s;
        }
    }
    return std::nullopt;
}

std::string scheme_extension(Scheme scheme) {
    std::string ext(to_string(scheme));
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

std::string ParseFailure::describe() const {
    return std::string(to_string(scheme)) + " " + (kind == FailureKind::Lexical ? "lexical" : "structural") +
           " error at " + std::to_string(position.line) + ":" + std::to_string(position.column) + ": " + reason;
}

namespace detail {

SourcePosition position_at(std::string_view text, std::size_t offset) {
    SourcePosition pos;
    pos.offset = std::min(offset, text.size());
    for (std::size_t i = 0; i < pos.offset; ++i) {
        if (text[i] == '\n') {
            ++pos.line;
            pos.column = 1;
        } else {
            ++pos.column;
        }
    }
    return pos;
}

void fail(Scheme scheme, std::string_view text, std::size_t offset, FailureKind kind, std::string reason) {
    // Clamp so the reported position stays inside the source.
    if (!text.empty() && offset >= text.size()) {
        offset = text.size() - 1;
    }
    throw ParseError(ParseFailure{scheme, position_at(text, offset), kind, std::move(reason)});
}

void require_writable(const WorkflowIR& workflow, Scheme scheme, std::string_view forbidden) {
    if (workflow.steps.empty()) {
        throw Error(ErrorCode::Unserializable, "cannot serialize an empty workflow");
    }
    auto check = [&](const std::string& token, std::string_view what) {
        const bool bad = token.empty() || std::any_of(token.begin(), token.end(), [&](char c) {
                             return std::isspace(static_cast<unsigned char>(c)) ||
                                    forbidden.find(c) != std::string_view::npos;
                         });
        if (bad) {
            throw Error(ErrorCode::Unserializable, std::string(what) + " '" + token + "' cannot be written as " +
                                                       std::string(to_string(scheme)));
        }
    };
    for (const auto& step : workflow.steps) {
        check(step.name, "agent name");
        check(step.output, "output");
        for (const auto& arg : step.args) {
            check(arg, "arg");
        }
    }
}

}  // namespace detail

WorkflowIR parse(const WorkflowDoc& doc) {
    const bool blank = std::all_of(doc.text.begin(), doc.text.end(),
                                   [](unsigned char c) { return std::isspace(c); });
    if (blank) {
        detail::fail(doc.scheme, doc.text, 0, FailureKind::Structural, "empty document");
    }
    WorkflowIR ir;
    switch (doc.scheme) {
    case Scheme::Bpmn: ir = detail::parse_bpmn(doc.text); break;
    case Scheme::Core: ir = detail::parse_core(doc.text); break;
    case Scheme::PySteps: ir = detail::parse_pysteps(doc.text); break;
    case Scheme::Yaml: ir = detail::parse_yaml(doc.text); break;
    case Scheme::Pseudo: ir = detail::parse_pseudo(doc.text); break;
    }
    ir.scheme_hint = doc.scheme;
    return ir;
}

WorkflowDoc serialize(const WorkflowIR& workflow, Scheme scheme) {
    switch (scheme) {
    case Scheme::Bpmn: return {detail::serialize_bpmn(workflow), scheme};
    case Scheme::Core: return {detail::serialize_core(workflow), scheme};
    case Scheme::PySteps: return {detail::serialize_pysteps(workflow), scheme};
    case Scheme::Yaml: return {detail::serialize_yaml(workflow), scheme};
    case Scheme::Pseudo: return {detail::serialize_pseudo(workflow), scheme};
    }
    throw Error(ErrorCode::Unserializable, "unknown scheme");
}

WorkflowDoc transcode(const WorkflowDoc& doc, Scheme target) {
    return serialize(parse(doc), target);
}

std::string unwrap_fenced_document(std::string_view text) {
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            eol = text.size();
        }
        std::string_view line = text.substr(pos, eol - pos);
        const auto first = line.find_first_not_of(" \t");
        if (first != std::string_view::npos && line.substr(first).starts_with("```")) {
            const std::size_t body_start = std::min(eol + 1, text.size());
            std::size_t scan = body_start;
            while (scan < text.size()) {
                std::size_t end = text.find('\n', scan);
                if (end == std::string_view::npos) {
                    end = text.size();
                }
                std::string_view body_line = text.substr(scan, end - scan);
                const auto f = body_line.find_first_not_of(" \t");
                if (f != std::string_view::npos && body_line.substr(f).starts_with("```")) {
                    return std::string(text.substr(body_start, scan - body_start));
                }
                scan = end + 1;
            }
            return std::string(text.substr(body_start));
        }
        pos = eol + 1;
    }
    return std::string(text);
}

}  // namespace sew
