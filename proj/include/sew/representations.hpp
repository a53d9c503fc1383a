#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sew/workflow.hpp"

namespace sew {

inline constexpr Scheme kAllSchemes[] = {Scheme::Bpmn, Scheme::Core, Scheme::PySteps, Scheme::Yaml,
                                         Scheme::Pseudo};

/// "BPMN", "CORE", "PYSTEPS", "YAML", "PSEUDO".
std::string_view to_string(Scheme scheme);
std::optional<Scheme> scheme_from_string(std::string_view tag);
/// Lower-case file extension used for artifacts, e.g. "pysteps".
std::string scheme_extension(Scheme scheme);

struct WorkflowDoc {
    std::string text;
    Scheme scheme;

    bool operator==(const WorkflowDoc&) const = default;
};

enum class FailureKind { Lexical, Structural };

struct SourcePosition {
    std::size_t offset = 0;
    std::size_t line = 1;
    std::size_t column = 1;
};

struct ParseFailure {
    Scheme scheme;
    SourcePosition position;
    FailureKind kind;
    std::string reason;

    std::string describe() const;
};

class ParseError : public std::runtime_error {
public:
    explicit ParseError(ParseFailure failure)
        : std::runtime_error(failure.describe()), failure_(std::move(failure)) {}

    const ParseFailure& failure() const noexcept { return failure_; }

private:
    ParseFailure failure_;
};

/// Strict parse of a workflow document. Throws ParseError.
WorkflowIR parse(const WorkflowDoc& doc);

/// Canonical text for `scheme`. Throws Error(Unserializable) when a name
/// cannot be written in that scheme, Error(Unbound) for structurally broken IRs.
WorkflowDoc serialize(const WorkflowIR& workflow, Scheme scheme);

WorkflowDoc transcode(const WorkflowDoc& doc, Scheme target);

/// If `text` contains a markdown fenced block, returns the body of the
/// first one; otherwise returns `text` unchanged.
std::string unwrap_fenced_document(std::string_view text);

namespace detail {

WorkflowIR parse_pysteps(std::string_view text);
WorkflowIR parse_yaml(std::string_view text);
WorkflowIR parse_pseudo(std::string_view text);
WorkflowIR parse_bpmn(std::string_view text);
WorkflowIR parse_core(std::string_view text);

std::string serialize_pysteps(const WorkflowIR& workflow);
std::string serialize_yaml(const WorkflowIR& workflow);
std::string serialize_pseudo(const WorkflowIR& workflow);
std::string serialize_bpmn(const WorkflowIR& workflow);
std::string serialize_core(const WorkflowIR& workflow);

SourcePosition position_at(std::string_view text, std::size_t offset);

[[noreturn]] void fail(Scheme scheme, std::string_view text, std::size_t offset, FailureKind kind,
                       std::string reason);

/// Throws Error(Unserializable) if any name/arg/output contains a character
/// in `forbidden`, whitespace, or is empty.
void require_writable(const WorkflowIR& workflow, Scheme scheme, std::string_view forbidden);

}  // namespace detail

}  // namespace sew
