// CoRE-style instruction list, one numbered instruction per line:
//
//   1:: process:: agent :: args=[a,b] :: output=o :: next::2
//
// Fields are instruction number, type, name, inputs, output and the `next`
// pointer (the successor's number, or END on the last line).

#include <cctype>
#include <charconv>

#include "sew/representations.hpp"

namespace sew::detail {
namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

struct Field {
    std::string_view text;
    std::size_t offset;
};

bool plain(std::string_view s) {
    if (s.empty()) {
        return false;
    }
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c)) || std::string_view(":[],=").find(c) != std::string_view::npos) {
            return false;
        }
    }
    return true;
}

struct Instruction {
    std::size_t number;
    StepSpec step;
    std::string_view next;
    std::size_t line_offset;
    std::size_t next_offset;
};

}  // namespace

WorkflowIR parse_core(std::string_view text) {
    auto err = [&](std::size_t at, FailureKind kind, std::string reason) {
        fail(Scheme::Core, text, at, kind, std::move(reason));
    };

    std::vector<Instruction> instructions;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            eol = text.size();
        }
        const std::string_view line = text.substr(pos, eol - pos);
        const std::string_view body = trim(line);
        if (body.empty() || body.front() == '#') {
            pos = eol + 1;
            continue;
        }

        std::vector<Field> fields;
        std::size_t start = 0;
        while (true) {
            const auto sep = line.find("::", start);
            const std::size_t end = sep == std::string_view::npos ? line.size() : sep;
            const std::string_view raw = line.substr(start, end - start);
            const std::size_t lead = raw.find_first_not_of(" \t\r");
            fields.push_back({trim(raw), pos + start + (lead == std::string_view::npos ? 0 : lead)});
            if (sep == std::string_view::npos) {
                break;
            }
            start = sep + 2;
        }
        if (fields.size() != 7) {
            err(pos, FailureKind::Structural,
                "expected 'n:: process:: name :: args=[..] :: output=o :: next::m', got " +
                    std::to_string(fields.size()) + " fields");
        }

        Instruction ins{};
        ins.line_offset = pos;
        const auto num = fields[0].text;
        const auto res = std::from_chars(num.data(), num.data() + num.size(), ins.number);
        if (num.empty() || res.ec != std::errc{} || res.ptr != num.data() + num.size()) {
            err(fields[0].offset, FailureKind::Lexical, "instruction number must be a positive integer");
        }
        if (fields[1].text != "process") {
            err(fields[1].offset, FailureKind::Structural, "instruction type must be 'process'");
        }
        if (!plain(fields[2].text)) {
            err(fields[2].offset, FailureKind::Lexical, "invalid agent name");
        }
        ins.step.name = std::string(fields[2].text);

        const auto args = fields[3].text;
        if (!args.starts_with("args=[") || !args.ends_with("]")) {
            err(fields[3].offset, FailureKind::Structural, "expected args=[...]");
        }
        const std::string_view list = args.substr(6, args.size() - 7);
        if (!trim(list).empty()) {
            std::size_t p = 0;
            while (true) {
                const auto comma = list.find(',', p);
                const auto item = trim(list.substr(p, comma == std::string_view::npos ? std::string_view::npos : comma - p));
                if (!plain(item)) {
                    err(fields[3].offset, FailureKind::Lexical, "invalid argument in args list");
                }
                ins.step.args.emplace_back(item);
                if (comma == std::string_view::npos) {
                    break;
                }
                p = comma + 1;
            }
        }

        const auto output = fields[4].text;
        if (!output.starts_with("output=") || !plain(output.substr(7))) {
            err(fields[4].offset, FailureKind::Structural, "expected output=<name>");
        }
        ins.step.output = std::string(output.substr(7));
        if (fields[5].text != "next") {
            err(fields[5].offset, FailureKind::Structural, "expected 'next'");
        }
        ins.next = fields[6].text;
        ins.next_offset = fields[6].offset;
        instructions.push_back(std::move(ins));
        pos = eol + 1;
    }

    WorkflowIR ir;
    for (std::size_t i = 0; i < instructions.size(); ++i) {
        const auto& ins = instructions[i];
        if (ins.number != i + 1) {
            err(ins.line_offset, FailureKind::Structural,
                "instructions must be numbered consecutively from 1 (expected " + std::to_string(i + 1) + ")");
        }
        const bool last = i + 1 == instructions.size();
        const std::string expected = last ? "END" : std::to_string(i + 2);
        if (ins.next != expected) {
            err(ins.next_offset, FailureKind::Structural, "next pointer must be " + expected);
        }
        ir.steps.push_back(ins.step);
    }
    return ir;
}

std::string serialize_core(const WorkflowIR& workflow) {
    require_writable(workflow, Scheme::Core, ":[],=");
    std::string out;
    const std::size_t n = workflow.steps.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& step = workflow.steps[i];
        out += std::to_string(i + 1) + ":: process:: " + step.name + " :: args=[";
        for (std::size_t a = 0; a < step.args.size(); ++a) {
            out += (a ? "," : "") + step.args[a];
        }
        out += "] :: output=" + step.output + " :: next::" + (i + 1 == n ? std::string("END") : std::to_string(i + 2)) +
               "\n";
    }
    return out;
}

}  // namespace sew::detail
