// Minimal BPMN encoding:
//
//   <process id="workflow">
//     <task id="step_1" name="agent">
//       <documentation>args=a,b;output=o</documentation>
//     </task>
//     <sequenceFlow id="flow_1" sourceRef="step_1" targetRef="step_2"/>
//   </process>
//
// The flows must chain every task into one linear sequence.

#include <cctype>
#include <map>
#include <set>

#include "sew/representations.hpp"

namespace sew::detail {
namespace {

struct XmlAttr {
    std::string name;
    std::string value;
};

struct XmlNode {
    std::string tag;
    std::vector<XmlAttr> attrs;
    std::vector<XmlNode> children;
    std::string text;
    std::size_t offset = 0;
    std::size_t text_offset = 0;

    const std::string* attr(std::string_view key) const {
        for (const auto& a : attrs) {
            if (a.name == key) {
                return &a.value;
            }
        }
        return nullptr;
    }
};

class XmlReader {
public:
    explicit XmlReader(std::string_view src) : src_(src) {}

    XmlNode document() {
        skip_misc();
        if (src_.substr(pos_, 5) == "<?xml") {
            const auto end = src_.find("?>", pos_);
            if (end == std::string_view::npos) {
                lexical(pos_, "unterminated XML declaration");
            }
            pos_ = end + 2;
        }
        skip_misc();
        if (pos_ >= src_.size() || src_[pos_] != '<') {
            structural(pos_, "expected root element");
        }
        XmlNode root = element();
        skip_misc();
        if (pos_ < src_.size()) {
            structural(pos_, "unexpected content after root element");
        }
        return root;
    }

private:
    void skip_misc() {
        while (true) {
            while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) {
                ++pos_;
            }
            if (src_.substr(pos_, 4) == "<!--") {
                skip_comment();
            } else {
                return;
            }
        }
    }

    void skip_comment() {
        const auto end = src_.find("-->", pos_ + 4);
        if (end == std::string_view::npos) {
            lexical(pos_, "unterminated comment");
        }
        pos_ = end + 3;
    }

    std::string name_token() {
        const std::size_t start = pos_;
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == ':' || c == '.') {
                ++pos_;
            } else {
                break;
            }
        }
        if (start == pos_) {
            lexical(start, "expected a name");
        }
        return std::string(src_.substr(start, pos_ - start));
    }

    XmlNode element() {
        XmlNode node;
        node.offset = pos_;
        ++pos_;  // '<'
        node.tag = name_token();
        while (true) {
            const std::size_t before = pos_;
            while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) {
                ++pos_;
            }
            if (pos_ >= src_.size()) {
                lexical(node.offset, "unterminated start tag");
            }
            if (src_[pos_] == '>') {
                ++pos_;
                break;
            }
            if (src_.substr(pos_, 2) == "/>") {
                pos_ += 2;
                return node;
            }
            if (before == pos_) {
                lexical(pos_, "expected whitespace before attribute");
            }
            XmlAttr attr;
            attr.name = name_token();
            if (pos_ >= src_.size() || src_[pos_] != '=') {
                lexical(pos_, "expected '=' after attribute name");
            }
            ++pos_;
            if (pos_ >= src_.size() || (src_[pos_] != '"' && src_[pos_] != '\'')) {
                lexical(pos_, "expected quoted attribute value");
            }
            const char quote = src_[pos_++];
            const auto end = src_.find(quote, pos_);
            if (end == std::string_view::npos) {
                lexical(pos_, "unterminated attribute value");
            }
            attr.value = decode(src_.substr(pos_, end - pos_), pos_);
            pos_ = end + 1;
            if (node.attr(attr.name)) {
                structural(pos_, "duplicate attribute '" + attr.name + "'");
            }
            node.attrs.push_back(std::move(attr));
        }

        // Content.
        bool text_seen = false;
        while (true) {
            if (pos_ >= src_.size()) {
                structural(node.offset, "element <" + node.tag + "> is not closed");
            }
            if (src_.substr(pos_, 4) == "<!--") {
                skip_comment();
            } else if (src_.substr(pos_, 2) == "</") {
                const std::size_t close_at = pos_;
                pos_ += 2;
                const std::string closing = name_token();
                while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) {
                    ++pos_;
                }
                if (pos_ >= src_.size() || src_[pos_] != '>') {
                    lexical(pos_, "expected '>' in end tag");
                }
                ++pos_;
                if (closing != node.tag) {
                    structural(close_at, "mismatched end tag </" + closing + "> for <" + node.tag + ">");
                }
                return node;
            } else if (src_[pos_] == '<') {
                if (src_.substr(pos_, 2) == "<!" || src_.substr(pos_, 2) == "<?") {
                    lexical(pos_, "unsupported markup declaration");
                }
                node.children.push_back(element());
            } else {
                const auto next = src_.find('<', pos_);
                const std::size_t end = next == std::string_view::npos ? src_.size() : next;
                if (!text_seen) {
                    node.text_offset = pos_;
                    text_seen = true;
                }
                node.text += decode(src_.substr(pos_, end - pos_), pos_);
                pos_ = end;
            }
        }
    }

    std::string decode(std::string_view raw, std::size_t base) const {
        std::string out;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (raw[i] != '&') {
                out += raw[i];
                continue;
            }
            const auto semi = raw.find(';', i);
            if (semi == std::string_view::npos) {
                lexical(base + i, "unterminated entity reference");
            }
            const std::string_view ent = raw.substr(i + 1, semi - i - 1);
            if (ent == "amp") out += '&';
            else if (ent == "lt") out += '<';
            else if (ent == "gt") out += '>';
            else if (ent == "quot") out += '"';
            else if (ent == "apos") out += '\'';
            else lexical(base + i, "unknown entity '&" + std::string(ent) + ";'");
            i = semi;
        }
        return out;
    }

    [[noreturn]] void lexical(std::size_t at, std::string reason) const {
        fail(Scheme::Bpmn, src_, at, FailureKind::Lexical, std::move(reason));
    }
    [[noreturn]] void structural(std::size_t at, std::string reason) const {
        fail(Scheme::Bpmn, src_, at, FailureKind::Structural, std::move(reason));
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

bool blank(std::string_view s) {
    return trim(s).empty();
}

std::string escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&apos;"; break;
        default: out += c;
        }
    }
    return out;
}

}  // namespace

WorkflowIR parse_bpmn(std::string_view text) {
    auto structural = [&](std::size_t at, std::string reason) {
        fail(Scheme::Bpmn, text, at, FailureKind::Structural, std::move(reason));
    };

    const XmlNode root = XmlReader(text).document();
    if (root.tag != "process") {
        structural(root.offset, "root element must be <process>");
    }
    if (!blank(root.text)) {
        structural(root.text_offset, "unexpected text inside <process>");
    }

    struct TaskEntry {
        StepSpec step;
        std::size_t offset;
    };
    std::vector<TaskEntry> tasks;
    std::map<std::string, std::size_t> index_by_id;
    std::vector<std::pair<const XmlNode*, std::pair<std::size_t, std::size_t>>> flows;

    for (const auto& child : root.children) {
        if (child.tag == "task") {
            for (const auto& a : child.attrs) {
                if (a.name != "id" && a.name != "name") {
                    structural(child.offset, "unexpected attribute '" + a.name + "' on <task>");
                }
            }
            const auto* id = child.attr("id");
            const auto* name = child.attr("name");
            if (!id || !name) {
                structural(child.offset, "<task> requires id and name attributes");
            }
            if (!index_by_id.emplace(*id, tasks.size()).second) {
                structural(child.offset, "duplicate task id '" + *id + "'");
            }
            if (!blank(child.text) || child.children.size() != 1 || child.children[0].tag != "documentation") {
                structural(child.offset, "<task> must contain exactly one <documentation> element");
            }
            const XmlNode& doc = child.children[0];
            if (!doc.attrs.empty() || !doc.children.empty()) {
                structural(doc.offset, "<documentation> must contain only text");
            }
            const std::string_view body = trim(doc.text);
            const auto semi = body.find(';');
            if (!body.starts_with("args=") || semi == std::string_view::npos ||
                body.substr(semi + 1, 7) != "output=") {
                structural(doc.offset, "documentation must read 'args=a,b;output=o'");
            }
            StepSpec step;
            step.name = *name;
            const std::string_view args = body.substr(5, semi - 5);
            if (!blank(args)) {
                std::size_t pos = 0;
                while (true) {
                    const auto comma = args.find(',', pos);
                    const std::string_view arg =
                        trim(args.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
                    if (arg.empty() || arg.find(';') != std::string_view::npos ||
                        arg.find('=') != std::string_view::npos) {
                        structural(doc.offset, "malformed args list");
                    }
                    step.args.emplace_back(arg);
                    if (comma == std::string_view::npos) {
                        break;
                    }
                    pos = comma + 1;
                }
            }
            const std::string_view output = trim(body.substr(semi + 8));
            if (output.empty() || output.find_first_of(";=, \t\n") != std::string_view::npos) {
                structural(doc.offset, "malformed output");
            }
            step.output = std::string(output);
            tasks.push_back({std::move(step), child.offset});
        } else if (child.tag == "sequenceFlow") {
            for (const auto& a : child.attrs) {
                if (a.name != "id" && a.name != "sourceRef" && a.name != "targetRef") {
                    structural(child.offset, "unexpected attribute '" + a.name + "' on <sequenceFlow>");
                }
            }
            if (!child.children.empty() || !blank(child.text)) {
                structural(child.offset, "<sequenceFlow> must be empty");
            }
            flows.push_back({&child, {0, 0}});
        } else {
            structural(child.offset, "unsupported element <" + child.tag + ">");
        }
    }

    const std::size_t n = tasks.size();
    std::vector<int> next(n, -1);
    std::vector<int> incoming(n, 0);
    for (auto& [node, ends] : flows) {
        const auto* src = node->attr("sourceRef");
        const auto* dst = node->attr("targetRef");
        if (!src || !dst) {
            structural(node->offset, "<sequenceFlow> requires sourceRef and targetRef");
        }
        const auto s = index_by_id.find(*src);
        const auto d = index_by_id.find(*dst);
        if (s == index_by_id.end() || d == index_by_id.end()) {
            structural(node->offset, "sequenceFlow references an unknown task");
        }
        if (s->second == d->second || next[s->second] != -1 || incoming[d->second] != 0) {
            structural(node->offset, "sequence flows must form a single linear chain");
        }
        next[s->second] = static_cast<int>(d->second);
        incoming[d->second] = 1;
    }

    WorkflowIR ir;
    if (n == 0) {
        return ir;
    }
    if (flows.size() != n - 1) {
        structural(root.offset, "sequence flows must connect every task into one chain");
    }
    int head = -1;
    for (std::size_t i = 0; i < n; ++i) {
        if (incoming[i] == 0) {
            head = static_cast<int>(i);
            break;
        }
    }
    std::set<int> seen;
    for (int cur = head; cur != -1; cur = next[cur]) {
        if (!seen.insert(cur).second) {
            structural(root.offset, "sequence flows contain a cycle");
        }
        ir.steps.push_back(tasks[cur].step);
    }
    if (ir.steps.size() != n) {
        structural(root.offset, "sequence flows must connect every task into one chain");
    }
    return ir;
}

std::string serialize_bpmn(const WorkflowIR& workflow) {
    require_writable(workflow, Scheme::Bpmn, ",;=");
    std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<process id=\"workflow\">\n";
    for (std::size_t i = 0; i < workflow.steps.size(); ++i) {
        const auto& step = workflow.steps[i];
        out += "  <task id=\"step_" + std::to_string(i + 1) + "\" name=\"" + escape(step.name) + "\">\n";
        out += "    <documentation>args=";
        for (std::size_t a = 0; a < step.args.size(); ++a) {
            out += (a ? "," : "") + escape(step.args[a]);
        }
        out += ";output=" + escape(step.output) + "</documentation>\n  </task>\n";
    }
    for (std::size_t i = 0; i + 1 < workflow.steps.size(); ++i) {
        const auto from = std::to_string(i + 1);
        const auto to = std::to_string(i + 2);
        out += "  <sequenceFlow id=\"flow_" + from + "\" sourceRef=\"step_" + from + "\" targetRef=\"step_" + to +
               "\"/>\n";
    }
    out += "</process>\n";
    return out;
}

}  // namespace sew::detail
