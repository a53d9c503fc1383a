#include <fstream>
#include <sstream>

#include "sew/evolution.hpp"

namespace sew {

namespace {

std::string trim_block(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return {};
    }
    // Keep leading indentation of the first content line.
    const auto line_start = s.rfind('\n', first);
    const std::size_t begin = line_start == std::string::npos ? 0 : line_start + 1;
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, last - begin + 1);
}

}  // namespace

PromptCorpus parse_corpus(std::string_view text) {
    PromptCorpus corpus;
    enum class Section { None, Mutation, Hyper, Thinking, Task };
    Section section = Section::None;
    std::string task_id;
    std::string current;
    std::size_t lineno = 0;

    auto flush = [&](bool at_section_end) {
        std::string entry = trim_block(current);
        current.clear();
        if (section == Section::None) {
            return;
        }
        if (entry.empty()) {
            throw Error(ErrorCode::Config, "corpus line " + std::to_string(lineno) + ": empty entry");
        }
        switch (section) {
        case Section::Mutation: corpus.mutation_prompts.push_back(std::move(entry)); break;
        case Section::Hyper: corpus.hyper_mutation_prompts.push_back(std::move(entry)); break;
        case Section::Thinking: corpus.thinking_styles.push_back(std::move(entry)); break;
        case Section::Task:
            if (!at_section_end) {
                throw Error(ErrorCode::Config, "corpus line " + std::to_string(lineno) +
                                                   ": a task-description section holds exactly one entry");
            }
            if (!corpus.task_descriptions.emplace(task_id, std::move(entry)).second) {
                throw Error(ErrorCode::Config, "duplicate task description '" + task_id + "'");
            }
            break;
        case Section::None: break;
        }
    };

    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            eol = text.size();
        }
        std::string line(text.substr(pos, eol - pos));
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.size() > 2 && line.front() == '[' && line.back() == ']') {
            if (section != Section::None) {
                flush(true);
            }
            const std::string header = line.substr(1, line.size() - 2);
            if (header == "mutation") {
                section = Section::Mutation;
            } else if (header == "hyper-mutation") {
                section = Section::Hyper;
            } else if (header == "thinking-style") {
                section = Section::Thinking;
            } else if (header.starts_with("task-description ") && header.size() > 17) {
                section = Section::Task;
                task_id = header.substr(17);
            } else {
                throw Error(ErrorCode::Config, "corpus line " + std::to_string(lineno) + ": unknown section [" +
                                                   header + "]");
            }
        } else if (section == Section::None) {
            if (!line.empty() && line.front() != '#' && line.find_first_not_of(" \t") != std::string::npos) {
                throw Error(ErrorCode::Config, "corpus line " + std::to_string(lineno) +
                                                   ": content before the first section header");
            }
        } else if (line == "---") {
            flush(false);
        } else {
            current += line;
            current += '\n';
        }
        if (eol == text.size()) {
            break;
        }
        pos = eol + 1;
    }
    if (section != Section::None) {
        flush(true);
    }

    if (corpus.mutation_prompts.empty() || corpus.hyper_mutation_prompts.empty() || corpus.thinking_styles.empty()) {
        throw Error(ErrorCode::Config, "corpus must define non-empty [mutation], [hyper-mutation] and "
                                       "[thinking-style] sections");
    }
    return corpus;
}

PromptCorpus load_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Config, "cannot open corpus file '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_corpus(ss.str());
}

}  // namespace sew
