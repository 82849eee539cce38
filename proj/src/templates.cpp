#include "hgrag/templates.hpp"

#include <fstream>
#include <sstream>

#include "hgrag/errors.hpp"
#include "hgrag_builtin_templates.inc"

namespace hgrag {
namespace {

struct KindInfo {
  TemplateKind kind;
  std::string_view file;
  std::string_view builtin;
  std::vector<std::string> required;
};

const std::vector<KindInfo>& kinds() {
  static const std::vector<KindInfo> k = {
      {TemplateKind::kExtraction, "extraction.txt", builtin_templates::kExtraction, {"chunk"}},
      {TemplateKind::kQueryEntities, "query_entities.txt", builtin_templates::kQueryEntities,
       {"question"}},
      {TemplateKind::kGeneration, "generation.txt", builtin_templates::kGeneration,
       {"knowledge", "question"}},
      {TemplateKind::kJudge, "judge.txt", builtin_templates::kJudge,
       {"question", "answer", "reference"}},
  };
  return k;
}

}  // namespace

PromptTemplate::PromptTemplate(std::string name, std::string text,
                               std::vector<std::string> required)
    : name_(std::move(name)), text_(std::move(text)) {
  for (const auto& slot : required) {
    if (text_.find("{{" + slot + "}}") == std::string::npos) {
      throw ConfigError("template '" + name_ + "' is missing placeholder {{" + slot + "}}");
    }
  }
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
  std::string out;
  out.reserve(text_.size() + 256);
  std::size_t i = 0;
  while (i < text_.size()) {
    auto open = text_.find("{{", i);
    if (open == std::string::npos) {
      out.append(text_, i);
      break;
    }
    auto close = text_.find("}}", open + 2);
    if (close == std::string::npos) {
      out.append(text_, i);
      break;
    }
    out.append(text_, i, open - i);
    auto key = text_.substr(open + 2, close - open - 2);
    if (auto it = values.find(key); it != values.end()) {
      out.append(it->second);
    } else {
      out.append(text_, open, close + 2 - open);
    }
    i = close + 2;
  }
  return out;
}

std::string_view template_file_name(TemplateKind kind) {
  for (const auto& k : kinds()) {
    if (k.kind == kind) return k.file;
  }
  return {};
}

TemplateSet TemplateSet::builtin() {
  TemplateSet set;
  for (const auto& k : kinds()) {
    set.templates_[k.kind] = PromptTemplate(std::string(k.file), std::string(k.builtin), k.required);
  }
  return set;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ConfigError("templates directory not found: " + dir.string());
  }
  TemplateSet set;
  for (const auto& k : kinds()) {
    auto path = dir / k.file;
    std::string body(k.builtin);
    if (std::filesystem::exists(path)) {
      std::ifstream in(path, std::ios::binary);
      if (!in) throw ConfigError("cannot read template " + path.string());
      std::ostringstream ss;
      ss << in.rdbuf();
      body = ss.str();
    }
    set.templates_[k.kind] = PromptTemplate(path.string(), std::move(body), k.required);
  }
  return set;
}

const PromptTemplate& TemplateSet::get(TemplateKind kind) const { return templates_.at(kind); }

}  // namespace hgrag
