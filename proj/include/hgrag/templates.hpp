#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace hgrag {

enum class TemplateKind { kExtraction, kQueryEntities, kGeneration, kJudge };

/// A prompt with `{{name}}` slots.
class PromptTemplate {
 public:
  PromptTemplate() = default;
  /// Throws ConfigError if any of `required` is absent from `text`.
  PromptTemplate(std::string name, std::string text, std::vector<std::string> required);

  /// Single left-to-right pass: slot values are never re-expanded.
  std::string render(const std::map<std::string, std::string>& values) const;

  const std::string& name() const noexcept { return name_; }
  const std::string& text() const noexcept { return text_; }

 private:
  std::string name_;
  std::string text_;
};

class TemplateSet {
 public:
  /// Templates compiled into the library from the repository's templates/.
  static TemplateSet builtin();
  /// Load `<dir>/<kind>.txt`; files that do not exist fall back to the
  /// built-in text, files that exist must carry every required slot.
  static TemplateSet load(const std::filesystem::path& dir);

  const PromptTemplate& get(TemplateKind kind) const;

 private:
  std::map<TemplateKind, PromptTemplate> templates_;
};

std::string_view template_file_name(TemplateKind kind);

}  // namespace hgrag
