// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace kinj {

enum class StyleTag { easy, medium, hard, qa, para, instruct };

std::string to_string(StyleTag tag);
StyleTag style_tag_from_string(std::string_view name);

struct PromptTemplate {
    std::string template_id;
    std::string body; // contains "{document}" exactly once
    StyleTag style = StyleTag::para;

    /// Throws ValidationError if the placeholder is missing or repeated.
    void validate() const;
};

/// Replaces each "{name}" in `body` with its value in one left-to-right pass; substituted
/// text is never rescanned. Every name must occur exactly once.
std::string render_template(std::string_view body, const std::map<std::string, std::string>& values);

/// All editable prompt text: augmentation templates plus the eval and judge prompts.
///
/// Defaults are compiled in and mirror assets/prompts/<id>.txt. `load` starts from the defaults
/// and replaces any template whose file exists in the directory.
struct PromptLibrary {
    std::map<std::string, PromptTemplate> augmentation;
    std::string eval_prompt;  // {context} {question}
    std::string judge_prompt; // {question} {reference} {candidate}

    static PromptLibrary defaults();
    static PromptLibrary load(const std::filesystem::path& dir);

    [[nodiscard]] const PromptTemplate& get(const std::string& template_id) const;
};

/// (file stem, default text) for every asset, in a fixed order.
std::vector<std::pair<std::string, std::string>> default_prompt_assets();

} // namespace kinj
