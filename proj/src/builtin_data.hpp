#pragma once

#include <string_view>

namespace stylecap::detail {

// Contents of data/lexicon.tsv and data/templates.txt, embedded at build time.
std::string_view builtin_lexicon_text();
std::string_view builtin_templates_text();

}  // namespace stylecap::detail
