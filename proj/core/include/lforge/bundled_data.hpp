#pragma once

#include <string_view>

namespace lforge {

/// Contents of data/bbob_property_levels.csv, compiled in.
std::string_view bundled_bbob_property_levels() noexcept;

/// Contents of data/prompt_template.txt, compiled in.
std::string_view bundled_prompt_template() noexcept;

} // namespace lforge
