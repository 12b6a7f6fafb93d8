#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace cmsent {

using WarningSink = std::function<void(std::string_view)>;

/// Routes library warnings; the default sink writes to stderr.
void set_warning_sink(WarningSink sink);
void warn(std::string_view message);

}  // namespace cmsent
