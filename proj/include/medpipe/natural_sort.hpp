#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace medpipe {

/// Orders names by splitting them into digit and non-digit runs. Digit runs
/// compare numerically (so "img2" < "img10"), other runs byte-wise; when the
/// run sequences tie the full strings are compared lexicographically.
bool natural_less(std::string_view a, std::string_view b);

void natural_sort(std::vector<std::string>& names);

}  // namespace medpipe
