#include "medpipe/natural_sort.hpp"

#include <algorithm>
#include <cctype>

namespace medpipe {
namespace {

bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

// Numeric comparison of two digit runs of arbitrary length: strip leading
// zeros, then longer means larger, then byte-wise.
int compare_digits(std::string_view a, std::string_view b) {
  auto strip = [](std::string_view s) {
    const auto first = s.find_first_not_of('0');
    return first == std::string_view::npos ? std::string_view{} : s.substr(first);
  };
  const auto sa = strip(a);
  const auto sb = strip(b);
  if (sa.size() != sb.size()) return sa.size() < sb.size() ? -1 : 1;
  const int c = sa.compare(sb);
  return c < 0 ? -1 : (c > 0 ? 1 : 0);
}

}  // namespace

bool natural_less(std::string_view a, std::string_view b) {
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    const bool da = is_digit(a[i]);
    const bool db = is_digit(b[j]);
    std::size_t ei = i;
    std::size_t ej = j;
    while (ei < a.size() && is_digit(a[ei]) == da) ++ei;
    while (ej < b.size() && is_digit(b[ej]) == db) ++ej;
    const auto ra = a.substr(i, ei - i);
    const auto rb = b.substr(j, ej - j);
    int c = 0;
    if (da && db) {
      c = compare_digits(ra, rb);
    } else {
      const int raw = ra.compare(rb);
      c = raw < 0 ? -1 : (raw > 0 ? 1 : 0);
    }
    if (c != 0) return c < 0;
    i = ei;
    j = ej;
  }
  if ((i < a.size()) != (j < b.size())) return i >= a.size();
  return a < b;
}

void natural_sort(std::vector<std::string>& names) {
  std::sort(names.begin(), names.end(),
            [](const std::string& x, const std::string& y) { return natural_less(x, y); });
}

}  // namespace medpipe
