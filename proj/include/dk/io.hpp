#pragma once

#include <string>

namespace dk {

/// Shortest round-trip decimal form, independent of the C locale.
std::string format_double(double v);

}  // namespace dk
