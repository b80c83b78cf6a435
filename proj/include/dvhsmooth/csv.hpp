#pragma once

#include <string>

namespace dvhsmooth {

/// Fixed float formatting for every output file: lowercase scientific with
/// 17 significant digits ("%.16e"), enough to round-trip a double.
std::string format_double(double v);

}  // namespace dvhsmooth
