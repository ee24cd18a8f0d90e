#pragma once

namespace fraclat {

/// `git describe` of the source tree at configure time.
const char* version_string();

}  // namespace fraclat
