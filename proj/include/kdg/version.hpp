#pragma once

namespace kdg {

inline constexpr const char* version = "0.1.0";

#ifdef KDG_GIT_REV
inline constexpr const char* git_revision = KDG_GIT_REV;
#else
inline constexpr const char* git_revision = "unknown";
#endif

}  // namespace kdg
