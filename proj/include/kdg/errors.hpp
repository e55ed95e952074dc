#pragma once

#include <stdexcept>
#include <string>

namespace kdg {

/// Base class of every error raised by the library. The CLI maps the
/// category onto its exit code.
class Error : public std::runtime_error {
public:
  enum class Category { config, numerical, mismatch, logic };

  Error(Category cat, const std::string& what)
      : std::runtime_error(what), category_(cat) {}

  Category category() const noexcept { return category_; }

private:
  Category category_;
};

#define KDG_DECLARE_ERROR(Name, Cat)                                        \
  class Name : public Error {                                               \
  public:                                                                   \
    explicit Name(const std::string& what)                                  \
        : Error(Category::Cat, std::string(#Name ": ") + what) {}           \
  };

// basis / mesh
KDG_DECLARE_ERROR(DegreeOutOfRange, config)
KDG_DECLARE_ERROR(DimensionOutOfRange, config)
KDG_DECLARE_ERROR(DegenerateBox, config)
KDG_DECLARE_ERROR(NodeNotOnFace, logic)
KDG_DECLARE_ERROR(NonConformalInterface, config)

// graph
KDG_DECLARE_ERROR(CycleDetected, numerical)

// kinetic
KDG_DECLARE_ERROR(NonpositiveDensity, numerical)
KDG_DECLARE_ERROR(PicardDiverged, numerical)
KDG_DECLARE_ERROR(UnknownModel, config)

// transport
KDG_DECLARE_ERROR(MissingTrace, logic)
KDG_DECLARE_ERROR(SingularBlock, numerical)
KDG_DECLARE_ERROR(TooLargeForDense, config)

// integrator
KDG_DECLARE_ERROR(UnknownScheme, config)
KDG_DECLARE_ERROR(NonPalindromicInput, config)

// runtime
KDG_DECLARE_ERROR(UnknownHandle, logic)
KDG_DECLARE_ERROR(DuplicateHandleInTask, logic)
KDG_DECLARE_ERROR(DeadlockDetected, logic)
KDG_DECLARE_ERROR(CodeletPanicked, numerical)
KDG_DECLARE_ERROR(UndeclaredAccess, logic)

// app
KDG_DECLARE_ERROR(ConfigError, config)
KDG_DECLARE_ERROR(ResultMismatch, mismatch)

#undef KDG_DECLARE_ERROR

}  // namespace kdg
