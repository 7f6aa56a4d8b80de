#pragma once

#include <stdexcept>
#include <string>

namespace tcplan {

// Failure classes. The CLI maps each class to an exit code.
enum class ErrorClass { Config, Data, Checkpoint, Runtime };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
  ErrorClass error_class() const noexcept { return cls_; }

 private:
  ErrorClass cls_;
};

#define TCPLAN_DEFINE_ERROR(Name, Class)                                  \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& what) : Error(ErrorClass::Class, what) {} \
  };

// tensorlab
TCPLAN_DEFINE_ERROR(DimensionError, Runtime)
TCPLAN_DEFINE_ERROR(IndexError, Runtime)
TCPLAN_DEFINE_ERROR(NumericError, Runtime)
TCPLAN_DEFINE_ERROR(EvaluationError, Runtime)

// corpus
TCPLAN_DEFINE_ERROR(SchemaError, Data)
TCPLAN_DEFINE_ERROR(ValidationError, Data)
TCPLAN_DEFINE_ERROR(TargetCreationError, Data)
TCPLAN_DEFINE_ERROR(AlignmentError, Data)
TCPLAN_DEFINE_ERROR(GenerationError, Data)

// planner / training
TCPLAN_DEFINE_ERROR(TruncationError, Runtime)
TCPLAN_DEFINE_ERROR(CheckpointError, Checkpoint)
TCPLAN_DEFINE_ERROR(TrainingError, Runtime)

// guidance / metrics / cli
TCPLAN_DEFINE_ERROR(GuidanceError, Runtime)
TCPLAN_DEFINE_ERROR(RealizationError, Runtime)
TCPLAN_DEFINE_ERROR(InputError, Runtime)
TCPLAN_DEFINE_ERROR(ConfigError, Config)

#undef TCPLAN_DEFINE_ERROR

}  // namespace tcplan
