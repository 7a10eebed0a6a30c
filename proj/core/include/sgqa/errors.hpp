#pragma once
// Exception taxonomy shared by all engine modules. Data-shaped failures
// (validation, execution) are reported as values where the module contract
// says so; these types cover contract breaches and unrecoverable input.

#include <stdexcept>
#include <string>

namespace sgqa {

struct EngineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MalformedDocument : EngineError { using EngineError::EngineError; };
struct UnknownObject : EngineError { using EngineError::EngineError; };
struct PlacementFailure : EngineError { using EngineError::EngineError; };
struct ExhaustedTemplates : EngineError { using EngineError::EngineError; };
struct TypeMismatch : EngineError { using EngineError::EngineError; };
struct DimensionMismatch : EngineError { using EngineError::EngineError; };
struct EmptyInput : EngineError { using EngineError::EngineError; };
struct NonFiniteLoss : EngineError { using EngineError::EngineError; };
struct EmptySelection : EngineError { using EngineError::EngineError; };
struct ExecAborted : EngineError { using EngineError::EngineError; };
struct ParseFailure : EngineError { using EngineError::EngineError; };
struct UnknownCategory : EngineError { using EngineError::EngineError; };
struct ConfigError : EngineError { using EngineError::EngineError; };

enum class ParseErrorKind { Syntax, UnknownOperation, ArityMismatch, MalformedSemantic };

// Program-text / GQA-semantic parse failure with source position.
// Lines and columns are 1-based; column 0 means "whole line".
class ParseError : public EngineError {
public:
    ParseError(ParseErrorKind kind, int line, int column, const std::string& detail)
        : EngineError(format(kind, line, column, detail)),
          kind(kind), line(line), column(column), detail(detail) {}

    ParseErrorKind kind;
    int line;
    int column;
    std::string detail;

private:
    static std::string format(ParseErrorKind kind, int line, int column,
                              const std::string& detail);
};

}  // namespace sgqa
