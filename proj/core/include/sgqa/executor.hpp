#pragma once
// Deterministic interpreter for validated programs over scene graphs. Each
// run yields a typed final value plus a per-step trace of attended regions;
// failure handling is policy-controlled (strict aborts, lenient recovers
// with flagged fallback answers).

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sgqa/program.hpp"
#include "sgqa/scene_graph.hpp"

namespace sgqa {

struct Value {
    // Object-id lists are kept lexicographically sorted; the head object of
    // query/choose is the first id.
    std::variant<std::vector<ObjectId>, bool, std::string> data;

    static Value objects(std::vector<ObjectId> ids) { return {std::move(ids)}; }
    static Value boolean(bool b) { return {b}; }
    static Value str(std::string s) { return {std::move(s)}; }

    bool is_objects() const { return data.index() == 0; }
    bool is_bool() const { return data.index() == 1; }
    bool is_str() const { return data.index() == 2; }
    const std::vector<ObjectId>& as_objects() const { return std::get<0>(data); }
    bool as_bool() const { return std::get<1>(data); }
    const std::string& as_str() const { return std::get<2>(data); }
    ValueType type() const {
        return is_objects() ? ValueType::ObjList
                            : is_bool() ? ValueType::Boolean : ValueType::String;
    }
    bool operator==(const Value&) const = default;
};

struct AttendedRegion {
    ObjectId id;
    BoundingBox box;
    bool operator==(const AttendedRegion&) const = default;
};

struct StepRecord {
    int index = 0;
    std::string fine_name;
    std::vector<std::string> arguments;
    std::vector<int> dependencies;
    std::vector<Value> inputs;
    Value output;
    // Own output for object-list steps; otherwise the attention of the most
    // recent object-list ancestor in the dependency closure.
    std::vector<AttendedRegion> attention;
};

struct Trace {
    std::vector<StepRecord> steps;
    Value final;
    std::vector<std::string> flags;
};

enum class ExecErrorKind {
    EmptyReference,
    UnknownAttributeCategory,
    UnknownRelation,
    TypeMismatch,
};

const char* exec_error_kind_name(ExecErrorKind kind);

struct ExecError {
    ExecErrorKind kind = ExecErrorKind::TypeMismatch;
    int step = -1;
    std::string message;
};

enum class Policy { Strict, Lenient };

struct ExecResult {
    std::optional<Trace> trace;
    std::optional<ExecError> error;
    bool ok() const { return trace.has_value(); }
};

// Runs the program in index order. Throws TypeMismatch (the exception) when
// the program does not validate; data-level failures come back as ExecError.
ExecResult execute(const Program& program, const SceneGraph& graph, const Catalog& catalog,
                   Policy policy = Policy::Lenient);

// Single-function semantics on already-resolved inputs. Strict evaluation:
// failures are reported as ExecError regardless of policy (execute applies
// the lenient recoveries).
std::variant<Value, ExecError> apply_function(const FunctionCall& call,
                                              const std::vector<Value>& inputs,
                                              const SceneGraph& graph);

// Bool(true) -> "yes", Bool(false) -> "no", Str(s) -> s. Throws TypeMismatch
// on an object-list final value.
std::string answer_of(const Trace& trace);

// One JSON object per step: {idx, op, args, deps, out_type, out, attention}.
std::string trace_to_jsonl(const Trace& trace);
// Human-readable step-by-step reasoning listing.
std::string trace_pretty(const Trace& trace);

}  // namespace sgqa
