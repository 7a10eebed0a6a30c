#pragma once
// The program DSL: a function catalog with a three-way output type system
// (object lists, booleans, strings), textual and GQA-format parsing,
// structural validation, and selection of the object-producing calls.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgqa/errors.hpp"

namespace sgqa {

using Json = nlohmann::ordered_json;

enum class ValueType { ObjList, Boolean, String };

const char* value_type_name(ValueType t);

enum class RelateDirection { Subject, Object };

struct FunctionCall {
    int index = 0;
    std::string operation;                 // coarse name, lower case
    std::string category;                  // fine-grained suffix, "" when absent
    bool negate = false;                   // "filter not(color)"
    std::vector<std::string> arguments;
    std::vector<int> dependencies;
    RelateDirection direction = RelateDirection::Subject;  // relate only

    // "select", "filter hposition", "filter not(color)"
    std::string fine_name() const;
    bool operator==(const FunctionCall&) const = default;
};

struct Program {
    std::vector<FunctionCall> functions;

    bool operator==(const Program&) const = default;
};

struct FunctionSignature {
    std::string operation;
    bool category_required = false;
    std::vector<ValueType> input_types;  // consumed from dependencies, in order
    int argument_arity = 0;
    ValueType output_type = ValueType::ObjList;
};

// The core function catalog. Twelve coarse operations; extensible with
// further signatures at runtime.
class Catalog {
public:
    static Catalog core();

    void add(FunctionSignature signature);
    const FunctionSignature* find(const std::string& operation, bool has_category) const;
    // Signature for a call, resolving category presence. Throws ParseError
    // (UnknownOperation) when absent.
    const FunctionSignature& resolve(const FunctionCall& call) const;

    ValueType classify(const FunctionCall& call) const { return resolve(call).output_type; }
    bool is_object_op(const FunctionCall& call) const {
        return classify(call) == ValueType::ObjList;
    }

    // F_O / F_B / F_S partition: operation names with the given output type.
    std::set<std::string> operations_of(ValueType type) const;
    const std::map<std::pair<std::string, bool>, FunctionSignature>& signatures() const {
        return signatures_;
    }

private:
    std::map<std::pair<std::string, bool>, FunctionSignature> signatures_;
};

struct Diagnostic {
    int index = -1;  // offending function, -1 for program-level issues
    std::string message;
};

// Text grammar: one call per line, `Op[ category]: arg(, arg)* (, [dep])*`,
// whitespace-insensitive around separators. Throws ParseError.
Program parse_program_text(const std::string& text, const Catalog& catalog);
std::string serialize_program_text(const Program& program);

// GQA question "semantic" list: entries {operation, argument, dependencies}.
// Argument strings are comma-split; "(s)"/"(o)" markers set the relate
// direction; trailing "(digits)" annotations are stripped. Throws ParseError.
Program parse_program_gqa(const Json& semantic, const Catalog& catalog);

// Canonical program JSON: list of {op, category, args, deps, direction?}.
Json program_to_json(const Program& program);
Program program_from_json(const Json& j, const Catalog& catalog);

// Structural validation: index ordering, arity, dependency types, single
// sink with Boolean/String output, full consumption of non-sink calls.
// Returns diagnostics; empty means the program is well formed.
std::vector<Diagnostic> validate(const Program& program, const Catalog& catalog);

bool is_valid(const Program& program, const Catalog& catalog);

// The calls whose output type is ObjList, in index order.
std::vector<FunctionCall> selected_layout(const Program& program, const Catalog& catalog);

}  // namespace sgqa
