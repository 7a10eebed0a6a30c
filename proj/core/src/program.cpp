#include "sgqa/program.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace sgqa {
namespace {

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string piece;
    std::stringstream ss(s);
    while (std::getline(ss, piece, ',')) out.push_back(trim(piece));
    if (!s.empty() && s.back() == ',') out.push_back("");
    return out;
}

bool parse_bracket_dep(const std::string& piece, int* dep) {
    if (piece.size() < 3 || piece.front() != '[' || piece.back() != ']') return false;
    const std::string inner = trim(std::string_view(piece).substr(1, piece.size() - 2));
    if (inner.empty()) return false;
    for (char c : inner)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    *dep = std::stoi(inner);
    return true;
}

// "left [0]" style: argument followed by a space-separated bracket dep.
bool split_trailing_dep(const std::string& piece, std::string* head, int* dep) {
    const size_t open = piece.rfind('[');
    if (open == std::string::npos || open == 0 || piece.back() != ']') return false;
    if (!std::isspace(static_cast<unsigned char>(piece[open - 1]))) return false;
    if (!parse_bracket_dep(piece.substr(open), dep)) return false;
    *head = trim(std::string_view(piece).substr(0, open));
    return !head->empty();
}

// Strip a trailing " (digits)" grounding annotation.
std::string strip_annotation(const std::string& piece) {
    const size_t open = piece.rfind('(');
    if (open == std::string::npos || open == 0 || piece.back() != ')') return piece;
    const std::string inner = piece.substr(open + 1, piece.size() - open - 2);
    if (inner.empty()) return piece;
    for (char c : inner)
        if (!std::isdigit(static_cast<unsigned char>(c))) return piece;
    return trim(std::string_view(piece).substr(0, open));
}

// Split "filter not(color)" into op/category/negate parts.
void parse_head(const std::string& head, int line_no, FunctionCall* call) {
    const size_t space = head.find_first_of(" \t");
    call->operation = lower(trim(head.substr(0, space)));
    call->category.clear();
    call->negate = false;
    if (space == std::string::npos) return;
    std::string cat = trim(std::string_view(head).substr(space + 1));
    if (cat.size() > 5 && lower(cat.substr(0, 4)) == "not(" && cat.back() == ')') {
        call->negate = true;
        cat = trim(std::string_view(cat).substr(4, cat.size() - 5));
    }
    call->category = lower(cat);
    if (call->operation.empty() || (space != std::string::npos && call->category.empty()))
        throw ParseError(ParseErrorKind::Syntax, line_no, 1, "empty operation or category");
}

void check_arity(const FunctionCall& call, const FunctionSignature& sig, int line_no) {
    if (static_cast<int>(call.arguments.size()) != sig.argument_arity)
        throw ParseError(ParseErrorKind::ArityMismatch, line_no, 0,
                         call.fine_name() + " takes " + std::to_string(sig.argument_arity) +
                             " argument(s), got " + std::to_string(call.arguments.size()));
    if (call.dependencies.size() != sig.input_types.size())
        throw ParseError(ParseErrorKind::ArityMismatch, line_no, 0,
                         call.fine_name() + " takes " + std::to_string(sig.input_types.size()) +
                             " dependenc(ies), got " + std::to_string(call.dependencies.size()));
}

}  // namespace

const char* value_type_name(ValueType t) {
    switch (t) {
        case ValueType::ObjList: return "objlist";
        case ValueType::Boolean: return "boolean";
        case ValueType::String: return "string";
    }
    return "?";
}

std::string FunctionCall::fine_name() const {
    if (category.empty()) return operation;
    if (negate) return operation + " not(" + category + ")";
    return operation + " " + category;
}

Catalog Catalog::core() {
    Catalog c;
    const auto O = ValueType::ObjList;
    const auto B = ValueType::Boolean;
    const auto S = ValueType::String;
    c.add({"select", false, {}, 1, O});
    c.add({"filter", true, {O}, 1, O});
    c.add({"relate", false, {O}, 2, O});
    c.add({"verify", true, {O}, 1, B});
    c.add({"query", true, {O}, 0, S});
    c.add({"exist", false, {O}, 0, B});
    c.add({"and", false, {B, B}, 0, B});
    c.add({"or", false, {B, B}, 0, B});
    c.add({"choose", true, {O}, 2, S});
    c.add({"same", true, {O, O}, 0, B});
    c.add({"different", true, {O, O}, 0, B});
    c.add({"common", false, {O, O}, 0, S});
    return c;
}

void Catalog::add(FunctionSignature signature) {
    signatures_[{signature.operation, signature.category_required}] = std::move(signature);
}

const FunctionSignature* Catalog::find(const std::string& operation, bool has_category) const {
    const auto it = signatures_.find({operation, has_category});
    return it == signatures_.end() ? nullptr : &it->second;
}

const FunctionSignature& Catalog::resolve(const FunctionCall& call) const {
    const FunctionSignature* sig = find(call.operation, !call.category.empty());
    if (!sig)
        throw ParseError(ParseErrorKind::UnknownOperation, call.index + 1, 0,
                         "unknown operation \"" + call.fine_name() + "\"");
    return *sig;
}

std::set<std::string> Catalog::operations_of(ValueType type) const {
    std::set<std::string> out;
    for (const auto& [key, sig] : signatures_)
        if (sig.output_type == type) out.insert(sig.operation);
    return out;
}

Program parse_program_text(const std::string& text, const Catalog& catalog) {
    Program program;
    std::stringstream ss(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(ss, raw)) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const size_t colon = line.find(':');
        if (colon == std::string::npos)
            throw ParseError(ParseErrorKind::Syntax, line_no, 0, "missing ':' separator");
        FunctionCall call;
        call.index = static_cast<int>(program.functions.size());
        parse_head(trim(std::string_view(line).substr(0, colon)), line_no, &call);

        bool deps_started = false;
        for (const std::string& piece : split_commas(line.substr(colon + 1))) {
            if (piece.empty()) {
                if (call.arguments.empty() && call.dependencies.empty()) continue;
                throw ParseError(ParseErrorKind::Syntax, line_no, 0, "empty list item");
            }
            int dep = 0;
            std::string head;
            if (parse_bracket_dep(piece, &dep)) {
                call.dependencies.push_back(dep);
                deps_started = true;
            } else if (split_trailing_dep(piece, &head, &dep)) {
                if (deps_started)
                    throw ParseError(ParseErrorKind::Syntax, line_no, 0,
                                     "argument after dependency");
                if (head == "(s)") {
                    call.direction = RelateDirection::Subject;
                } else if (head == "(o)") {
                    call.direction = RelateDirection::Object;
                } else {
                    call.arguments.push_back(head);
                }
                call.dependencies.push_back(dep);
                deps_started = true;
            } else if (piece == "(s)") {
                call.direction = RelateDirection::Subject;
            } else if (piece == "(o)") {
                call.direction = RelateDirection::Object;
            } else {
                if (deps_started)
                    throw ParseError(ParseErrorKind::Syntax, line_no, 0,
                                     "argument after dependency");
                call.arguments.push_back(piece);
            }
        }
        check_arity(call, catalog.resolve(call), line_no);
        program.functions.push_back(std::move(call));
    }
    if (program.functions.empty())
        throw ParseError(ParseErrorKind::Syntax, 1, 0, "empty program");
    return program;
}

std::string serialize_program_text(const Program& program) {
    std::string out;
    for (const FunctionCall& f : program.functions) {
        std::string head = f.fine_name();
        head[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(head[0])));
        out += head;
        out += ':';
        bool first = true;
        const auto item = [&](const std::string& s) {
            out += first ? " " : ", ";
            out += s;
            first = false;
        };
        for (const std::string& a : f.arguments) item(a);
        if (f.operation == "relate" && f.direction == RelateDirection::Object) item("(o)");
        for (int d : f.dependencies) item("[" + std::to_string(d) + "]");
        out += '\n';
    }
    return out;
}

Program parse_program_gqa(const Json& semantic, const Catalog& catalog) {
    if (!semantic.is_array() || semantic.empty())
        throw ParseError(ParseErrorKind::MalformedSemantic, 1, 0,
                         "semantic must be a non-empty list");
    Program program;
    int entry_no = 0;
    for (const Json& entry : semantic) {
        ++entry_no;
        if (!entry.is_object() || !entry.contains("operation"))
            throw ParseError(ParseErrorKind::MalformedSemantic, entry_no, 0,
                             "entry missing operation: " + entry.dump());
        FunctionCall call;
        call.index = static_cast<int>(program.functions.size());
        parse_head(trim(entry["operation"].get<std::string>()), entry_no, &call);
        if (entry.contains("argument") && entry["argument"].is_string()) {
            for (const std::string& piece : split_commas(entry["argument"].get<std::string>())) {
                const std::string cleaned = strip_annotation(piece);
                if (cleaned.empty()) continue;
                if (cleaned == "(s)") {
                    call.direction = RelateDirection::Subject;
                } else if (cleaned == "(o)") {
                    call.direction = RelateDirection::Object;
                } else {
                    call.arguments.push_back(cleaned);
                }
            }
        }
        if (entry.contains("dependencies")) {
            if (!entry["dependencies"].is_array())
                throw ParseError(ParseErrorKind::MalformedSemantic, entry_no, 0,
                                 "dependencies must be a list: " + entry.dump());
            for (const Json& d : entry["dependencies"]) call.dependencies.push_back(d.get<int>());
        }
        check_arity(call, catalog.resolve(call), entry_no);
        program.functions.push_back(std::move(call));
    }
    return program;
}

Json program_to_json(const Program& program) {
    Json out = Json::array();
    for (const FunctionCall& f : program.functions) {
        Json j;
        j["op"] = f.operation;
        j["category"] = f.category;
        if (f.negate) j["negate"] = true;
        j["args"] = f.arguments;
        j["deps"] = f.dependencies;
        if (f.operation == "relate")
            j["direction"] = f.direction == RelateDirection::Subject ? "s" : "o";
        out.push_back(std::move(j));
    }
    return out;
}

Program program_from_json(const Json& j, const Catalog& catalog) {
    if (!j.is_array() || j.empty())
        throw ParseError(ParseErrorKind::MalformedSemantic, 1, 0, "program must be a non-empty list");
    Program program;
    int entry_no = 0;
    for (const Json& e : j) {
        ++entry_no;
        FunctionCall call;
        call.index = static_cast<int>(program.functions.size());
        call.operation = lower(e.at("op").get<std::string>());
        call.category = lower(e.value("category", std::string()));
        call.negate = e.value("negate", false);
        call.arguments = e.value("args", std::vector<std::string>());
        call.dependencies = e.value("deps", std::vector<int>());
        if (e.value("direction", std::string("s")) == "o")
            call.direction = RelateDirection::Object;
        check_arity(call, catalog.resolve(call), entry_no);
        program.functions.push_back(std::move(call));
    }
    return program;
}

std::vector<Diagnostic> validate(const Program& program, const Catalog& catalog) {
    std::vector<Diagnostic> out;
    if (program.functions.empty()) {
        out.push_back({-1, "program is empty"});
        return out;
    }
    const int n = static_cast<int>(program.functions.size());
    std::vector<int> consumers(n, 0);
    for (int i = 0; i < n; ++i) {
        const FunctionCall& f = program.functions[i];
        if (f.index != i) {
            out.push_back({i, "index " + std::to_string(f.index) + " out of order"});
            continue;
        }
        const FunctionSignature* sig = catalog.find(f.operation, !f.category.empty());
        if (!sig) {
            out.push_back({i, "unknown operation \"" + f.fine_name() + "\""});
            continue;
        }
        if (f.negate && f.operation != "filter")
            out.push_back({i, "negation is only defined for filter"});
        if (static_cast<int>(f.arguments.size()) != sig->argument_arity)
            out.push_back({i, "expected " + std::to_string(sig->argument_arity) +
                                  " argument(s), got " + std::to_string(f.arguments.size())});
        if (f.dependencies.size() != sig->input_types.size()) {
            out.push_back({i, "expected " + std::to_string(sig->input_types.size()) +
                                  " dependenc(ies), got " + std::to_string(f.dependencies.size())});
            continue;
        }
        for (size_t k = 0; k < f.dependencies.size(); ++k) {
            const int d = f.dependencies[k];
            if (d < 0 || d >= f.index) {
                out.push_back({i, "dependency [" + std::to_string(d) +
                                      "] not an earlier function"});
                continue;
            }
            ++consumers[d];
            const FunctionSignature* dep_sig =
                catalog.find(program.functions[d].operation, !program.functions[d].category.empty());
            if (dep_sig && dep_sig->output_type != sig->input_types[k])
                out.push_back({i, "dependency [" + std::to_string(d) + "] has type " +
                                      value_type_name(dep_sig->output_type) + ", expected " +
                                      value_type_name(sig->input_types[k])});
        }
    }
    for (int i = 0; i + 1 < n; ++i)
        if (consumers[i] == 0)
            out.push_back({i, "output is never consumed"});
    const FunctionCall& sink = program.functions.back();
    if (const FunctionSignature* sig = catalog.find(sink.operation, !sink.category.empty());
        sig && sig->output_type == ValueType::ObjList)
        out.push_back({n - 1, "sink must produce a boolean or string answer"});
    return out;
}

bool is_valid(const Program& program, const Catalog& catalog) {
    return validate(program, catalog).empty();
}

std::vector<FunctionCall> selected_layout(const Program& program, const Catalog& catalog) {
    std::vector<FunctionCall> out;
    for (const FunctionCall& f : program.functions)
        if (catalog.is_object_op(f)) out.push_back(f);
    return out;
}

}  // namespace sgqa
