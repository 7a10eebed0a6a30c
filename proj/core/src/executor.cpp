#include "sgqa/executor.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "sgqa/errors.hpp"

namespace sgqa {
namespace {

// Attribute lookup unified over stored attributes and geometric position
// pseudo-categories. Empty optional: category absent on this object.
std::optional<std::string> attribute_value(const SceneGraph& graph, const ObjectId& id,
                                           const std::string& category) {
    const SceneObject& obj = graph.at(id);
    if (is_position_category(category)) return position_value(obj.box, category);
    const auto it = obj.attributes.find(category);
    if (it == obj.attributes.end()) return std::nullopt;
    return it->second;
}

bool has_value(const SceneGraph& graph, const ObjectId& id, const std::string& category,
               const std::string& value) {
    const auto v = attribute_value(graph, id, category);
    return v.has_value() && *v == value;
}

std::vector<ObjectId> objects_of_class(const SceneGraph& graph, const std::string& name) {
    std::vector<ObjectId> out;
    for (const auto& [id, obj] : graph.objects)
        if (name == "scene" || name == "_" || obj.class_name == name) out.push_back(id);
    return out;
}

std::set<std::string> graph_relations(const SceneGraph& graph) {
    std::set<std::string> out;
    for (const RelationEdge& e : graph.edges) out.insert(e.relation_name);
    return out;
}

ExecError err(ExecErrorKind kind, const FunctionCall& call, std::string message) {
    return {kind, call.index, std::move(message)};
}

using ApplyResult = std::variant<Value, ExecError>;

ApplyResult apply_select(const FunctionCall& call, const SceneGraph& graph) {
    return Value::objects(objects_of_class(graph, call.arguments[0]));
}

ApplyResult apply_filter(const FunctionCall& call, const std::vector<Value>& inputs,
                         const SceneGraph& graph) {
    std::vector<ObjectId> out;
    for (const ObjectId& id : inputs[0].as_objects()) {
        const bool match = has_value(graph, id, call.category, call.arguments[0]);
        if (match != call.negate) out.push_back(id);
    }
    return Value::objects(std::move(out));
}

ApplyResult apply_relate(const FunctionCall& call, const std::vector<Value>& inputs,
                         const SceneGraph& graph) {
    const std::string& name = call.arguments[0];
    const std::string& relation = call.arguments[1];
    if (!graph_relations(graph).count(relation))
        return err(ExecErrorKind::UnknownRelation, call,
                   "relation \"" + relation + "\" appears in no edge");
    const std::set<ObjectId> anchors(inputs[0].as_objects().begin(),
                                     inputs[0].as_objects().end());
    std::set<ObjectId> candidates;
    for (const RelationEdge& e : graph.edges) {
        if (e.relation_name != relation) continue;
        if (call.direction == RelateDirection::Subject) {
            if (anchors.count(e.object_id)) candidates.insert(e.subject_id);
        } else {
            if (anchors.count(e.subject_id)) candidates.insert(e.object_id);
        }
    }
    std::vector<ObjectId> out;
    for (const ObjectId& id : candidates) {
        const SceneObject& obj = graph.at(id);
        if (name == "_" || obj.class_name == name) out.push_back(id);
    }
    return Value::objects(std::move(out));
}

ApplyResult apply_verify(const FunctionCall& call, const std::vector<Value>& inputs,
                         const SceneGraph& graph) {
    const auto& objs = inputs[0].as_objects();
    if (objs.empty())
        return err(ExecErrorKind::EmptyReference, call, "verify over an empty object list");
    bool all = true;
    for (const ObjectId& id : objs) all = all && has_value(graph, id, call.category, call.arguments[0]);
    return Value::boolean(all);
}

ApplyResult apply_query(const FunctionCall& call, const std::vector<Value>& inputs,
                        const SceneGraph& graph) {
    const auto& objs = inputs[0].as_objects();
    if (objs.empty())
        return err(ExecErrorKind::EmptyReference, call, "query over an empty object list");
    const ObjectId& head = objs.front();
    if (call.category == "name") return Value::str(graph.at(head).class_name);
    const auto v = attribute_value(graph, head, call.category);
    if (!v)
        return err(ExecErrorKind::UnknownAttributeCategory, call,
                   "object " + head + " has no " + call.category + " attribute");
    return Value::str(*v);
}

ApplyResult apply_choose(const FunctionCall& call, const std::vector<Value>& inputs,
                         const SceneGraph& graph) {
    const auto& objs = inputs[0].as_objects();
    if (objs.empty())
        return err(ExecErrorKind::EmptyReference, call, "choose over an empty object list");
    const ObjectId& head = objs.front();
    const auto v = call.category == "name"
                       ? std::optional<std::string>(graph.at(head).class_name)
                       : attribute_value(graph, head, call.category);
    if (!v)
        return err(ExecErrorKind::UnknownAttributeCategory, call,
                   "object " + head + " has no " + call.category + " attribute");
    if (*v == call.arguments[0]) return Value::str(call.arguments[0]);
    if (*v == call.arguments[1]) return Value::str(call.arguments[1]);
    return err(ExecErrorKind::EmptyReference, call,
               "head object's " + call.category + " (" + *v + ") matches neither option");
}

ApplyResult apply_same(const FunctionCall& call, const std::vector<Value>& inputs,
                       const SceneGraph& graph, bool negated) {
    const auto& a = inputs[0].as_objects();
    const auto& b = inputs[1].as_objects();
    if (a.empty() || b.empty())
        return err(ExecErrorKind::EmptyReference, call, "comparison over an empty object list");
    std::optional<std::string> shared;
    bool all_same = true;
    for (const auto* list : {&a, &b}) {
        for (const ObjectId& id : *list) {
            const auto v = call.category == "name"
                               ? std::optional<std::string>(graph.at(id).class_name)
                               : attribute_value(graph, id, call.category);
            if (!v) {
                all_same = false;
            } else if (!shared) {
                shared = *v;
            } else if (*shared != *v) {
                all_same = false;
            }
        }
    }
    return Value::boolean(negated ? !all_same : all_same);
}

ApplyResult apply_common(const FunctionCall& call, const std::vector<Value>& inputs,
                         const SceneGraph& graph) {
    const auto& a = inputs[0].as_objects();
    const auto& b = inputs[1].as_objects();
    if (a.empty() || b.empty())
        return err(ExecErrorKind::EmptyReference, call, "common over an empty object list");
    // Candidate categories are the stored attribute categories only; the
    // geometric position pseudo-categories are excluded so answers stay in
    // the annotated-attribute vocabulary.
    std::set<std::string> categories;
    std::vector<ObjectId> all;
    all.insert(all.end(), a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    for (const ObjectId& id : all)
        for (const auto& [cat, value] : graph.at(id).attributes) categories.insert(cat);
    for (const std::string& cat : categories) {  // set order: lexicographic tie-break
        std::optional<std::string> shared;
        bool agree = true;
        for (const ObjectId& id : all) {
            const auto it = graph.at(id).attributes.find(cat);
            if (it == graph.at(id).attributes.end()) {
                agree = false;
                break;
            }
            if (!shared) shared = it->second;
            else if (*shared != it->second) agree = false;
        }
        if (agree) return Value::str(cat);
    }
    return err(ExecErrorKind::UnknownAttributeCategory, call,
               "the object lists share no attribute category value");
}

}  // namespace

const char* exec_error_kind_name(ExecErrorKind kind) {
    switch (kind) {
        case ExecErrorKind::EmptyReference: return "empty_reference";
        case ExecErrorKind::UnknownAttributeCategory: return "unknown_attribute_category";
        case ExecErrorKind::UnknownRelation: return "unknown_relation";
        case ExecErrorKind::TypeMismatch: return "type_mismatch";
    }
    return "?";
}

std::variant<Value, ExecError> apply_function(const FunctionCall& call,
                                              const std::vector<Value>& inputs,
                                              const SceneGraph& graph) {
    const std::string& op = call.operation;
    if (op == "select") return apply_select(call, graph);
    if (op == "filter") return apply_filter(call, inputs, graph);
    if (op == "relate") return apply_relate(call, inputs, graph);
    if (op == "verify") return apply_verify(call, inputs, graph);
    if (op == "query") return apply_query(call, inputs, graph);
    if (op == "exist") return Value::boolean(!inputs[0].as_objects().empty());
    if (op == "and") return Value::boolean(inputs[0].as_bool() && inputs[1].as_bool());
    if (op == "or") return Value::boolean(inputs[0].as_bool() || inputs[1].as_bool());
    if (op == "choose") return apply_choose(call, inputs, graph);
    if (op == "same") return apply_same(call, inputs, graph, false);
    if (op == "different") return apply_same(call, inputs, graph, true);
    if (op == "common") return apply_common(call, inputs, graph);
    return ExecError{ExecErrorKind::TypeMismatch, call.index, "no semantics for \"" + op + "\""};
}

ExecResult execute(const Program& program, const SceneGraph& graph, const Catalog& catalog,
                   Policy policy) {
    if (const auto diags = validate(program, catalog); !diags.empty())
        throw TypeMismatch("execute requires a validated program: " + diags.front().message);

    Trace trace;
    const int n = static_cast<int>(program.functions.size());
    for (int i = 0; i < n; ++i) {
        const FunctionCall& call = program.functions[i];
        StepRecord step;
        step.index = i;
        step.fine_name = call.fine_name();
        step.arguments = call.arguments;
        step.dependencies = call.dependencies;
        for (int d : call.dependencies) step.inputs.push_back(trace.steps[d].output);

        auto result = apply_function(call, step.inputs, graph);
        if (std::holds_alternative<ExecError>(result)) {
            ExecError error = std::get<ExecError>(std::move(result));
            if (policy == Policy::Strict || error.kind == ExecErrorKind::TypeMismatch)
                return {std::nullopt, std::move(error)};
            // Lenient recovery: boolean checks fail closed, string answers
            // fall back to "unknown", object lists go empty.
            const ValueType out = catalog.classify(call);
            switch (out) {
                case ValueType::Boolean: result = Value::boolean(false); break;
                case ValueType::String: result = Value::str("unknown"); break;
                case ValueType::ObjList: result = Value::objects({}); break;
            }
            trace.flags.push_back("step " + std::to_string(i) + ": " +
                                  exec_error_kind_name(error.kind) + " (" + error.message + ")");
        }
        step.output = std::get<Value>(std::move(result));

        if (step.output.is_objects()) {
            for (const ObjectId& id : step.output.as_objects())
                step.attention.push_back({id, graph.at(id).box});
        } else {
            // Most recent object-list ancestor: highest-index transitive
            // dependency whose output is an object list.
            std::vector<int> stack(call.dependencies.begin(), call.dependencies.end());
            std::set<int> seen(stack.begin(), stack.end());
            int best = -1;
            while (!stack.empty()) {
                const int d = stack.back();
                stack.pop_back();
                if (trace.steps[d].output.is_objects()) best = std::max(best, d);
                for (int dd : program.functions[d].dependencies)
                    if (seen.insert(dd).second) stack.push_back(dd);
            }
            if (best >= 0) step.attention = trace.steps[best].attention;
        }
        trace.steps.push_back(std::move(step));
    }
    trace.final = trace.steps.back().output;
    return {std::move(trace), std::nullopt};
}

std::string answer_of(const Trace& trace) {
    if (trace.final.is_bool()) return trace.final.as_bool() ? "yes" : "no";
    if (trace.final.is_str()) return trace.final.as_str();
    throw TypeMismatch("final value is an object list, not an answer");
}

namespace {

Json value_to_json(const Value& v) {
    if (v.is_objects()) return Json(v.as_objects());
    if (v.is_bool()) return Json(v.as_bool());
    return Json(v.as_str());
}

}  // namespace

std::string trace_to_jsonl(const Trace& trace) {
    std::string out;
    for (const StepRecord& step : trace.steps) {
        Json j;
        j["idx"] = step.index;
        j["op"] = step.fine_name;
        j["args"] = step.arguments;
        j["deps"] = step.dependencies;
        j["out_type"] = value_type_name(step.output.type());
        j["out"] = value_to_json(step.output);
        Json att = Json::array();
        for (const AttendedRegion& r : step.attention)
            att.push_back(Json::array({r.id, r.box.x, r.box.y, r.box.w, r.box.h}));
        j["attention"] = std::move(att);
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string trace_pretty(const Trace& trace) {
    std::ostringstream out;
    for (const StepRecord& step : trace.steps) {
        out << "[" << step.index << "] " << step.fine_name;
        if (!step.arguments.empty()) {
            out << ": ";
            for (size_t k = 0; k < step.arguments.size(); ++k)
                out << (k ? ", " : "") << step.arguments[k];
        }
        for (int d : step.dependencies) out << " <- [" << d << "]";
        out << "\n    = ";
        if (step.output.is_objects()) {
            out << "{";
            const auto& ids = step.output.as_objects();
            for (size_t k = 0; k < ids.size(); ++k) out << (k ? ", " : "") << ids[k];
            out << "}";
        } else if (step.output.is_bool()) {
            out << (step.output.as_bool() ? "yes" : "no");
        } else {
            out << '"' << step.output.as_str() << '"';
        }
        out << "\n    attends ";
        if (step.attention.empty()) {
            out << "(nothing)";
        } else {
            for (size_t k = 0; k < step.attention.size(); ++k) {
                const AttendedRegion& r = step.attention[k];
                out << (k ? ", " : "") << r.id << "@(" << r.box.x << "," << r.box.y << ")";
            }
        }
        out << "\n";
    }
    for (const std::string& f : trace.flags) out << "flag: " << f << "\n";
    return out.str();
}

}  // namespace sgqa
