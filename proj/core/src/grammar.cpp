#include "sgqa/grammar.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace sgqa {
namespace {

FunctionCall fc(int index, std::string op, std::string category,
                std::vector<std::string> args, std::vector<int> deps,
                bool negate = false,
                RelateDirection direction = RelateDirection::Subject) {
    FunctionCall call;
    call.index = index;
    call.operation = std::move(op);
    call.category = std::move(category);
    call.negate = negate;
    call.arguments = std::move(args);
    call.dependencies = std::move(deps);
    call.direction = direction;
    return call;
}

using Draft = QuestionGrammar::Draft;

Draft draft(const std::string& text, std::vector<FunctionCall> calls) {
    Draft d;
    d.question = tokenize(text);
    d.program.functions = std::move(calls);
    return d;
}

std::vector<std::string> present_classes(const SceneGraph& graph) {
    std::set<std::string> seen;
    for (const auto& [id, obj] : graph.objects) seen.insert(obj.class_name);
    return {seen.begin(), seen.end()};
}

// Two distinct classes that both occur in the graph.
std::optional<std::pair<std::string, std::string>> pick_class_pair(
    Rng& rng, const SceneGraph& graph) {
    auto classes = present_classes(graph);
    if (classes.size() < 2) return std::nullopt;
    rng.shuffle(classes);
    return std::make_pair(classes[0], classes[1]);
}

// Present half the time, otherwise any ontology class: keeps yes/no answers
// balanced for existence questions.
std::string pick_class(Rng& rng, const SceneGraph& graph, const Ontology& ontology) {
    if (rng.uniform() < 0.5) {
        auto classes = present_classes(graph);
        if (!classes.empty()) return classes[rng.uniform_index(classes.size())];
    }
    std::vector<std::string> all(ontology.classes.begin(), ontology.classes.end());
    return all[rng.uniform_index(all.size())];
}

const SceneObject* pick_object(Rng& rng, const SceneGraph& graph) {
    const auto ids = graph.object_ids();
    if (ids.empty()) return nullptr;
    return graph.find(ids[rng.uniform_index(ids.size())]);
}

// First object of the class in id order: the one query/verify/choose answer
// about when several share the class.
const SceneObject* head_of_class(const SceneGraph& graph, const std::string& cls) {
    for (const auto& [id, obj] : graph.objects)
        if (obj.class_name == cls) return &obj;
    return nullptr;
}

std::string pick_value(Rng& rng, const Ontology& ontology, const std::string& category) {
    const auto& values = ontology.attribute_categories.at(category);
    std::vector<std::string> all(values.begin(), values.end());
    return all[rng.uniform_index(all.size())];
}

std::vector<std::string> graph_relations(const SceneGraph& graph) {
    std::set<std::string> seen;
    for (const auto& edge : graph.edges) seen.insert(edge.relation_name);
    return {seen.begin(), seen.end()};
}

QuestionGrammar::Template exist_class_template() {
    return {"exist_class", [](Rng& rng, const SceneGraph& graph, const Ontology& ont)
                -> std::optional<Draft> {
                const std::string cls = pick_class(rng, graph, ont);
                return draft("is there a " + cls + " ?",
                             {fc(0, "select", "", {cls}, {}),
                              fc(1, "exist", "", {}, {0})});
            }};
}

QuestionGrammar::Template exist_color_class_template() {
    return {"exist_color_class",
            [](Rng& rng, const SceneGraph& graph, const Ontology& ont)
                -> std::optional<Draft> {
                std::string cls, color;
                const SceneObject* obj = pick_object(rng, graph);
                if (obj != nullptr && obj->attributes.count("color") > 0 &&
                    rng.uniform() < 0.5) {
                    cls = obj->class_name;
                    color = obj->attributes.at("color");
                } else {
                    cls = pick_class(rng, graph, ont);
                    color = pick_value(rng, ont, "color");
                }
                return draft("is there a " + color + " " + cls + " ?",
                             {fc(0, "select", "", {cls}, {}),
                              fc(1, "filter", "color", {color}, {0}),
                              fc(2, "exist", "", {}, {1})});
            }};
}

QuestionGrammar::Template exist_not_color_template() {
    return {"exist_not_color",
            [](Rng& rng, const SceneGraph& graph, const Ontology& ont)
                -> std::optional<Draft> {
                const std::string cls = pick_class(rng, graph, ont);
                const std::string color = pick_value(rng, ont, "color");
                return draft(
                    "is there a " + cls + " that is not " + color + " ?",
                    {fc(0, "select", "", {cls}, {}),
                     fc(1, "filter", "color", {color}, {0}, /*negate=*/true),
                     fc(2, "exist", "", {}, {1})});
            }};
}

QuestionGrammar::Template query_template(const std::string& category,
                                         const std::string& wording) {
    return {"query_" + category,
            [category, wording](Rng& rng, const SceneGraph& graph, const Ontology&)
                -> std::optional<Draft> {
                auto classes = present_classes(graph);
                if (classes.empty()) return std::nullopt;
                const std::string cls = classes[rng.uniform_index(classes.size())];
                const SceneObject* head = head_of_class(graph, cls);
                if (head->attributes.count(category) == 0) return std::nullopt;
                return draft("what " + wording + " is the " + cls + " ?",
                             {fc(0, "select", "", {cls}, {}),
                              fc(1, "query", category, {}, {0})});
            }};
}

QuestionGrammar::Template verify_template(const std::string& category,
                                          const std::string& wording) {
    return {"verify_" + category,
            [category, wording](Rng& rng, const SceneGraph& graph, const Ontology& ont)
                -> std::optional<Draft> {
                auto classes = present_classes(graph);
                if (classes.empty()) return std::nullopt;
                const std::string cls = classes[rng.uniform_index(classes.size())];
                const SceneObject* head = head_of_class(graph, cls);
                std::string value;
                if (head->attributes.count(category) > 0 && rng.uniform() < 0.5) {
                    value = head->attributes.at(category);
                } else {
                    value = pick_value(rng, ont, category);
                }
                const std::string article = wording.empty() ? "" : wording + " ";
                return draft("is the " + cls + " " + article + value + " ?",
                             {fc(0, "select", "", {cls}, {}),
                              fc(1, "verify", category, {value}, {0})});
            }};
}

QuestionGrammar::Template choose_color_template() {
    return {"choose_color",
            [](Rng& rng, const SceneGraph& graph, const Ontology& ont)
                -> std::optional<Draft> {
                auto classes = present_classes(graph);
                if (classes.empty()) return std::nullopt;
                const std::string cls = classes[rng.uniform_index(classes.size())];
                const SceneObject* head = head_of_class(graph, cls);
                if (head->attributes.count("color") == 0) return std::nullopt;
                const std::string actual = head->attributes.at("color");
                std::string other = pick_value(rng, ont, "color");
                if (other == actual) return std::nullopt;
                std::string first = actual, second = other;
                if (rng.uniform() < 0.5) std::swap(first, second);
                return draft(
                    "is the " + cls + " " + first + " or " + second + " ?",
                    {fc(0, "select", "", {cls}, {}),
                     fc(1, "choose", "color", {first, second}, {0})});
            }};
}

QuestionGrammar::Template relate_query_name_template() {
    return {"relate_query_name",
            [](Rng& rng, const SceneGraph& graph, const Ontology&)
                -> std::optional<Draft> {
                if (graph.edges.empty()) return std::nullopt;
                const RelationEdge& edge =
                    graph.edges[rng.uniform_index(graph.edges.size())];
                const std::string anchor_cls = graph.at(edge.object_id).class_name;
                return draft(
                    "what is " + edge.relation_name + " the " + anchor_cls + " ?",
                    {fc(0, "select", "", {anchor_cls}, {}),
                     fc(1, "relate", "", {"_", edge.relation_name}, {0}),
                     fc(2, "query", "name", {}, {1})});
            }};
}

QuestionGrammar::Template relate_exist_template() {
    return {"relate_exist",
            [](Rng& rng, const SceneGraph& graph, const Ontology& ont)
                -> std::optional<Draft> {
                if (graph.edges.empty()) return std::nullopt;
                const RelationEdge& edge =
                    graph.edges[rng.uniform_index(graph.edges.size())];
                std::string cls1, rel, cls2;
                if (rng.uniform() < 0.5) {
                    cls1 = graph.at(edge.subject_id).class_name;
                    rel = edge.relation_name;
                    cls2 = graph.at(edge.object_id).class_name;
                } else {
                    cls1 = pick_class(rng, graph, ont);
                    const auto rels = graph_relations(graph);
                    rel = rels[rng.uniform_index(rels.size())];
                    auto classes = present_classes(graph);
                    cls2 = classes[rng.uniform_index(classes.size())];
                }
                return draft(
                    "is there a " + cls1 + " " + rel + " the " + cls2 + " ?",
                    {fc(0, "select", "", {cls2}, {}),
                     fc(1, "relate", "", {cls1, rel}, {0}),
                     fc(2, "exist", "", {}, {1})});
            }};
}

QuestionGrammar::Template pair_template(const std::string& name,
                                        const std::string& op,
                                        const std::string& category,
                                        const std::string& pattern) {
    // pattern contains <1> and <2> placeholders for the two class names.
    return {name,
            [op, category, pattern](Rng& rng, const SceneGraph& graph, const Ontology&)
                -> std::optional<Draft> {
                const auto pair = pick_class_pair(rng, graph);
                if (!pair) return std::nullopt;
                std::string text = pattern;
                text.replace(text.find("<1>"), 3, pair->first);
                text.replace(text.find("<2>"), 3, pair->second);
                return draft(text, {fc(0, "select", "", {pair->first}, {}),
                                    fc(1, "select", "", {pair->second}, {}),
                                    fc(2, op, category, {}, {0, 1})});
            }};
}

QuestionGrammar::Template connective_template(const std::string& op) {
    return {op + "_exists",
            [op](Rng& rng, const SceneGraph& graph, const Ontology& ont)
                -> std::optional<Draft> {
                const std::string cls1 = pick_class(rng, graph, ont);
                const std::string cls2 = pick_class(rng, graph, ont);
                if (cls1 == cls2) return std::nullopt;
                return draft(
                    "is there a " + cls1 + " " + op + " a " + cls2 + " ?",
                    {fc(0, "select", "", {cls1}, {}),
                     fc(1, "exist", "", {}, {0}),
                     fc(2, "select", "", {cls2}, {}),
                     fc(3, "exist", "", {}, {2}),
                     fc(4, op, "", {}, {1, 3})});
            }};
}

QuestionGrammar::Template position_query_template(const std::string& category,
                                                  std::vector<std::string> values,
                                                  const std::string& preposition) {
    return {category + "_query",
            [category, values, preposition](Rng& rng, const SceneGraph& graph,
                                            const Ontology&) -> std::optional<Draft> {
                if (graph.objects.empty()) return std::nullopt;
                const std::string value = values[rng.uniform_index(values.size())];
                return draft("what is " + preposition + " the " + value + " ?",
                             {fc(0, "select", "", {"_"}, {}),
                              fc(1, "filter", category, {value}, {0}),
                              fc(2, "query", "name", {}, {1})});
            }};
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::istringstream in(text);
    std::string token;
    while (in >> token) tokens.push_back(token);
    return tokens;
}

std::string QAPair::question_text() const {
    std::string text;
    for (size_t i = 0; i < question.size(); ++i) {
        if (i > 0) text += ' ';
        text += question[i];
    }
    return text;
}

Json qa_to_json(const QAPair& pair) {
    Json j;
    j["question"] = pair.question_text();
    j["program"] = program_to_json(pair.program);
    j["answer"] = pair.answer;
    j["graph_id"] = pair.graph_id;
    return j;
}

QAPair qa_from_json(const Json& j, const Catalog& catalog) {
    if (!j.is_object() || !j.contains("question") || !j.contains("program") ||
        !j.contains("answer") || !j.contains("graph_id"))
        throw MalformedDocument("corpus record missing a required field");
    QAPair pair;
    pair.question = tokenize(j.at("question").get<std::string>());
    pair.program = program_from_json(j.at("program"), catalog);
    pair.answer = j.at("answer").get<std::string>();
    pair.graph_id = j.at("graph_id").get<std::string>();
    return pair;
}

QuestionGrammar QuestionGrammar::default_grammar() {
    QuestionGrammar g;
    g.add(exist_class_template());
    g.add(exist_color_class_template());
    g.add(exist_not_color_template());
    g.add(query_template("color", "color"));
    g.add(query_template("material", "material"));
    g.add(query_template("size", "size"));
    g.add(query_template("shape", "shape"));
    g.add(verify_template("color", ""));
    g.add(verify_template("size", ""));
    g.add(choose_color_template());
    g.add(relate_query_name_template());
    g.add(relate_exist_template());
    g.add(pair_template("same_color", "same", "color",
                        "do the <1> and the <2> have the same color ?"));
    g.add(pair_template("different_color", "different", "color",
                        "do the <1> and the <2> have different colors ?"));
    g.add(pair_template("common_pair", "common", "",
                        "what do the <1> and the <2> have in common ?"));
    g.add(connective_template("or"));
    g.add(connective_template("and"));
    g.add(position_query_template(kCatHPosition, {"left", "right"}, "on"));
    g.add(position_query_template(kCatVPosition, {"top", "bottom"}, "at"));
    return g;
}

Corpus generate_corpus(const QuestionGrammar& grammar,
                       const std::vector<SceneGraph>& graphs, int n,
                       uint64_t seed, const Ontology& ontology,
                       const Catalog& catalog) {
    if (graphs.empty()) throw EmptyInput("generate_corpus needs at least one graph");
    if (n <= 0) throw ConfigError("corpus size must be positive");
    if (grammar.templates().empty()) throw ConfigError("grammar has no templates");

    std::vector<size_t> order(graphs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng split_rng(derive_seed(seed, "corpus-split"));
    split_rng.shuffle(order);
    const size_t n_graphs = graphs.size();
    const size_t train_graphs = (n_graphs * 8 + 5) / 10;
    const size_t val_graphs = std::min(n_graphs - train_graphs, (n_graphs + 5) / 10);

    struct SplitPlan {
        const char* name;
        std::vector<size_t> pool;
        int quota = 0;
    };
    SplitPlan plans[3] = {{"train", {}, n * 8 / 10}, {"val", {}, n / 10}, {"test", {}, 0}};
    plans[2].quota = n - plans[0].quota - plans[1].quota;
    for (size_t i = 0; i < n_graphs; ++i) {
        const size_t which = i < train_graphs ? 0 : (i < train_graphs + val_graphs ? 1 : 2);
        plans[which].pool.push_back(order[i]);
    }

    constexpr int kMaxAttemptsPerPair = 1000;
    Corpus corpus;
    for (auto& plan : plans) {
        if (plan.quota == 0) continue;
        if (plan.pool.empty())
            throw ConfigError(std::string("no graphs left for the ") + plan.name +
                              " split; provide more graphs");
        Rng rng(derive_seed(seed, std::string("corpus-") + plan.name));
        std::vector<QAPair>& out = plan.name == std::string("train")
                                       ? corpus.train
                                       : (plan.name == std::string("val") ? corpus.val
                                                                          : corpus.test);
        for (int k = 0; k < plan.quota; ++k) {
            bool placed = false;
            for (int attempt = 0; attempt < kMaxAttemptsPerPair; ++attempt) {
                const auto& tpl =
                    grammar.templates()[rng.uniform_index(grammar.templates().size())];
                const SceneGraph& graph = graphs[plan.pool[rng.uniform_index(plan.pool.size())]];
                auto d = tpl.instantiate(rng, graph, ontology);
                if (!d) continue;
                if (d->question.empty() ||
                    d->question.size() > static_cast<size_t>(kMaxQuestionTokens))
                    continue;
                if (!is_valid(d->program, catalog)) continue;
                const ExecResult result =
                    execute(d->program, graph, catalog, Policy::Strict);
                if (!result.ok() || !result.trace->flags.empty()) continue;
                QAPair pair;
                pair.question = std::move(d->question);
                pair.program = std::move(d->program);
                pair.answer = answer_of(*result.trace);
                pair.graph_id = graph.image_id;
                out.push_back(std::move(pair));
                placed = true;
                break;
            }
            if (!placed)
                throw ExhaustedTemplates("no template produced a valid question after " +
                                         std::to_string(kMaxAttemptsPerPair) +
                                         " attempts in the " + plan.name + " split");
        }
    }
    return corpus;
}

}  // namespace sgqa
