#pragma once
// Template grammar producing (question, program, answer) triples over scene
// graphs. Every emitted pair is validated and strictly executed against its
// generating graph, so gold answers are exact by construction. The corpus is
// split 80/10/10 with graph ids disjoint across splits.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sgqa/executor.hpp"
#include "sgqa/program.hpp"
#include "sgqa/scene_graph.hpp"

namespace sgqa {

inline constexpr int kMaxQuestionTokens = 24;

std::vector<std::string> tokenize(const std::string& text);

struct QAPair {
    std::vector<std::string> question;
    Program program;
    std::string answer;
    std::string graph_id;

    std::string question_text() const;
};

Json qa_to_json(const QAPair& pair);
QAPair qa_from_json(const Json& j, const Catalog& catalog);

class QuestionGrammar {
public:
    struct Draft {
        std::vector<std::string> question;
        Program program;
    };
    // Proposes a draft for one graph, or nullopt when the graph cannot host
    // this template (missing classes, no usable edge, ...).
    using TemplateFn =
        std::function<std::optional<Draft>(Rng&, const SceneGraph&, const Ontology&)>;
    struct Template {
        std::string name;
        TemplateFn instantiate;
    };

    // The built-in template set covering all twelve catalog operations.
    static QuestionGrammar default_grammar();

    void add(Template t) { templates_.push_back(std::move(t)); }
    const std::vector<Template>& templates() const { return templates_; }

private:
    std::vector<Template> templates_;
};

struct Corpus {
    std::vector<QAPair> train;
    std::vector<QAPair> val;
    std::vector<QAPair> test;

    size_t size() const { return train.size() + val.size() + test.size(); }
};

// Draws templates and graphs at random, keeps only drafts whose programs
// validate and execute strictly without flags, and records the executed
// answer. Deterministic by seed. Throws EmptyInput on an empty graph list,
// ConfigError when a split's quota has no graphs to draw from, and
// ExhaustedTemplates when no template instantiates after bounded retries.
Corpus generate_corpus(const QuestionGrammar& grammar,
                       const std::vector<SceneGraph>& graphs, int n,
                       uint64_t seed, const Ontology& ontology,
                       const Catalog& catalog);

}  // namespace sgqa
