#pragma once
// Cross-modality encoder over question tokens and object regions: stacked
// single-modality self-attention layers per stream, then cross layers that
// attend across streams in both directions, each sub-layer wrapped in a
// residual connection and layer normalization. A layout driver re-encodes the
// streams once per object-producing program step, narrowing the visible
// region set to the symbolic executor's selections, and reads the answer off
// a sentinel token's final language state.

#include <functional>
#include <string>
#include <vector>

#include "sgqa/autodiff.hpp"
#include "sgqa/executor.hpp"
#include "sgqa/features.hpp"
#include "sgqa/grammar.hpp"
#include "sgqa/program.hpp"

namespace sgqa {

struct EncoderConfig {
    int n_lang = 2;   // language self layers
    int n_cross = 1;  // cross layers
    int n_vis = 1;    // vision self layers
    int dim = 32;
    int heads = 4;
    int ff_dim = 64;
    int feature_dim = 16;  // region feature width fed to the object embedding
    int max_question_tokens = 24;
    double learning_rate = 0.05;
    double momentum = 0.9;
    int batch_size = 16;
    int max_steps = 20000;
    // When set, the encode call paired with a program step sees that step's
    // own output regions instead of the preceding set.
    bool post_selection_view = false;

    static EncoderConfig toy() { return EncoderConfig{}; }
    static EncoderConfig paper_scale();  // 9/5/5 layers
    void check() const;  // throws ConfigError
    Json to_json() const;
    static EncoderConfig from_json(const Json& j);
};

// Question-word vocabulary with the answer sentinel and unknown tokens
// reserved, plus the closed answer set.
struct EncoderVocab {
    static constexpr const char* kSentinel = "<ans>";
    static constexpr const char* kUnk = "<unk>";

    std::vector<std::string> words;    // [0] = <ans>, [1] = <unk>
    std::vector<std::string> answers;  // sorted, unique

    int word_id(const std::string& token) const;    // unk fallback
    int answer_id(const std::string& token) const;  // -1 when absent

    static EncoderVocab build(const std::vector<std::vector<std::string>>& questions,
                              const std::vector<std::string>& answers);
    Json to_json() const;
    static EncoderVocab from_json(const Json& j);

private:
    std::map<std::string, int> word_ids_, answer_ids_;
    void index();
};

using FeatureFn =
    std::function<Eigen::VectorXd(const SceneGraph&, const ObjectId&)>;

struct EncoderSample {
    const SceneGraph* graph = nullptr;
    Program program;
    std::vector<std::string> question;
    std::string answer;
};

struct LayoutStep {
    int step = 0;          // position in the selected layout
    int function_idx = 0;  // index of the program function
    std::vector<ObjectId> object_ids;  // raw executor output for that function
    int encode_call_idx = 0;
    bool fallback = false;  // empty selection, previous set kept
};

struct LayoutTrace {
    std::vector<LayoutStep> steps;
    int encode_calls = 0;
    std::vector<std::string> flags;
};

Json layout_trace_to_jsonl(const LayoutTrace& trace);

struct LayoutResult {
    Eigen::RowVectorXd answer_dist;
    std::string answer;
    LayoutTrace trace;
};

class EncoderModel {
public:
    EncoderModel(EncoderConfig config, EncoderVocab vocab, FeatureFn features,
                 uint64_t seed);

    const EncoderConfig& config() const { return config_; }
    const EncoderVocab& vocab() const { return vocab_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    // h_i = LayerNorm(word + index), sentinel prepended at position 0.
    Var embed_question(Tape& tape, const std::vector<std::string>& tokens) const;
    // v_j = (LayerNorm(W_F r + b_F) + LayerNorm(W_P p + b_P)) / 2 per id.
    Var embed_objects(Tape& tape, const SceneGraph& graph,
                      const std::vector<ObjectId>& ids) const;
    // Self layers per stream first, then the cross stack.
    std::pair<Var, Var> encode_streams(Tape& tape, Var objects, Var language) const;

    struct LayoutOutcome {
        Var logits;  // 1 x answers
        LayoutTrace trace;
    };
    LayoutOutcome run_layout_on_tape(Tape& tape, const Program& program,
                                     const SceneGraph& graph,
                                     const std::vector<std::string>& question,
                                     Policy policy = Policy::Lenient) const;
    LayoutResult run_layout(const Program& program, const SceneGraph& graph,
                            const std::vector<std::string>& question,
                            Policy policy = Policy::Lenient) const;

    Var sample_loss(Tape& tape, const EncoderSample& sample,
                    Policy policy = Policy::Lenient) const;
    TrainReport train(const std::vector<EncoderSample>& samples, uint64_t seed,
                      int steps, int start_step = 0);
    double grad_check(const EncoderSample& sample, double epsilon = 1e-5);

private:
    Var layer_norm(Tape& tape, Var x, const std::string& prefix) const;
    Var attention(Tape& tape, Var queries, Var keys_values,
                  const std::string& prefix) const;
    Var attention_sublayer(Tape& tape, Var x, Var context,
                           const std::string& prefix) const;
    Var ff_sublayer(Tape& tape, Var x, const std::string& prefix) const;

    EncoderConfig config_;
    EncoderVocab vocab_;
    FeatureFn features_;
    mutable ParamStore params_;
};

}  // namespace sgqa
