#pragma once
// Question-to-program parser: a bidirectional LSTM encoder over the word
// sequence and a two-headed decoder LSTM that emits one (operation, argument)
// token pair per step, attending over encoder states with a fixed-identity
// attention bilinear form. Dependencies are reconstructed from the emitted
// sequence by a most-recent-compatible chaining rule.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sgqa/autodiff.hpp"
#include "sgqa/grammar.hpp"
#include "sgqa/program.hpp"

namespace sgqa {

struct ParserConfig {
    int word_dim = 300;
    int hidden_dim = 256;  // per direction; encoder states and q_t are 2x this
    int layers = 2;        // both encoder and decoder
    double learning_rate = 7e-4;
    double momentum = 0.0;
    int batch_size = 64;
    int max_steps = 20000;
    int max_question_tokens = 24;
    int max_functions = 16;  // greedy decode budget

    static ParserConfig toy();
    void check() const;  // throws ConfigError
    Json to_json() const;
    static ParserConfig from_json(const Json& j);
};

// Word vocabulary plus the two output vocabularies. Operation tokens are the
// fine-grained names ("filter color", "filter not(color)", relate with a
// trailing " (o)" marker for object direction); argument tokens are whole
// comma-joined argument strings ("red, blue"), one per step.
struct ParserVocab {
    static constexpr const char* kUnk = "<unk>";
    static constexpr const char* kStart = "<start>";
    static constexpr const char* kEnd = "<end>";

    std::vector<std::string> words;  // [0] = <unk>
    std::vector<std::string> ops;    // [0] = <start>, [1] = <end>
    std::vector<std::string> args;   // [0] = <start>, [1] = <end>

    int word_id(const std::string& token) const;  // unk fallback
    int op_id(const std::string& token) const;    // -1 when absent
    int arg_id(const std::string& token) const;   // -1 when absent

    static std::string op_token(const FunctionCall& call);
    static std::string arg_token(const FunctionCall& call);

    static ParserVocab build(const std::vector<QAPair>& pairs);
    Json to_json() const;
    static ParserVocab from_json(const Json& j);

private:
    std::map<std::string, int> word_ids_, op_ids_, arg_ids_;
    void index();
};

struct ParserEval {
    double op_accuracy = 0.0;
    double arg_accuracy = 0.0;
    double function_accuracy = 0.0;  // both tokens right at the position
    int pairs = 0;
};

// Decoded token sequences before program reconstruction; scoring works on
// these even when the sequence does not assemble into a valid program.
struct DecodedTokens {
    std::vector<std::string> ops;
    std::vector<std::string> args;
};

class ParserModel {
public:
    ParserModel(ParserConfig config, ParserVocab vocab, uint64_t seed);

    const ParserConfig& config() const { return config_; }
    const ParserVocab& vocab() const { return vocab_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    // Teacher-forced summed cross entropy of both heads over one pair.
    Var sample_loss(Tape& tape, const QAPair& pair) const;

    // Minibatch SGD from step start_step for `steps` steps; batches are drawn
    // by a per-step stateless generator, so resuming at step k reproduces the
    // uninterrupted run exactly. Throws NonFiniteLoss.
    TrainReport train(const std::vector<QAPair>& pairs, uint64_t seed, int steps,
                      int start_step = 0);

    DecodedTokens predict_tokens(const std::vector<std::string>& question) const;
    // Greedy decode plus dependency chaining; throws ParseFailure when the
    // sequence does not assemble into a valid program.
    Program predict_program(const std::vector<std::string>& question) const;

    // Max relative error of analytic vs central-difference gradients over
    // every parameter block, on this pair's loss.
    double grad_check(const QAPair& pair, double epsilon = 1e-5);

private:
    struct Encoded {
        Var states;  // L x 2H, one row per token
    };
    Encoded encode(Tape& tape, const std::vector<int>& token_ids) const;
    Var decoder_input(Tape& tape, int prev_op, int prev_arg) const;

    ParserConfig config_;
    ParserVocab vocab_;
    mutable ParamStore params_;
};

ParserEval evaluate_parser(const ParserModel& model, const std::vector<QAPair>& pairs);

// Dependency reconstruction used by predict_program: a pure function of the
// token sequences. Throws ParseFailure.
Program assemble_program(const DecodedTokens& tokens, const Catalog& catalog);

}  // namespace sgqa
