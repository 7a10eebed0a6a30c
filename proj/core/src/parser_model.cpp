#include "sgqa/parser_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace sgqa {
namespace {

std::string join_args(const std::vector<std::string>& args) {
    std::string out;
    for (size_t i = 0; i < args.size(); ++i) {
        if (i > 0) out += ", ";
        out += args[i];
    }
    return out;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    size_t start = 0;
    while (true) {
        const size_t pos = s.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(trim(s.substr(start)));
            break;
        }
        out.push_back(trim(s.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

struct LstmState {
    Var h;
    Var c;
};

// Gate layout i|f|g|o, each `width` columns; z is 1 x 4*width.
LstmState lstm_cell(Var x, LstmState prev, Var W, Var U, Var b, int width) {
    Var z = add(add(matmul(x, W), matmul(prev.h, U)), b);
    Var i = sigmoid(slice_cols(z, 0, width));
    Var f = sigmoid(slice_cols(z, width, width));
    Var g = tanh_(slice_cols(z, 2 * width, width));
    Var o = sigmoid(slice_cols(z, 3 * width, width));
    Var c = add(mul(f, prev.c), mul(i, g));
    Var h = mul(o, tanh_(c));
    return {h, c};
}

Var sum_losses(const std::vector<Var>& terms) {
    Var total = terms.front();
    for (size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
    return total;
}

}  // namespace

ParserConfig ParserConfig::toy() {
    ParserConfig c;
    c.word_dim = 32;
    c.hidden_dim = 32;
    c.layers = 2;
    c.learning_rate = 0.15;
    c.momentum = 0.9;
    c.batch_size = 32;
    c.max_steps = 20000;
    return c;
}

void ParserConfig::check() const {
    if (word_dim <= 0 || hidden_dim <= 0 || layers <= 0)
        throw ConfigError("parser dims and layer count must be positive");
    if (learning_rate < 0.0 || momentum < 0.0 || momentum >= 1.0)
        throw ConfigError("parser learning rate must be >= 0 and momentum in [0,1)");
    if (batch_size <= 0 || max_steps < 0)
        throw ConfigError("parser batch size must be positive and max steps >= 0");
    if (max_question_tokens <= 0 || max_functions <= 0)
        throw ConfigError("parser sequence budgets must be positive");
}

Json ParserConfig::to_json() const {
    return Json{{"word_dim", word_dim},
                {"hidden_dim", hidden_dim},
                {"layers", layers},
                {"learning_rate", learning_rate},
                {"momentum", momentum},
                {"batch_size", batch_size},
                {"max_steps", max_steps},
                {"max_question_tokens", max_question_tokens},
                {"max_functions", max_functions}};
}

ParserConfig ParserConfig::from_json(const Json& j) {
    ParserConfig c;
    c.word_dim = j.value("word_dim", c.word_dim);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.layers = j.value("layers", c.layers);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum = j.value("momentum", c.momentum);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.max_question_tokens = j.value("max_question_tokens", c.max_question_tokens);
    c.max_functions = j.value("max_functions", c.max_functions);
    c.check();
    return c;
}

int ParserVocab::word_id(const std::string& token) const {
    const auto it = word_ids_.find(token);
    return it == word_ids_.end() ? 0 : it->second;
}

int ParserVocab::op_id(const std::string& token) const {
    const auto it = op_ids_.find(token);
    return it == op_ids_.end() ? -1 : it->second;
}

int ParserVocab::arg_id(const std::string& token) const {
    const auto it = arg_ids_.find(token);
    return it == arg_ids_.end() ? -1 : it->second;
}

std::string ParserVocab::op_token(const FunctionCall& call) {
    std::string token = call.fine_name();
    if (call.operation == "relate" && call.direction == RelateDirection::Object)
        token += " (o)";
    return token;
}

std::string ParserVocab::arg_token(const FunctionCall& call) {
    return join_args(call.arguments);
}

void ParserVocab::index() {
    word_ids_.clear();
    op_ids_.clear();
    arg_ids_.clear();
    for (size_t i = 0; i < words.size(); ++i) word_ids_[words[i]] = static_cast<int>(i);
    for (size_t i = 0; i < ops.size(); ++i) op_ids_[ops[i]] = static_cast<int>(i);
    for (size_t i = 0; i < args.size(); ++i) arg_ids_[args[i]] = static_cast<int>(i);
}

ParserVocab ParserVocab::build(const std::vector<QAPair>& pairs) {
    std::set<std::string> words, ops, args;
    for (const auto& pair : pairs) {
        words.insert(pair.question.begin(), pair.question.end());
        for (const auto& call : pair.program.functions) {
            ops.insert(op_token(call));
            args.insert(arg_token(call));
        }
    }
    ParserVocab v;
    v.words = {kUnk};
    v.words.insert(v.words.end(), words.begin(), words.end());
    v.ops = {kStart, kEnd};
    v.ops.insert(v.ops.end(), ops.begin(), ops.end());
    v.args = {kStart, kEnd};
    v.args.insert(v.args.end(), args.begin(), args.end());
    v.index();
    return v;
}

Json ParserVocab::to_json() const {
    return Json{{"words", words}, {"ops", ops}, {"args", args}};
}

ParserVocab ParserVocab::from_json(const Json& j) {
    ParserVocab v;
    v.words = j.at("words").get<std::vector<std::string>>();
    v.ops = j.at("ops").get<std::vector<std::string>>();
    v.args = j.at("args").get<std::vector<std::string>>();
    if (v.words.empty() || v.words[0] != kUnk)
        throw MalformedDocument("word vocabulary must start with " + std::string(kUnk));
    for (const auto* list : {&v.ops, &v.args})
        if (list->size() < 2 || (*list)[0] != kStart || (*list)[1] != kEnd)
            throw MalformedDocument("output vocabularies must start with the sentinels");
    v.index();
    return v;
}

ParserModel::ParserModel(ParserConfig config, ParserVocab vocab, uint64_t seed)
    : config_(std::move(config)), vocab_(std::move(vocab)) {
    config_.check();
    if (vocab_.words.empty() || vocab_.ops.size() < 3 || vocab_.args.size() < 3)
        throw ConfigError("parser vocabulary is empty");
    const int D = config_.word_dim;
    const int H = config_.hidden_dim;

    params_.create("parser.embed.word", static_cast<int>(vocab_.words.size()), D);
    params_.create("parser.embed.op", static_cast<int>(vocab_.ops.size()), D);
    params_.create("parser.embed.arg", static_cast<int>(vocab_.args.size()), D);
    for (int l = 0; l < config_.layers; ++l) {
        const int in = l == 0 ? D : 2 * H;
        for (const char* dir : {"f", "b"}) {
            const std::string base =
                "parser.enc.l" + std::to_string(l) + "." + dir + ".";
            params_.create(base + "W", in, 4 * H);
            params_.create(base + "U", H, 4 * H);
            params_.create(base + "b", 1, 4 * H);
        }
        const int dec_in = l == 0 ? 2 * D : 2 * H;
        const std::string base = "parser.dec.l" + std::to_string(l) + ".";
        params_.create(base + "W", dec_in, 8 * H);
        params_.create(base + "U", 2 * H, 8 * H);
        params_.create(base + "b", 1, 8 * H);
    }
    params_.create("parser.head.op", 4 * H, static_cast<int>(vocab_.ops.size()));
    params_.create("parser.head.arg", 4 * H, static_cast<int>(vocab_.args.size()));

    Rng rng(derive_seed(seed, "parser-init"));
    for (const auto& name : params_.names()) {
        Mat& m = params_.get(name);
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-0.08, 0.08);
        if (name.size() > 2 && name.compare(name.size() - 2, 2, ".b") == 0) {
            // Forget-gate bias starts at 1 to keep early recurrence stable.
            const int width = static_cast<int>(m.cols()) / 4;
            for (int j = width; j < 2 * width; ++j) m(0, j) = 1.0;
        }
    }
}

ParserModel::Encoded ParserModel::encode(Tape& tape,
                                         const std::vector<int>& token_ids) const {
    if (token_ids.empty()) throw EmptyInput("cannot encode an empty question");
    if (token_ids.size() > static_cast<size_t>(config_.max_question_tokens))
        throw ConfigError("question exceeds the token budget");
    const int H = config_.hidden_dim;
    const int L = static_cast<int>(token_ids.size());

    Var table = tape.param("parser.embed.word", &params_);
    Var embedded = gather_rows(table, token_ids);
    std::vector<Var> inputs;
    inputs.reserve(token_ids.size());
    for (int i = 0; i < L; ++i) inputs.push_back(row(embedded, i));

    for (int l = 0; l < config_.layers; ++l) {
        std::vector<Var> fwd(L), bwd(L);
        for (const char* dir : {"f", "b"}) {
            const std::string base =
                "parser.enc.l" + std::to_string(l) + "." + dir + ".";
            Var W = tape.param(base + "W", &params_);
            Var U = tape.param(base + "U", &params_);
            Var b = tape.param(base + "b", &params_);
            LstmState state{tape.input(Mat::Zero(1, H)), tape.input(Mat::Zero(1, H))};
            const bool forward = dir[0] == 'f';
            for (int k = 0; k < L; ++k) {
                const int i = forward ? k : L - 1 - k;
                state = lstm_cell(inputs[i], state, W, U, b, H);
                (forward ? fwd : bwd)[i] = state.h;
            }
        }
        for (int i = 0; i < L; ++i) inputs[i] = concat_cols(fwd[i], bwd[i]);
    }
    return Encoded{vstack(inputs)};
}

Var ParserModel::decoder_input(Tape& tape, int prev_op, int prev_arg) const {
    Var op_embed = tape.param("parser.embed.op", &params_);
    Var arg_embed = tape.param("parser.embed.arg", &params_);
    return concat_cols(row(op_embed, prev_op), row(arg_embed, prev_arg));
}

Var ParserModel::sample_loss(Tape& tape, const QAPair& pair) const {
    const int H = config_.hidden_dim;
    std::vector<int> token_ids;
    token_ids.reserve(pair.question.size());
    for (const auto& token : pair.question) token_ids.push_back(vocab_.word_id(token));
    const Encoded enc = encode(tape, token_ids);
    Var enc_t = transpose(enc.states);

    const size_t T = pair.program.functions.size();
    if (T + 1 > static_cast<size_t>(config_.max_functions))
        throw ConfigError("program exceeds the decode budget");
    std::vector<int> target_ops, target_args;
    for (const auto& call : pair.program.functions) {
        const int op = vocab_.op_id(ParserVocab::op_token(call));
        const int arg = vocab_.arg_id(ParserVocab::arg_token(call));
        if (op < 0 || arg < 0)
            throw ConfigError("training target outside the vocabulary: " +
                              ParserVocab::op_token(call) + " / " +
                              ParserVocab::arg_token(call));
        target_ops.push_back(op);
        target_args.push_back(arg);
    }
    target_ops.push_back(1);   // <end>
    target_args.push_back(1);  // <end>

    Var head_op = tape.param("parser.head.op", &params_);
    Var head_arg = tape.param("parser.head.arg", &params_);
    std::vector<LstmState> state(config_.layers,
                                 LstmState{tape.input(Mat::Zero(1, 2 * H)),
                                           tape.input(Mat::Zero(1, 2 * H))});
    int prev_op = 0, prev_arg = 0;  // <start>
    std::vector<Var> losses;
    for (size_t t = 0; t < target_ops.size(); ++t) {
        Var x = decoder_input(tape, prev_op, prev_arg);
        for (int l = 0; l < config_.layers; ++l) {
            const std::string base = "parser.dec.l" + std::to_string(l) + ".";
            state[l] = lstm_cell(x, state[l], tape.param(base + "W", &params_),
                                 tape.param(base + "U", &params_),
                                 tape.param(base + "b", &params_), 2 * H);
            x = state[l].h;
        }
        Var q = state[config_.layers - 1].h;
        Var alpha = softmax_rows(matmul(q, enc_t));
        Var context = matmul(alpha, enc.states);
        Var qc = concat_cols(q, context);
        losses.push_back(cross_entropy_row(matmul(qc, head_op), target_ops[t]));
        losses.push_back(cross_entropy_row(matmul(qc, head_arg), target_args[t]));
        prev_op = target_ops[t];
        prev_arg = target_args[t];
    }
    return sum_losses(losses);
}

TrainReport ParserModel::train(const std::vector<QAPair>& pairs, uint64_t seed,
                               int steps, int start_step) {
    if (pairs.empty()) throw EmptyInput("parser training needs a non-empty corpus");
    config_.check();
    TrainReport report;
    report.losses.reserve(static_cast<size_t>(std::max(steps, 0)));
    const int B = config_.batch_size;
    for (int s = start_step; s < start_step + steps; ++s) {
        Rng step_rng(derive_seed(seed, "step-" + std::to_string(s)));
        params_.zero_grads();
        double batch_loss = 0.0;
        for (int b = 0; b < B; ++b) {
            const QAPair& pair = pairs[step_rng.uniform_index(pairs.size())];
            Tape tape;
            Var loss = scale(sample_loss(tape, pair), 1.0 / B);
            batch_loss += tape.value(loss.id)(0, 0);
            tape.backward(loss);
        }
        if (!std::isfinite(batch_loss))
            throw NonFiniteLoss("parser training diverged at step " +
                                std::to_string(s) + " (loss " +
                                std::to_string(batch_loss) + ")");
        params_.sgd_step(config_.learning_rate, config_.momentum);
        report.losses.push_back(batch_loss);
    }
    report.steps = steps;
    return report;
}

DecodedTokens ParserModel::predict_tokens(const std::vector<std::string>& question) const {
    const int H = config_.hidden_dim;
    std::vector<int> token_ids;
    token_ids.reserve(question.size());
    for (const auto& token : question) token_ids.push_back(vocab_.word_id(token));

    Tape tape;
    const Encoded enc = encode(tape, token_ids);
    Var enc_t = transpose(enc.states);
    Var head_op = tape.param("parser.head.op", &params_);
    Var head_arg = tape.param("parser.head.arg", &params_);
    std::vector<LstmState> state(config_.layers,
                                 LstmState{tape.input(Mat::Zero(1, 2 * H)),
                                           tape.input(Mat::Zero(1, 2 * H))});
    DecodedTokens out;
    int prev_op = 0, prev_arg = 0;
    for (int t = 0; t < config_.max_functions; ++t) {
        Var x = decoder_input(tape, prev_op, prev_arg);
        for (int l = 0; l < config_.layers; ++l) {
            const std::string base = "parser.dec.l" + std::to_string(l) + ".";
            state[l] = lstm_cell(x, state[l], tape.param(base + "W", &params_),
                                 tape.param(base + "U", &params_),
                                 tape.param(base + "b", &params_), 2 * H);
            x = state[l].h;
        }
        Var q = state[config_.layers - 1].h;
        Var alpha = softmax_rows(matmul(q, enc_t));
        Var context = matmul(alpha, enc.states);
        Var qc = concat_cols(q, context);
        const Mat op_logits = tape.value(matmul(qc, head_op).id);
        const Mat arg_logits = tape.value(matmul(qc, head_arg).id);
        int op_best = 0, arg_best = 0;
        op_logits.row(0).maxCoeff(&op_best);
        arg_logits.row(0).maxCoeff(&arg_best);
        if (op_best == 1) break;  // <end>
        out.ops.push_back(vocab_.ops[static_cast<size_t>(op_best)]);
        out.args.push_back(vocab_.args[static_cast<size_t>(arg_best)]);
        prev_op = op_best;
        prev_arg = arg_best;
    }
    return out;
}

Program ParserModel::predict_program(const std::vector<std::string>& question) const {
    return assemble_program(predict_tokens(question), Catalog::core());
}

double ParserModel::grad_check(const QAPair& pair, double epsilon) {
    params_.zero_grads();
    {
        Tape tape;
        Var loss = sample_loss(tape, pair);
        tape.backward(loss);
    }
    std::map<std::string, Mat> analytic;
    for (const auto& name : params_.names()) analytic[name] = params_.grad(name);

    const auto loss_at = [&]() {
        Tape tape;
        Var loss = sample_loss(tape, pair);
        return tape.value(loss.id)(0, 0);
    };
    double worst = 0.0;
    for (const auto& name : params_.names()) {
        Mat& m = params_.get(name);
        const Mat& g = analytic[name];
        for (int i = 0; i < m.rows(); ++i) {
            for (int j = 0; j < m.cols(); ++j) {
                const double saved = m(i, j);
                m(i, j) = saved + epsilon;
                const double hi = loss_at();
                m(i, j) = saved - epsilon;
                const double lo = loss_at();
                m(i, j) = saved;
                const double numeric = (hi - lo) / (2.0 * epsilon);
                const double denom = std::max(std::abs(g(i, j)) + std::abs(numeric), 1.0);
                worst = std::max(worst, std::abs(g(i, j) - numeric) / denom);
            }
        }
    }
    return worst;
}

ParserEval evaluate_parser(const ParserModel& model, const std::vector<QAPair>& pairs) {
    long op_ok = 0, arg_ok = 0, fn_ok = 0, total = 0;
    for (const auto& pair : pairs) {
        const DecodedTokens pred = model.predict_tokens(pair.question);
        std::vector<std::string> gold_ops, gold_args;
        for (const auto& call : pair.program.functions) {
            gold_ops.push_back(ParserVocab::op_token(call));
            gold_args.push_back(ParserVocab::arg_token(call));
        }
        const size_t n = std::max(pred.ops.size(), gold_ops.size());
        for (size_t i = 0; i < n; ++i) {
            const bool has_both = i < pred.ops.size() && i < gold_ops.size();
            const bool op_hit = has_both && pred.ops[i] == gold_ops[i];
            const bool arg_hit = has_both && pred.args[i] == gold_args[i];
            op_ok += op_hit ? 1 : 0;
            arg_ok += arg_hit ? 1 : 0;
            fn_ok += (op_hit && arg_hit) ? 1 : 0;
            ++total;
        }
    }
    ParserEval eval;
    eval.pairs = static_cast<int>(pairs.size());
    if (total > 0) {
        eval.op_accuracy = static_cast<double>(op_ok) / static_cast<double>(total);
        eval.arg_accuracy = static_cast<double>(arg_ok) / static_cast<double>(total);
        eval.function_accuracy = static_cast<double>(fn_ok) / static_cast<double>(total);
    }
    return eval;
}

Program assemble_program(const DecodedTokens& tokens, const Catalog& catalog) {
    if (tokens.ops.size() != tokens.args.size())
        throw ParseFailure("decoded op and argument sequences differ in length");
    if (tokens.ops.empty()) throw ParseFailure("decoder emitted no functions");

    Program program;
    std::vector<std::pair<ValueType, bool>> produced;  // type, consumed
    for (size_t t = 0; t < tokens.ops.size(); ++t) {
        std::string fine = tokens.ops[t];
        FunctionCall call;
        call.index = static_cast<int>(t);
        if (fine.size() > 4 && fine.compare(fine.size() - 4, 4, " (o)") == 0) {
            call.direction = RelateDirection::Object;
            fine = fine.substr(0, fine.size() - 4);
        }
        const size_t space = fine.find(' ');
        call.operation = fine.substr(0, space);
        if (space != std::string::npos) {
            std::string category = fine.substr(space + 1);
            if (category.size() > 5 && category.compare(0, 4, "not(") == 0 &&
                category.back() == ')') {
                call.negate = true;
                category = category.substr(4, category.size() - 5);
            }
            call.category = category;
        }
        call.arguments = split_commas(tokens.args[t]);

        const FunctionSignature* sig =
            catalog.find(call.operation, !call.category.empty());
        if (sig == nullptr)
            throw ParseFailure("decoded token \"" + tokens.ops[t] +
                               "\" names no known function");
        for (const ValueType needed : sig->input_types) {
            int found = -1;
            for (int k = static_cast<int>(produced.size()) - 1; k >= 0; --k) {
                if (!produced[static_cast<size_t>(k)].second &&
                    produced[static_cast<size_t>(k)].first == needed) {
                    found = k;
                    break;
                }
            }
            if (found < 0)
                throw ParseFailure("step " + std::to_string(t) + " (" + fine +
                                   ") has no unconsumed " +
                                   value_type_name(needed) + " to consume");
            produced[static_cast<size_t>(found)].second = true;
            call.dependencies.push_back(found);
        }
        std::sort(call.dependencies.begin(), call.dependencies.end());
        produced.emplace_back(sig->output_type, false);
        program.functions.push_back(std::move(call));
    }

    const auto diagnostics = validate(program, catalog);
    if (!diagnostics.empty())
        throw ParseFailure("decoded program failed validation: " +
                           diagnostics.front().message);
    return program;
}

}  // namespace sgqa
