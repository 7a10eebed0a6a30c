#include "sgqa/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace sgqa {

EncoderConfig EncoderConfig::paper_scale() {
    EncoderConfig c;
    c.n_lang = 9;
    c.n_cross = 5;
    c.n_vis = 5;
    c.dim = 768;
    c.heads = 12;
    c.ff_dim = 3072;
    c.feature_dim = 2048;
    return c;
}

void EncoderConfig::check() const {
    if (n_lang < 1 || n_cross < 1 || n_vis < 1)
        throw ConfigError("encoder layer counts must be >= 1");
    if (dim <= 0 || heads <= 0 || dim % heads != 0)
        throw ConfigError("encoder dim must be positive and divisible by heads");
    if (ff_dim <= 0 || feature_dim <= 0 || max_question_tokens <= 0)
        throw ConfigError("encoder widths and token budget must be positive");
    if (learning_rate < 0.0 || momentum < 0.0 || momentum >= 1.0)
        throw ConfigError("encoder learning rate must be >= 0 and momentum in [0,1)");
    if (batch_size <= 0 || max_steps < 0)
        throw ConfigError("encoder batch size must be positive and max steps >= 0");
}

Json EncoderConfig::to_json() const {
    return Json{{"n_lang", n_lang},
                {"n_cross", n_cross},
                {"n_vis", n_vis},
                {"dim", dim},
                {"heads", heads},
                {"ff_dim", ff_dim},
                {"feature_dim", feature_dim},
                {"max_question_tokens", max_question_tokens},
                {"learning_rate", learning_rate},
                {"momentum", momentum},
                {"batch_size", batch_size},
                {"max_steps", max_steps},
                {"post_selection_view", post_selection_view}};
}

EncoderConfig EncoderConfig::from_json(const Json& j) {
    EncoderConfig c;
    c.n_lang = j.value("n_lang", c.n_lang);
    c.n_cross = j.value("n_cross", c.n_cross);
    c.n_vis = j.value("n_vis", c.n_vis);
    c.dim = j.value("dim", c.dim);
    c.heads = j.value("heads", c.heads);
    c.ff_dim = j.value("ff_dim", c.ff_dim);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.max_question_tokens = j.value("max_question_tokens", c.max_question_tokens);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum = j.value("momentum", c.momentum);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.post_selection_view = j.value("post_selection_view", c.post_selection_view);
    c.check();
    return c;
}

int EncoderVocab::word_id(const std::string& token) const {
    const auto it = word_ids_.find(token);
    return it == word_ids_.end() ? 1 : it->second;
}

int EncoderVocab::answer_id(const std::string& token) const {
    const auto it = answer_ids_.find(token);
    return it == answer_ids_.end() ? -1 : it->second;
}

void EncoderVocab::index() {
    word_ids_.clear();
    answer_ids_.clear();
    for (size_t i = 0; i < words.size(); ++i) word_ids_[words[i]] = static_cast<int>(i);
    for (size_t i = 0; i < answers.size(); ++i)
        answer_ids_[answers[i]] = static_cast<int>(i);
}

EncoderVocab EncoderVocab::build(const std::vector<std::vector<std::string>>& questions,
                                 const std::vector<std::string>& answers) {
    std::set<std::string> words;
    for (const auto& q : questions) words.insert(q.begin(), q.end());
    std::set<std::string> unique_answers(answers.begin(), answers.end());
    if (unique_answers.empty()) throw ConfigError("encoder answer set is empty");

    EncoderVocab v;
    v.words = {kSentinel, kUnk};
    v.words.insert(v.words.end(), words.begin(), words.end());
    v.answers = {unique_answers.begin(), unique_answers.end()};
    v.index();
    return v;
}

Json EncoderVocab::to_json() const {
    return Json{{"words", words}, {"answers", answers}};
}

EncoderVocab EncoderVocab::from_json(const Json& j) {
    EncoderVocab v;
    v.words = j.at("words").get<std::vector<std::string>>();
    v.answers = j.at("answers").get<std::vector<std::string>>();
    if (v.words.size() < 2 || v.words[0] != kSentinel || v.words[1] != kUnk)
        throw MalformedDocument("encoder word vocabulary must reserve the sentinels");
    if (v.answers.empty())
        throw MalformedDocument("encoder answer vocabulary is empty");
    v.index();
    return v;
}

EncoderModel::EncoderModel(EncoderConfig config, EncoderVocab vocab,
                           FeatureFn features, uint64_t seed)
    : config_(std::move(config)), vocab_(std::move(vocab)),
      features_(std::move(features)) {
    config_.check();
    if (!features_) throw ConfigError("encoder needs a region feature source");
    const int d = config_.dim;

    const auto attention_block = [&](const std::string& prefix) {
        for (const char* w : {"Wq", "Wk", "Wv", "Wo"}) params_.create(prefix + w, d, d);
        for (const char* b : {"bq", "bk", "bv", "bo"}) params_.create(prefix + b, 1, d);
        params_.create(prefix + "ln.g", 1, d);
        params_.create(prefix + "ln.b", 1, d);
    };
    const auto ff_block = [&](const std::string& prefix) {
        params_.create(prefix + "W1", d, config_.ff_dim);
        params_.create(prefix + "b1", 1, config_.ff_dim);
        params_.create(prefix + "W2", config_.ff_dim, d);
        params_.create(prefix + "b2", 1, d);
        params_.create(prefix + "ln.g", 1, d);
        params_.create(prefix + "ln.b", 1, d);
    };

    params_.create("xe.embed.word", static_cast<int>(vocab_.words.size()), d);
    params_.create("xe.embed.index", config_.max_question_tokens + 1, d);
    params_.create("xe.embed.ln.g", 1, d);
    params_.create("xe.embed.ln.b", 1, d);
    params_.create("xe.obj.WF", config_.feature_dim, d);
    params_.create("xe.obj.bF", 1, d);
    params_.create("xe.obj.lnF.g", 1, d);
    params_.create("xe.obj.lnF.b", 1, d);
    params_.create("xe.obj.WP", 5, d);
    params_.create("xe.obj.bP", 1, d);
    params_.create("xe.obj.lnP.g", 1, d);
    params_.create("xe.obj.lnP.b", 1, d);
    for (int i = 0; i < config_.n_lang; ++i) {
        attention_block("xe.lang" + std::to_string(i) + ".att.");
        ff_block("xe.lang" + std::to_string(i) + ".ff.");
    }
    for (int i = 0; i < config_.n_vis; ++i) {
        attention_block("xe.vis" + std::to_string(i) + ".att.");
        ff_block("xe.vis" + std::to_string(i) + ".ff.");
    }
    for (int i = 0; i < config_.n_cross; ++i) {
        const std::string base = "xe.cross" + std::to_string(i) + ".";
        attention_block(base + "lx.att.");
        attention_block(base + "vx.att.");
        attention_block(base + "lself.att.");
        attention_block(base + "vself.att.");
        ff_block(base + "lff.");
        ff_block(base + "vff.");
    }
    params_.create("xe.head.W1", d, config_.ff_dim);
    params_.create("xe.head.b1", 1, config_.ff_dim);
    params_.create("xe.head.W2", config_.ff_dim,
                   static_cast<int>(vocab_.answers.size()));
    params_.create("xe.head.b2", 1, static_cast<int>(vocab_.answers.size()));

    Rng rng(derive_seed(seed, "encoder-init"));
    for (const auto& name : params_.names()) {
        Mat& m = params_.get(name);
        const bool is_ln = name.find(".ln") != std::string::npos ||
                           name.find(".lnF") != std::string::npos ||
                           name.find(".lnP") != std::string::npos;
        if (is_ln) {
            m.setConstant(name.back() == 'g' ? 1.0 : 0.0);
        } else if (m.rows() == 1) {
            m.setZero();
        } else if (name.find(".embed.") != std::string::npos) {
            for (int i = 0; i < m.rows(); ++i)
                for (int j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-0.1, 0.1);
        } else {
            const double r = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
            for (int i = 0; i < m.rows(); ++i)
                for (int j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-r, r);
        }
    }
}

Var EncoderModel::layer_norm(Tape& tape, Var x, const std::string& prefix) const {
    Var g = tape.param(prefix + "g", &params_);
    Var b = tape.param(prefix + "b", &params_);
    return add_rowvec(mul_rowvec(normalize_rows(x), g), b);
}

Var EncoderModel::attention(Tape& tape, Var queries, Var keys_values,
                            const std::string& prefix) const {
    const int d = config_.dim;
    const int dh = d / config_.heads;
    Var Q = add_rowvec(matmul(queries, tape.param(prefix + "Wq", &params_)),
                       tape.param(prefix + "bq", &params_));
    Var K = add_rowvec(matmul(keys_values, tape.param(prefix + "Wk", &params_)),
                       tape.param(prefix + "bk", &params_));
    Var V = add_rowvec(matmul(keys_values, tape.param(prefix + "Wv", &params_)),
                       tape.param(prefix + "bv", &params_));
    Var merged;
    for (int h = 0; h < config_.heads; ++h) {
        Var qh = slice_cols(Q, h * dh, dh);
        Var kh = slice_cols(K, h * dh, dh);
        Var vh = slice_cols(V, h * dh, dh);
        Var scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(double(dh)));
        Var out = matmul(softmax_rows(scores), vh);
        merged = h == 0 ? out : concat_cols(merged, out);
    }
    return add_rowvec(matmul(merged, tape.param(prefix + "Wo", &params_)),
                      tape.param(prefix + "bo", &params_));
}

Var EncoderModel::attention_sublayer(Tape& tape, Var x, Var context,
                                     const std::string& prefix) const {
    return layer_norm(tape, add(x, attention(tape, x, context, prefix)),
                      prefix + "ln.");
}

Var EncoderModel::ff_sublayer(Tape& tape, Var x, const std::string& prefix) const {
    Var hidden = gelu(add_rowvec(matmul(x, tape.param(prefix + "W1", &params_)),
                                 tape.param(prefix + "b1", &params_)));
    Var out = add_rowvec(matmul(hidden, tape.param(prefix + "W2", &params_)),
                         tape.param(prefix + "b2", &params_));
    return layer_norm(tape, add(x, out), prefix + "ln.");
}

Var EncoderModel::embed_question(Tape& tape,
                                 const std::vector<std::string>& tokens) const {
    // An empty token list degenerates to the lone sentinel row.
    if (tokens.size() > static_cast<size_t>(config_.max_question_tokens))
        throw ConfigError("question exceeds the encoder token budget");
    std::vector<int> ids = {0};  // answer sentinel
    for (const auto& token : tokens) ids.push_back(vocab_.word_id(token));
    std::vector<int> positions(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) positions[i] = static_cast<int>(i);

    Var words = gather_rows(tape.param("xe.embed.word", &params_), ids);
    Var index = gather_rows(tape.param("xe.embed.index", &params_), positions);
    return layer_norm(tape, add(words, index), "xe.embed.ln.");
}

Var EncoderModel::embed_objects(Tape& tape, const SceneGraph& graph,
                                const std::vector<ObjectId>& ids) const {
    if (ids.empty()) throw EmptySelection("cannot embed an empty object selection");
    Mat feats(static_cast<int>(ids.size()), config_.feature_dim);
    Mat pos(static_cast<int>(ids.size()), 5);
    for (size_t i = 0; i < ids.size(); ++i) {
        const SceneObject& obj = graph.at(ids[i]);
        const Eigen::VectorXd r = features_(graph, ids[i]);
        if (r.size() != config_.feature_dim)
            throw DimensionMismatch("region feature width " + std::to_string(r.size()) +
                                    " does not match the configured " +
                                    std::to_string(config_.feature_dim));
        feats.row(static_cast<int>(i)) = r.transpose();
        pos.row(static_cast<int>(i)) =
            FeatureSynthesizer::position_feature(obj.box).transpose();
    }
    Var r_hat = layer_norm(
        tape,
        add_rowvec(matmul(tape.input(feats), tape.param("xe.obj.WF", &params_)),
                   tape.param("xe.obj.bF", &params_)),
        "xe.obj.lnF.");
    Var p_hat = layer_norm(
        tape,
        add_rowvec(matmul(tape.input(pos), tape.param("xe.obj.WP", &params_)),
                   tape.param("xe.obj.bP", &params_)),
        "xe.obj.lnP.");
    return scale(add(r_hat, p_hat), 0.5);
}

std::pair<Var, Var> EncoderModel::encode_streams(Tape& tape, Var objects,
                                                 Var language) const {
    if (objects.rows() == 0 || language.rows() == 0)
        throw EmptyInput("encoder streams must be non-empty");
    if (objects.cols() != config_.dim || language.cols() != config_.dim)
        throw DimensionMismatch("encoder stream width must equal the model dim");
    Var L = language, V = objects;
    for (int i = 0; i < config_.n_lang; ++i) {
        const std::string base = "xe.lang" + std::to_string(i) + ".";
        L = ff_sublayer(tape, attention_sublayer(tape, L, L, base + "att."),
                        base + "ff.");
    }
    for (int i = 0; i < config_.n_vis; ++i) {
        const std::string base = "xe.vis" + std::to_string(i) + ".";
        V = ff_sublayer(tape, attention_sublayer(tape, V, V, base + "att."),
                        base + "ff.");
    }
    for (int i = 0; i < config_.n_cross; ++i) {
        const std::string base = "xe.cross" + std::to_string(i) + ".";
        Var L2 = attention_sublayer(tape, L, V, base + "lx.att.");
        Var V2 = attention_sublayer(tape, V, L, base + "vx.att.");
        L2 = attention_sublayer(tape, L2, L2, base + "lself.att.");
        V2 = attention_sublayer(tape, V2, V2, base + "vself.att.");
        L = ff_sublayer(tape, L2, base + "lff.");
        V = ff_sublayer(tape, V2, base + "vff.");
    }
    return {V, L};
}

EncoderModel::LayoutOutcome EncoderModel::run_layout_on_tape(
    Tape& tape, const Program& program, const SceneGraph& graph,
    const std::vector<std::string>& question, Policy policy) const {
    const Catalog catalog = Catalog::core();
    const ExecResult exec = execute(program, graph, catalog, policy);
    if (!exec.ok())
        throw ExecAborted("program aborted at step " +
                          std::to_string(exec.error->step) + ": " +
                          exec.error->message);

    LayoutOutcome outcome;
    outcome.trace.flags = exec.trace->flags;
    const std::vector<FunctionCall> layout = selected_layout(program, catalog);

    Var L = embed_question(tape, question);
    std::vector<ObjectId> current = graph.object_ids();
    int call_idx = 0;
    for (size_t t = 0; t < layout.size(); ++t) {
        const StepRecord& record = exec.trace->steps[layout[t].index];
        const std::vector<ObjectId>& raw = record.output.as_objects();
        LayoutStep step;
        step.step = static_cast<int>(t);
        step.function_idx = layout[t].index;
        step.object_ids = raw;
        step.encode_call_idx = call_idx;
        step.fallback = raw.empty();
        if (step.fallback)
            outcome.trace.flags.push_back("layout step " + std::to_string(t) +
                                          ": empty selection, previous set kept");
        const std::vector<ObjectId>& next = step.fallback ? current : raw;
        const std::vector<ObjectId>& view =
            config_.post_selection_view ? next : current;
        Var V = embed_objects(tape, graph, view);
        auto [v_out, l_out] = encode_streams(tape, V, L);
        (void)v_out;  // vision output of intermediate calls is not propagated
        L = l_out;
        current = next;
        outcome.trace.steps.push_back(std::move(step));
        ++call_idx;
    }
    Var V = embed_objects(tape, graph, current);
    auto [v_out, l_out] = encode_streams(tape, V, L);
    (void)v_out;
    ++call_idx;
    outcome.trace.encode_calls = call_idx;

    Var sentinel = row(l_out, 0);
    Var hidden = gelu(add_rowvec(matmul(sentinel, tape.param("xe.head.W1", &params_)),
                                 tape.param("xe.head.b1", &params_)));
    outcome.logits = add_rowvec(matmul(hidden, tape.param("xe.head.W2", &params_)),
                                tape.param("xe.head.b2", &params_));
    return outcome;
}

LayoutResult EncoderModel::run_layout(const Program& program, const SceneGraph& graph,
                                      const std::vector<std::string>& question,
                                      Policy policy) const {
    Tape tape;
    const LayoutOutcome outcome =
        run_layout_on_tape(tape, program, graph, question, policy);
    const Mat probs = tape.value(softmax_rows(outcome.logits).id);
    LayoutResult result;
    result.answer_dist = probs.row(0);
    int best = 0;
    probs.row(0).maxCoeff(&best);
    result.answer = vocab_.answers[static_cast<size_t>(best)];
    result.trace = outcome.trace;
    return result;
}

Var EncoderModel::sample_loss(Tape& tape, const EncoderSample& sample,
                              Policy policy) const {
    if (sample.graph == nullptr) throw ConfigError("encoder sample has no graph");
    const int target = vocab_.answer_id(sample.answer);
    if (target < 0)
        throw ConfigError("answer \"" + sample.answer +
                          "\" is outside the answer vocabulary");
    const LayoutOutcome outcome =
        run_layout_on_tape(tape, sample.program, *sample.graph, sample.question, policy);
    return cross_entropy_row(outcome.logits, target);
}

TrainReport EncoderModel::train(const std::vector<EncoderSample>& samples,
                                uint64_t seed, int steps, int start_step) {
    if (samples.empty()) throw EmptyInput("encoder training needs samples");
    config_.check();
    TrainReport report;
    report.losses.reserve(static_cast<size_t>(std::max(steps, 0)));
    const int B = config_.batch_size;
    for (int s = start_step; s < start_step + steps; ++s) {
        Rng step_rng(derive_seed(seed, "step-" + std::to_string(s)));
        params_.zero_grads();
        double batch_loss = 0.0;
        for (int b = 0; b < B; ++b) {
            const EncoderSample& sample = samples[step_rng.uniform_index(samples.size())];
            Tape tape;
            Var loss = scale(sample_loss(tape, sample), 1.0 / B);
            batch_loss += tape.value(loss.id)(0, 0);
            tape.backward(loss);
        }
        if (!std::isfinite(batch_loss))
            throw NonFiniteLoss("encoder training diverged at step " +
                                std::to_string(s) + " (loss " +
                                std::to_string(batch_loss) + ")");
        params_.sgd_step(config_.learning_rate, config_.momentum);
        report.losses.push_back(batch_loss);
    }
    report.steps = steps;
    return report;
}

double EncoderModel::grad_check(const EncoderSample& sample, double epsilon) {
    params_.zero_grads();
    {
        Tape tape;
        Var loss = sample_loss(tape, sample);
        tape.backward(loss);
    }
    std::map<std::string, Mat> analytic;
    for (const auto& name : params_.names()) analytic[name] = params_.grad(name);

    const auto loss_at = [&]() {
        Tape tape;
        Var loss = sample_loss(tape, sample);
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

Json layout_trace_to_jsonl(const LayoutTrace& trace) {
    Json lines = Json::array();
    for (const auto& step : trace.steps) {
        Json line;
        line["step"] = step.step;
        line["function_idx"] = step.function_idx;
        line["object_ids"] = step.object_ids;
        line["encode_call_idx"] = step.encode_call_idx;
        if (step.fallback) line["fallback"] = true;
        lines.push_back(std::move(line));
    }
    return lines;
}

}  // namespace sgqa
