#include "sgqa/autodiff.hpp"

#include <cmath>

namespace sgqa {

// ---- ParamStore -----------------------------------------------------------

Mat& ParamStore::create(const std::string& name, int rows, int cols) {
    if (params_.count(name)) throw ConfigError("parameter \"" + name + "\" already exists");
    params_[name] = Mat::Zero(rows, cols);
    grads_[name] = Mat::Zero(rows, cols);
    return params_[name];
}

Mat& ParamStore::get(const std::string& name) {
    const auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter \"" + name + "\"");
    return it->second;
}

const Mat& ParamStore::get(const std::string& name) const {
    const auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter \"" + name + "\"");
    return it->second;
}

Mat& ParamStore::grad(const std::string& name) {
    const auto it = grads_.find(name);
    if (it == grads_.end()) throw ConfigError("unknown parameter \"" + name + "\"");
    return it->second;
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    for (const auto& [name, value] : params_) out.push_back(name);
    return out;
}

void ParamStore::zero_grads() {
    for (auto& [name, g] : grads_) g.setZero();
}

void ParamStore::sgd_step(double learning_rate, double momentum) {
    for (auto& [name, p] : params_) {
        const Mat& g = grads_.at(name);
        if (momentum != 0.0) {
            auto [it, inserted] = velocities_.try_emplace(name, Mat::Zero(p.rows(), p.cols()));
            Mat& v = it->second;
            v = momentum * v - learning_rate * g;
            p += v;
        } else {
            p -= learning_rate * g;
        }
    }
}

void ParamStore::adam_step(double learning_rate, double beta1, double beta2,
                           double epsilon) {
    ++adam_t_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam_t_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam_t_));
    for (auto& [name, p] : params_) {
        const Mat& g = grads_.at(name);
        Mat& m = adam_m_.try_emplace(name, Mat::Zero(p.rows(), p.cols())).first->second;
        Mat& v = adam_v_.try_emplace(name, Mat::Zero(p.rows(), p.cols())).first->second;
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
        p.array() -= learning_rate * (m.array() / c1) /
                     ((v.array() / c2).sqrt() + epsilon);
    }
}

// ---- Tape -----------------------------------------------------------------

const Mat& Var::value() const { return tape->value(id); }

int Tape::emit(Mat value, bool needs_grad, std::vector<int> parents,
               std::function<void(Tape&, int)> backward_fn) {
    Node node;
    node.value = std::move(value);
    node.needs_grad = needs_grad;
    node.parents = std::move(parents);
    node.backward_fn = std::move(backward_fn);
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::input(Mat value) {
    return {emit(std::move(value), false, {}, nullptr), this};
}

Var Tape::param(const std::string& name, ParamStore* store) {
    const auto it = param_nodes_.find(name);
    if (it != param_nodes_.end()) return {it->second, this};
    const int id = emit(store->get(name), true, {},
                        [store, name](Tape& tape, int self) {
                            store->grad(name) += tape.grad_slot(self);
                        });
    param_nodes_[name] = id;
    return {id, this};
}

Mat& Tape::grad_slot(int id) {
    Node& node = nodes_[id];
    if (!node.grad_ready) {
        node.grad = Mat::Zero(node.value.rows(), node.value.cols());
        node.grad_ready = true;
    }
    return node.grad;
}

const Mat& Tape::grad(int id) const {
    static const Mat empty;
    return nodes_[id].grad_ready ? nodes_[id].grad : empty;
}

void Tape::backward(Var loss) {
    if (loss.tape != this) throw DimensionMismatch("loss lives on another tape");
    const Mat& v = nodes_[loss.id].value;
    if (v.rows() != 1 || v.cols() != 1)
        throw DimensionMismatch("backward needs a scalar loss");
    grad_slot(loss.id)(0, 0) = 1.0;
    for (int id = loss.id; id >= 0; --id) {
        Node& node = nodes_[id];
        if (!node.needs_grad || !node.grad_ready || !node.backward_fn) continue;
        node.backward_fn(*this, id);
    }
}

// ---- op helpers -----------------------------------------------------------

namespace {

Tape& same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw DimensionMismatch("operands live on different tapes");
    return *a.tape;
}

bool any_grad(Tape& t, std::initializer_list<Var> vars) {
    for (Var v : vars)
        if (t.needs_grad(v.id)) return true;
    return false;
}

void accumulate(Tape& t, int parent, const Mat& delta) {
    if (t.needs_grad(parent)) t.grad_slot(parent) += delta;
}

}  // namespace

Var matmul(Var a, Var b) {
    Tape& t = same_tape(a, b);
    if (a.value().cols() != b.value().rows())
        throw DimensionMismatch("matmul: " + std::to_string(a.value().cols()) + " vs " +
                                std::to_string(b.value().rows()));
    const int ia = a.id, ib = b.id;
    return {t.emit(a.value() * b.value(), any_grad(t, {a, b}), {ia, ib},
                   [ia, ib](Tape& tape, int self) {
                       const Mat& g = tape.grad_slot(self);
                       accumulate(tape, ia, g * tape.value(ib).transpose());
                       accumulate(tape, ib, tape.value(ia).transpose() * g);
                   }),
            &t};
}

Var transpose(Var a) {
    Tape& t = *a.tape;
    const int ia = a.id;
    return {t.emit(a.value().transpose(), t.needs_grad(ia), {ia},
                   [ia](Tape& tape, int self) {
                       accumulate(tape, ia, tape.grad_slot(self).transpose());
                   }),
            &t};
}

Var add(Var a, Var b) {
    Tape& t = same_tape(a, b);
    const int ia = a.id, ib = b.id;
    return {t.emit(a.value() + b.value(), any_grad(t, {a, b}), {ia, ib},
                   [ia, ib](Tape& tape, int self) {
                       const Mat& g = tape.grad_slot(self);
                       accumulate(tape, ia, g);
                       accumulate(tape, ib, g);
                   }),
            &t};
}

Var sub(Var a, Var b) {
    Tape& t = same_tape(a, b);
    const int ia = a.id, ib = b.id;
    return {t.emit(a.value() - b.value(), any_grad(t, {a, b}), {ia, ib},
                   [ia, ib](Tape& tape, int self) {
                       const Mat& g = tape.grad_slot(self);
                       accumulate(tape, ia, g);
                       accumulate(tape, ib, -g);
                   }),
            &t};
}

Var add_rowvec(Var a, Var rowv) {
    Tape& t = same_tape(a, rowv);
    if (rowv.value().rows() != 1 || rowv.value().cols() != a.value().cols())
        throw DimensionMismatch("add_rowvec: shape mismatch");
    const int ia = a.id, ir = rowv.id;
    Mat out = a.value();
    out.rowwise() += rowv.value().row(0);
    return {t.emit(std::move(out), any_grad(t, {a, rowv}), {ia, ir},
                   [ia, ir](Tape& tape, int self) {
                       const Mat& g = tape.grad_slot(self);
                       accumulate(tape, ia, g);
                       accumulate(tape, ir, g.colwise().sum());
                   }),
            &t};
}

Var mul(Var a, Var b) {
    Tape& t = same_tape(a, b);
    const int ia = a.id, ib = b.id;
    return {t.emit(a.value().cwiseProduct(b.value()), any_grad(t, {a, b}), {ia, ib},
                   [ia, ib](Tape& tape, int self) {
                       const Mat& g = tape.grad_slot(self);
                       accumulate(tape, ia, g.cwiseProduct(tape.value(ib)));
                       accumulate(tape, ib, g.cwiseProduct(tape.value(ia)));
                   }),
            &t};
}

Var mul_rowvec(Var a, Var rowv) {
    Tape& t = same_tape(a, rowv);
    if (rowv.value().rows() != 1 || rowv.value().cols() != a.value().cols())
        throw DimensionMismatch("mul_rowvec: shape mismatch");
    const int ia = a.id, ir = rowv.id;
    Mat out = (a.value().array().rowwise() * rowv.value().row(0).array()).matrix();
    return {t.emit(std::move(out), any_grad(t, {a, rowv}), {ia, ir},
                   [ia, ir](Tape& tape, int self) {
                       const Mat& g = tape.grad_slot(self);
                       const Mat& av = tape.value(ia);
                       const Mat& rv = tape.value(ir);
                       accumulate(tape, ia, (g.array().rowwise() * rv.row(0).array()).matrix());
                       accumulate(tape, ir, (g.cwiseProduct(av)).colwise().sum());
                   }),
            &t};
}

Var scale(Var a, double factor) {
    Tape& t = *a.tape;
    const int ia = a.id;
    return {t.emit(a.value() * factor, t.needs_grad(ia), {ia},
                   [ia, factor](Tape& tape, int self) {
                       accumulate(tape, ia, tape.grad_slot(self) * factor);
                   }),
            &t};
}

Var concat_cols(Var a, Var b) {
    Tape& t = same_tape(a, b);
    if (a.value().rows() != b.value().rows())
        throw DimensionMismatch("concat_cols: row mismatch");
    const int ia = a.id, ib = b.id;
    const int ca = static_cast<int>(a.value().cols());
    const int cb = static_cast<int>(b.value().cols());
    Mat out(a.value().rows(), ca + cb);
    out.leftCols(ca) = a.value();
    out.rightCols(cb) = b.value();
    return {t.emit(std::move(out), any_grad(t, {a, b}), {ia, ib},
                   [ia, ib, ca, cb](Tape& tape, int self) {
                       const Mat& g = tape.grad_slot(self);
                       accumulate(tape, ia, g.leftCols(ca));
                       accumulate(tape, ib, g.rightCols(cb));
                   }),
            &t};
}

Var vstack(const std::vector<Var>& rows) {
    if (rows.empty()) throw EmptyInput("vstack of nothing");
    Tape& t = *rows[0].tape;
    int total = 0;
    const int cols = rows[0].cols();
    bool needs = false;
    std::vector<int> ids;
    for (Var v : rows) {
        if (v.tape != &t) throw DimensionMismatch("vstack across tapes");
        if (v.cols() != cols) throw DimensionMismatch("vstack: column mismatch");
        total += v.rows();
        needs = needs || t.needs_grad(v.id);
        ids.push_back(v.id);
    }
    Mat out(total, cols);
    int at = 0;
    std::vector<std::pair<int, int>> spans;  // (offset, rows) per part
    for (Var v : rows) {
        out.middleRows(at, v.rows()) = v.value();
        spans.emplace_back(at, v.rows());
        at += v.rows();
    }
    return {t.emit(std::move(out), needs, ids,
                   [ids, spans](Tape& tape, int self) {
                       const Mat& g = tape.grad_slot(self);
                       for (size_t k = 0; k < ids.size(); ++k)
                           accumulate(tape, ids[k],
                                      g.middleRows(spans[k].first, spans[k].second));
                   }),
            &t};
}

Var slice_cols(Var a, int start, int len) {
    Tape& t = *a.tape;
    if (start < 0 || len <= 0 || start + len > a.cols())
        throw DimensionMismatch("slice_cols out of range");
    const int ia = a.id;
    return {t.emit(a.value().middleCols(start, len), t.needs_grad(ia), {ia},
                   [ia, start, len](Tape& tape, int self) {
                       if (!tape.needs_grad(ia)) return;
                       tape.grad_slot(ia).middleCols(start, len) += tape.grad_slot(self);
                   }),
            &t};
}

Var row(Var a, int index) {
    Tape& t = *a.tape;
    if (index < 0 || index >= a.rows()) throw DimensionMismatch("row out of range");
    const int ia = a.id;
    return {t.emit(a.value().row(index), t.needs_grad(ia), {ia},
                   [ia, index](Tape& tape, int self) {
                       if (!tape.needs_grad(ia)) return;
                       tape.grad_slot(ia).row(index) += tape.grad_slot(self);
                   }),
            &t};
}

Var gather_rows(Var table, const std::vector<int>& indices) {
    Tape& t = *table.tape;
    const int it = table.id;
    Mat out(static_cast<int>(indices.size()), table.cols());
    for (size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] < 0 || indices[k] >= table.rows())
            throw DimensionMismatch("gather_rows index out of range");
        out.row(static_cast<int>(k)) = table.value().row(indices[k]);
    }
    return {t.emit(std::move(out), t.needs_grad(it), {it},
                   [it, indices](Tape& tape, int self) {
                       if (!tape.needs_grad(it)) return;
                       const Mat& g = tape.grad_slot(self);
                       Mat& dst = tape.grad_slot(it);
                       for (size_t k = 0; k < indices.size(); ++k)
                           dst.row(indices[k]) += g.row(static_cast<int>(k));
                   }),
            &t};
}

Var tanh_(Var a) {
    Tape& t = *a.tape;
    const int ia = a.id;
    return {t.emit(a.value().array().tanh().matrix(), t.needs_grad(ia), {ia},
                   [ia](Tape& tape, int self) {
                       const Mat& y = tape.value(self);
                       accumulate(tape, ia,
                                  (tape.grad_slot(self).array() * (1.0 - y.array().square()))
                                      .matrix());
                   }),
            &t};
}

Var sigmoid(Var a) {
    Tape& t = *a.tape;
    const int ia = a.id;
    Mat y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
    return {t.emit(std::move(y), t.needs_grad(ia), {ia},
                   [ia](Tape& tape, int self) {
                       const Mat& y = tape.value(self);
                       accumulate(tape, ia,
                                  (tape.grad_slot(self).array() * y.array() * (1.0 - y.array()))
                                      .matrix());
                   }),
            &t};
}

Var gelu(Var a) {
    Tape& t = *a.tape;
    const int ia = a.id;
    const auto phi_cdf = [](double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); };
    Mat y = a.value().unaryExpr([&](double x) { return x * phi_cdf(x); });
    return {t.emit(std::move(y), t.needs_grad(ia), {ia},
                   [ia, phi_cdf](Tape& tape, int self) {
                       const Mat& x = tape.value(ia);
                       const Mat d = x.unaryExpr([&](double v) {
                           const double pdf =
                               std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI);
                           return phi_cdf(v) + v * pdf;
                       });
                       accumulate(tape, ia, tape.grad_slot(self).cwiseProduct(d));
                   }),
            &t};
}

Var softmax_rows(Var a) {
    Tape& t = *a.tape;
    const int ia = a.id;
    Mat y(a.rows(), a.cols());
    for (int r = 0; r < a.rows(); ++r) {
        const double mx = a.value().row(r).maxCoeff();
        const Eigen::RowVectorXd e = (a.value().row(r).array() - mx).exp().matrix();
        y.row(r) = e / e.sum();
    }
    if (t.stats)
        for (int r = 0; r < y.rows(); ++r)
            t.stats->softmax_row_dev.push_back(std::abs(y.row(r).sum() - 1.0));
    return {t.emit(std::move(y), t.needs_grad(ia), {ia},
                   [ia](Tape& tape, int self) {
                       if (!tape.needs_grad(ia)) return;
                       const Mat& y = tape.value(self);
                       const Mat& g = tape.grad_slot(self);
                       Mat d(y.rows(), y.cols());
                       for (int r = 0; r < y.rows(); ++r) {
                           const double dot = g.row(r).dot(y.row(r));
                           d.row(r) = y.row(r).cwiseProduct(
                               (g.row(r).array() - dot).matrix());
                       }
                       tape.grad_slot(ia) += d;
                   }),
            &t};
}

Var normalize_rows(Var a, double eps) {
    Tape& t = *a.tape;
    const int ia = a.id;
    const int cols = a.cols();
    Mat y(a.rows(), cols);
    Eigen::VectorXd inv_std(a.rows());
    for (int r = 0; r < a.rows(); ++r) {
        const double mu = a.value().row(r).mean();
        const Eigen::RowVectorXd centered = (a.value().row(r).array() - mu).matrix();
        const double var = centered.squaredNorm() / cols;
        inv_std(r) = 1.0 / std::sqrt(var + eps);
        y.row(r) = centered * inv_std(r);
    }
    if (t.stats) {
        for (int r = 0; r < y.rows(); ++r) {
            const double mu = y.row(r).mean();
            const double var = (y.row(r).array() - mu).square().sum() / cols;
            t.stats->norm_abs_mean.push_back(std::abs(mu));
            t.stats->norm_var_dev.push_back(std::abs(var - 1.0));
        }
    }
    return {t.emit(std::move(y), t.needs_grad(ia), {ia},
                   [ia, inv_std](Tape& tape, int self) {
                       if (!tape.needs_grad(ia)) return;
                       const Mat& n = tape.value(self);
                       const Mat& g = tape.grad_slot(self);
                       Mat d(n.rows(), n.cols());
                       for (int r = 0; r < n.rows(); ++r) {
                           const double gm = g.row(r).mean();
                           const double gn = g.row(r).cwiseProduct(n.row(r)).mean();
                           d.row(r) = (inv_std(r) *
                                       (g.row(r).array() - gm - n.row(r).array() * gn))
                                          .matrix();
                       }
                       tape.grad_slot(ia) += d;
                   }),
            &t};
}

Var sum(Var a) {
    Tape& t = *a.tape;
    const int ia = a.id;
    Mat out(1, 1);
    out(0, 0) = a.value().sum();
    return {t.emit(std::move(out), t.needs_grad(ia), {ia},
                   [ia](Tape& tape, int self) {
                       const double g = tape.grad_slot(self)(0, 0);
                       const Mat& v = tape.value(ia);
                       accumulate(tape, ia, Mat::Constant(v.rows(), v.cols(), g));
                   }),
            &t};
}

Var mean_all(Var a) {
    Tape& t = *a.tape;
    const int ia = a.id;
    const double n = static_cast<double>(a.rows()) * a.cols();
    Mat out(1, 1);
    out(0, 0) = a.value().sum() / n;
    return {t.emit(std::move(out), t.needs_grad(ia), {ia},
                   [ia, n](Tape& tape, int self) {
                       const double g = tape.grad_slot(self)(0, 0) / n;
                       const Mat& v = tape.value(ia);
                       accumulate(tape, ia, Mat::Constant(v.rows(), v.cols(), g));
                   }),
            &t};
}

Var cross_entropy_row(Var logits, int target) {
    Tape& t = *logits.tape;
    if (logits.rows() != 1) throw DimensionMismatch("cross_entropy_row needs a 1 x V row");
    if (target < 0 || target >= logits.cols())
        throw DimensionMismatch("cross_entropy_row target out of range");
    const int il = logits.id;
    const double mx = logits.value().row(0).maxCoeff();
    const double lse = mx + std::log((logits.value().row(0).array() - mx).exp().sum());
    Mat out(1, 1);
    out(0, 0) = lse - logits.value()(0, target);
    return {t.emit(std::move(out), t.needs_grad(il), {il},
                   [il, target, lse](Tape& tape, int self) {
                       if (!tape.needs_grad(il)) return;
                       const double g = tape.grad_slot(self)(0, 0);
                       const Mat& lv = tape.value(il);
                       Mat d = (lv.array() - lse).exp().matrix();
                       d(0, target) -= 1.0;
                       tape.grad_slot(il) += g * d;
                   }),
            &t};
}

}  // namespace sgqa
