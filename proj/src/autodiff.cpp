// SPDX-License-Identifier: Apache-2.0

#include "ticktack/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "ticktack/error.hpp"

namespace ticktack::ad {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::DimensionMismatch, what);
}

Tape& tape_of(Var a) { return *a.tape(); }

}  // namespace

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

double Var::scalar() const {
    require(value().size() == 1, "scalar() on a non-1x1 node");
    return value()(0, 0);
}

Var Tape::leaf(Matrix value, bool requires_grad) {
    auto node = std::make_unique<Node>();
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(Matrix value, std::span<const Var> inputs, Backward backward) {
    bool needs = false;
    for (const auto& in : inputs) {
        if (in.tape() != this) throw Error(ErrorCode::DimensionMismatch, "mixing tapes");
        needs = needs || requires_grad(in.id());
    }
    auto node = std::make_unique<Node>();
    node->value = std::move(value);
    node->requires_grad = needs;
    if (needs) node->backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

const Matrix& Tape::grad(int id) const {
    const auto& node = *nodes_[static_cast<std::size_t>(id)];
    return node.grad.size() == 0 ? empty_ : node.grad;
}

void Tape::accumulate(const Var& v, const Matrix& g) { accumulate_expr(v, g); }

void Tape::backward(Var loss) {
    require(loss.tape() == this && loss.value().size() == 1, "backward() needs a 1x1 loss");
    for (auto& node : nodes_) node->grad.resize(0, 0);
    auto& root = *nodes_[static_cast<std::size_t>(loss.id())];
    if (!root.requires_grad) return;
    root.grad = Matrix::Ones(1, 1);
    for (int id = loss.id(); id >= 0; --id) {
        auto& node = *nodes_[static_cast<std::size_t>(id)];
        if (node.backward && node.grad.size() != 0) node.backward(node.grad);
    }
}

Var add(Var a, Var b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
    Tape& t = tape_of(a);
    return t.record(a.value() + b.value(), {a, b}, [&t, a, b](const Matrix& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

Var sub(Var a, Var b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
    Tape& t = tape_of(a);
    return t.record(a.value() - b.value(), {a, b}, [&t, a, b](const Matrix& g) {
        t.accumulate(a, g);
        t.accumulate_expr(b, -g);
    });
}

Var scale(Var a, double factor) {
    Tape& t = tape_of(a);
    return t.record(a.value() * factor, {a},
                    [&t, a, factor](const Matrix& g) { t.accumulate_expr(a, g * factor); });
}

Var add_scalar_nodes(std::span<const Var> terms) {
    require(!terms.empty(), "add_scalar_nodes: no terms");
    Var acc = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
    return acc;
}

Var matmul(Var a, Var b) {
    require(a.cols() == b.rows(), "matmul: inner dimensions differ");
    Tape& t = tape_of(a);
    return t.record(a.value() * b.value(), {a, b}, [&t, a, b](const Matrix& g) {
        if (a.requires_grad()) t.accumulate_expr(a, g * b.value().transpose());
        if (b.requires_grad()) t.accumulate_expr(b, a.value().transpose() * g);
    });
}

Var transpose(Var a) {
    Tape& t = tape_of(a);
    return t.record(a.value().transpose(), {a},
                    [&t, a](const Matrix& g) { t.accumulate_expr(a, g.transpose()); });
}

Var gather_rows(Var table, std::span<const int> ids) {
    Matrix out(static_cast<Eigen::Index>(ids.size()), table.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        require(ids[i] >= 0 && ids[i] < table.rows(), "gather_rows: id out of range");
        out.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
    }
    Tape& t = tape_of(table);
    std::vector<int> idx(ids.begin(), ids.end());
    return t.record(std::move(out), {table}, [&t, table, idx](const Matrix& g) {
        Matrix dt = Matrix::Zero(table.rows(), table.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) dt.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
        t.accumulate(table, dt);
    });
}

Var top_rows(Var a, Eigen::Index n) {
    require(n >= 0 && n <= a.rows(), "top_rows: too many rows");
    Tape& t = tape_of(a);
    return t.record(a.value().topRows(n), {a}, [&t, a, n](const Matrix& g) {
        Matrix da = Matrix::Zero(a.rows(), a.cols());
        da.topRows(n) = g;
        t.accumulate(a, da);
    });
}

Var cols(Var a, Eigen::Index start, Eigen::Index n) {
    require(start >= 0 && n >= 0 && start + n <= a.cols(), "cols: range out of bounds");
    Tape& t = tape_of(a);
    return t.record(a.value().middleCols(start, n), {a}, [&t, a, start, n](const Matrix& g) {
        Matrix da = Matrix::Zero(a.rows(), a.cols());
        da.middleCols(start, n) = g;
        t.accumulate(a, da);
    });
}

Var hconcat(std::span<const Var> parts) {
    require(!parts.empty(), "hconcat: no parts");
    Eigen::Index total = 0;
    for (const auto& p : parts) {
        require(p.rows() == parts[0].rows(), "hconcat: row counts differ");
        total += p.cols();
    }
    Matrix out(parts[0].rows(), total);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.middleCols(at, p.cols()) = p.value();
        at += p.cols();
    }
    Tape& t = tape_of(parts[0]);
    std::vector<Var> ins(parts.begin(), parts.end());
    return t.record(std::move(out), parts, [&t, ins](const Matrix& g) {
        Eigen::Index at = 0;
        for (const auto& p : ins) {
            if (p.requires_grad()) t.accumulate_expr(p, g.middleCols(at, p.cols()));
            at += p.cols();
        }
    });
}

Var vconcat(std::span<const Var> parts) {
    require(!parts.empty(), "vconcat: no parts");
    Eigen::Index total = 0;
    for (const auto& p : parts) {
        require(p.cols() == parts[0].cols(), "vconcat: column counts differ");
        total += p.rows();
    }
    Matrix out(total, parts[0].cols());
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.middleRows(at, p.rows()) = p.value();
        at += p.rows();
    }
    Tape& t = tape_of(parts[0]);
    std::vector<Var> ins(parts.begin(), parts.end());
    return t.record(std::move(out), parts, [&t, ins](const Matrix& g) {
        Eigen::Index at = 0;
        for (const auto& p : ins) {
            if (p.requires_grad()) t.accumulate_expr(p, g.middleRows(at, p.rows()));
            at += p.rows();
        }
    });
}

Var rms_norm_rows(Var a, double eps) {
    const Matrix& x = a.value();
    Eigen::VectorXd inv_rms(x.rows());
    Matrix y(x.rows(), x.cols());
    const double n = static_cast<double>(x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        inv_rms(i) = 1.0 / std::sqrt(x.row(i).squaredNorm() / n + eps);
        y.row(i) = x.row(i) * inv_rms(i);
    }
    Tape& t = tape_of(a);
    Matrix yv = y;
    return t.record(std::move(y), {a}, [&t, a, yv, inv_rms, n](const Matrix& g) {
        Matrix dx(yv.rows(), yv.cols());
        for (Eigen::Index i = 0; i < yv.rows(); ++i) {
            const double proj = g.row(i).dot(yv.row(i)) / n;
            dx.row(i) = (g.row(i) - yv.row(i) * proj) * inv_rms(i);
        }
        t.accumulate(a, dx);
    });
}

Var gelu(Var a) {
    static constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
    static constexpr double k = 0.044715;
    const Matrix& x = a.value();
    Matrix th = (c * (x.array() + k * x.array().cube())).tanh().matrix();
    Matrix y = (0.5 * x.array() * (1.0 + th.array())).matrix();
    Tape& t = tape_of(a);
    return t.record(std::move(y), {a}, [&t, a, th](const Matrix& g) {
        const auto xa = a.value().array();
        const auto ta = th.array();
        auto dydx = 0.5 * (1.0 + ta) + 0.5 * xa * (1.0 - ta.square()) * c * (1.0 + 3.0 * k * xa.square());
        t.accumulate_expr(a, (g.array() * dydx).matrix());
    });
}

Var square(Var a) {
    Tape& t = tape_of(a);
    return t.record(a.value().array().square().matrix(), {a}, [&t, a](const Matrix& g) {
        t.accumulate_expr(a, (2.0 * g.array() * a.value().array()).matrix());
    });
}

Var causal_softmax_rows(Var scores) {
    const Matrix& s = scores.value();
    require(s.rows() <= s.cols(), "causal_softmax_rows: more rows than columns");
    Matrix p = Matrix::Zero(s.rows(), s.cols());
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const Eigen::Index n = i + 1 + (s.cols() - s.rows());
        const double m = s.row(i).head(n).maxCoeff();
        double z = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            p(i, j) = std::exp(s(i, j) - m);
            z += p(i, j);
        }
        p.row(i).head(n) /= z;
    }
    Tape& t = tape_of(scores);
    Matrix pv = p;
    return t.record(std::move(p), {scores}, [&t, scores, pv](const Matrix& g) {
        Matrix ds(pv.rows(), pv.cols());
        for (Eigen::Index i = 0; i < pv.rows(); ++i) {
            const double inner = g.row(i).dot(pv.row(i));
            ds.row(i) = pv.row(i).array() * (g.row(i).array() - inner);
        }
        t.accumulate(scores, ds);
    });
}

Var cross_entropy_rows(Var logits, std::span<const int> targets) {
    const Matrix& z = logits.value();
    require(static_cast<std::size_t>(z.rows()) == targets.size(),
            "cross_entropy_rows: one target per row required");
    require(z.rows() > 0, "cross_entropy_rows: no rows");
    Matrix probs(z.rows(), z.cols());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const int tgt = targets[static_cast<std::size_t>(i)];
        require(tgt >= 0 && tgt < z.cols(), "cross_entropy_rows: target out of range");
        const double m = z.row(i).maxCoeff();
        probs.row(i) = (z.row(i).array() - m).exp().matrix();
        const double sum_exp = probs.row(i).sum();
        probs.row(i) /= sum_exp;
        loss += (m + std::log(sum_exp)) - z(i, tgt);
    }
    const double rows = static_cast<double>(z.rows());
    Matrix value(1, 1);
    value(0, 0) = loss / rows;
    Tape& t = tape_of(logits);
    std::vector<int> tg(targets.begin(), targets.end());
    return t.record(std::move(value), {logits}, [&t, logits, probs, tg, rows](const Matrix& g) {
        Matrix dz = probs;
        for (std::size_t i = 0; i < tg.size(); ++i) dz(static_cast<Eigen::Index>(i), tg[i]) -= 1.0;
        t.accumulate_expr(logits, dz * (g(0, 0) / rows));
    });
}

Var mean_rows(Var a) {
    require(a.rows() > 0, "mean_rows: no rows");
    Tape& t = tape_of(a);
    return t.record(a.value().colwise().mean(), {a}, [&t, a](const Matrix& g) {
        t.accumulate_expr(a, g.replicate(a.rows(), 1) / static_cast<double>(a.rows()));
    });
}

Var sum(Var a) {
    Matrix v(1, 1);
    v(0, 0) = a.value().sum();
    Tape& t = tape_of(a);
    return t.record(std::move(v), {a}, [&t, a](const Matrix& g) {
        t.accumulate_expr(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
    });
}

Var normalize_rows(Var a) {
    const Matrix& x = a.value();
    Eigen::VectorXd norms = x.rowwise().norm();
    for (Eigen::Index i = 0; i < norms.size(); ++i) {
        if (!std::isfinite(norms(i))) throw Error(ErrorCode::NonFiniteLoss, "normalize_rows: non-finite row");
        if (norms(i) == 0.0) throw Error(ErrorCode::ZeroVector, "normalize_rows: zero row");
    }
    Matrix y = x.array().colwise() / norms.array();
    Tape& t = tape_of(a);
    Matrix yv = y;
    return t.record(std::move(y), {a}, [&t, a, yv, norms](const Matrix& g) {
        Matrix dx(yv.rows(), yv.cols());
        for (Eigen::Index i = 0; i < yv.rows(); ++i) {
            dx.row(i) = (g.row(i) - yv.row(i) * g.row(i).dot(yv.row(i))) / norms(i);
        }
        t.accumulate(a, dx);
    });
}

Var weighted_sum(Var a, const Matrix& weights) {
    require(a.rows() == weights.rows() && a.cols() == weights.cols(), "weighted_sum: shape mismatch");
    Matrix v(1, 1);
    v(0, 0) = (a.value().array() * weights.array()).sum();
    Tape& t = tape_of(a);
    return t.record(std::move(v), {a},
                    [&t, a, weights](const Matrix& g) { t.accumulate_expr(a, weights * g(0, 0)); });
}

Var weighted_sq_diff(Var a, const Matrix& anchor, const Matrix& weights) {
    require(a.rows() == anchor.rows() && a.cols() == anchor.cols() &&
                a.rows() == weights.rows() && a.cols() == weights.cols(),
            "weighted_sq_diff: shape mismatch");
    Matrix diff = a.value() - anchor;
    Matrix v(1, 1);
    v(0, 0) = (weights.array() * diff.array().square()).sum();
    Tape& t = tape_of(a);
    return t.record(std::move(v), {a}, [&t, a, diff, weights](const Matrix& g) {
        t.accumulate_expr(a, (2.0 * g(0, 0) * weights.array() * diff.array()).matrix());
    });
}

}  // namespace ticktack::ad
