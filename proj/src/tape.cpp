#include "remede/tape.hpp"

#include <algorithm>
#include <cmath>

namespace remede {

Var Tape::input(Tensor value) {
    nodes_.push_back(Node{std::move(value), nullptr});
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Tensor value, BackwardFn back) {
    nodes_.push_back(Node{std::move(value), std::move(back)});
    return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(Var v, const Tensor& g) {
    Tensor& slot = grads_[v.id];
    for (std::size_t i = 0; i < g.size(); ++i) slot.values[i] += g.values[i];
}

void Tape::accumulate_at(Var v, std::size_t index, double g) {
    grads_[v.id].values[index] += g;
}

void Tape::backward(Var loss) {
    if (!loss.valid() || static_cast<std::size_t>(loss.id) >= nodes_.size())
        throw std::invalid_argument("backward: loss not on this tape");
    if (nodes_[loss.id].value.size() != 1)
        throw std::invalid_argument("backward: loss must be scalar");

    grads_.assign(nodes_.size(), Tensor{});
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        grads_[i] = Tensor::zeros(nodes_[i].value.shape);
    grads_[loss.id].values[0] = 1.0;

    for (int i = loss.id; i >= 0; --i) {
        if (!nodes_[i].back) continue;
        nodes_[i].back(*this, grads_[i]);
    }
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_str(a) + " vs " + shape_str(b));
}

}  // namespace

Var add(Tape& t, Var a, Var b) {
    const Tensor& av = t.val(a);
    const Tensor& bv = t.val(b);
    require_same_shape(av, bv, "add");
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += bv.values[i];
    return t.record(std::move(out), [a, b](Tape& tp, const Tensor& g) {
        tp.accumulate(a, g);
        tp.accumulate(b, g);
    });
}

Var sub(Tape& t, Var a, Var b) {
    const Tensor& av = t.val(a);
    const Tensor& bv = t.val(b);
    require_same_shape(av, bv, "sub");
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] -= bv.values[i];
    return t.record(std::move(out), [a, b](Tape& tp, const Tensor& g) {
        tp.accumulate(a, g);
        for (std::size_t i = 0; i < g.size(); ++i) tp.accumulate_at(b, i, -g.values[i]);
    });
}

Var mul(Tape& t, Var a, Var b) {
    const Tensor& av = t.val(a);
    const Tensor& bv = t.val(b);
    require_same_shape(av, bv, "mul");
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] *= bv.values[i];
    return t.record(std::move(out), [a, b](Tape& tp, const Tensor& g) {
        const Tensor& av2 = tp.val(a);
        const Tensor& bv2 = tp.val(b);
        for (std::size_t i = 0; i < g.size(); ++i) {
            tp.accumulate_at(a, i, g.values[i] * bv2.values[i]);
            tp.accumulate_at(b, i, g.values[i] * av2.values[i]);
        }
    });
}

Var scale(Tape& t, Var a, double c) {
    Tensor out = t.val(a);
    for (double& v : out.values) v *= c;
    return t.record(std::move(out), [a, c](Tape& tp, const Tensor& g) {
        for (std::size_t i = 0; i < g.size(); ++i) tp.accumulate_at(a, i, c * g.values[i]);
    });
}

Var sum(Tape& t, Var a) {
    double s = 0.0;
    for (double v : t.val(a).values) s += v;
    return t.record(Tensor::scalar(s), [a](Tape& tp, const Tensor& g) {
        const std::size_t n = tp.val(a).size();
        for (std::size_t i = 0; i < n; ++i) tp.accumulate_at(a, i, g.values[0]);
    });
}

Var matvec(Tape& t, Var w, Var v) {
    const Tensor& wv = t.val(w);
    const Tensor& vv = t.val(v);
    if (wv.rank() != 2 || vv.rank() != 1 || wv.cols() != vv.size())
        throw std::invalid_argument("matvec: dimension mismatch " + shape_str(wv) +
                                    " * " + shape_str(vv));
    const std::size_t m = wv.rows(), n = wv.cols();
    Tensor out = Tensor::zeros({m});
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        const double* wrow = wv.values.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) s += wrow[j] * vv.values[j];
        out.values[i] = s;
    }
    return t.record(std::move(out), [w, v, m, n](Tape& tp, const Tensor& g) {
        const Tensor& wv2 = tp.val(w);
        const Tensor& vv2 = tp.val(v);
        for (std::size_t i = 0; i < m; ++i) {
            const double gi = g.values[i];
            if (gi == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                tp.accumulate_at(w, i * n + j, gi * vv2.values[j]);
                tp.accumulate_at(v, j, gi * wv2.values[i * n + j]);
            }
        }
    });
}

Var matvec_t(Tape& t, Var w, Var v) {
    const Tensor& wv = t.val(w);
    const Tensor& vv = t.val(v);
    if (wv.rank() != 2 || vv.rank() != 1 || wv.rows() != vv.size())
        throw std::invalid_argument("matvec_t: dimension mismatch " + shape_str(wv) +
                                    "^T * " + shape_str(vv));
    const std::size_t m = wv.rows(), n = wv.cols();
    Tensor out = Tensor::zeros({n});
    for (std::size_t i = 0; i < m; ++i) {
        const double vi = vv.values[i];
        if (vi == 0.0) continue;
        const double* wrow = wv.values.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) out.values[j] += wrow[j] * vi;
    }
    return t.record(std::move(out), [w, v, m, n](Tape& tp, const Tensor& g) {
        const Tensor& wv2 = tp.val(w);
        const Tensor& vv2 = tp.val(v);
        for (std::size_t i = 0; i < m; ++i) {
            double gv = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                tp.accumulate_at(w, i * n + j, vv2.values[i] * g.values[j]);
                gv += wv2.values[i * n + j] * g.values[j];
            }
            tp.accumulate_at(v, i, gv);
        }
    });
}

Var row_dot(Tape& t, Var a, Var b) {
    const Tensor& av = t.val(a);
    const Tensor& bv = t.val(b);
    require_same_shape(av, bv, "row_dot");
    if (av.rank() != 2) throw std::invalid_argument("row_dot: matrices required");
    const std::size_t m = av.rows(), n = av.cols();
    Tensor out = Tensor::zeros({m});
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += av.values[i * n + j] * bv.values[i * n + j];
        out.values[i] = s;
    }
    return t.record(std::move(out), [a, b, m, n](Tape& tp, const Tensor& g) {
        const Tensor& av2 = tp.val(a);
        const Tensor& bv2 = tp.val(b);
        for (std::size_t i = 0; i < m; ++i) {
            const double gi = g.values[i];
            if (gi == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                tp.accumulate_at(a, i * n + j, gi * bv2.values[i * n + j]);
                tp.accumulate_at(b, i * n + j, gi * av2.values[i * n + j]);
            }
        }
    });
}

Var row(Tape& t, Var m, std::size_t i) {
    const Tensor& mv = t.val(m);
    if (mv.rank() != 2 || i >= mv.rows())
        throw std::invalid_argument("row: index out of range");
    const std::size_t n = mv.cols();
    Tensor out = Tensor::zeros({n});
    std::copy_n(mv.values.begin() + i * n, n, out.values.begin());
    return t.record(std::move(out), [m, i, n](Tape& tp, const Tensor& g) {
        for (std::size_t j = 0; j < n; ++j) tp.accumulate_at(m, i * n + j, g.values[j]);
    });
}

Var reshape(Tape& t, Var a, std::vector<std::size_t> shape) {
    const Tensor& av = t.val(a);
    if (Tensor::count(shape) != av.size())
        throw std::invalid_argument("reshape: element count mismatch");
    Tensor out(std::move(shape), av.values);
    return t.record(std::move(out), [a](Tape& tp, const Tensor& g) {
        for (std::size_t i = 0; i < g.size(); ++i) tp.accumulate_at(a, i, g.values[i]);
    });
}

Var concat(Tape& t, Var a, Var b) {
    const Tensor& av = t.val(a);
    const Tensor& bv = t.val(b);
    if (av.rank() != 1 || bv.rank() != 1)
        throw std::invalid_argument("concat: vectors required");
    Tensor out = Tensor::zeros({av.size() + bv.size()});
    std::copy(av.values.begin(), av.values.end(), out.values.begin());
    std::copy(bv.values.begin(), bv.values.end(), out.values.begin() + av.size());
    const std::size_t na = av.size(), nb = bv.size();
    return t.record(std::move(out), [a, b, na, nb](Tape& tp, const Tensor& g) {
        for (std::size_t i = 0; i < na; ++i) tp.accumulate_at(a, i, g.values[i]);
        for (std::size_t i = 0; i < nb; ++i) tp.accumulate_at(b, i, g.values[na + i]);
    });
}

double sigmoid_scalar(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Var sigmoid(Tape& t, Var z) {
    Tensor out = t.val(z);
    for (double& v : out.values) v = sigmoid_scalar(v);
    Tensor cached = out;
    return t.record(std::move(out), [z, cached = std::move(cached)](Tape& tp, const Tensor& g) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double s = cached.values[i];
            tp.accumulate_at(z, i, g.values[i] * s * (1.0 - s));
        }
    });
}

Var tanh_act(Tape& t, Var z) {
    Tensor out = t.val(z);
    for (double& v : out.values) v = std::tanh(v);
    Tensor cached = out;
    return t.record(std::move(out), [z, cached = std::move(cached)](Tape& tp, const Tensor& g) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double th = cached.values[i];
            tp.accumulate_at(z, i, g.values[i] * (1.0 - th * th));
        }
    });
}

Var round_st(Tape& t, Var z) {
    Tensor out = t.val(z);
    if (!t.soft())
        for (double& v : out.values) v = std::round(v);
    return t.record(std::move(out), [z](Tape& tp, const Tensor& g) {
        tp.accumulate(z, g);  // straight through
    });
}

namespace {

std::vector<double> softmax_values(const std::vector<double>& logits) {
    std::vector<double> p = logits;
    softmax_inplace(p);
    return p;
}

// Accumulates softmax-Jacobian^T * g into the logits gradient.
void softmax_backward(Tape& tp, Var logits, const std::vector<double>& p,
                      const double* g, std::size_t offset, std::size_t n) {
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += g[i] * p[i];
    for (std::size_t i = 0; i < n; ++i)
        tp.accumulate_at(logits, offset + i, p[i] * (g[i] - dot));
}

}  // namespace

void softmax_inplace(std::vector<double>& v) {
    double mx = v[0];
    for (double x : v) mx = std::max(mx, x);
    double z = 0.0;
    for (double& x : v) {
        x = std::exp(x - mx);
        z += x;
    }
    for (double& x : v) x /= z;
}

std::size_t argmax_lowest(const double* v, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

std::size_t argmax_lowest(const std::vector<double>& v) {
    return argmax_lowest(v.data(), v.size());
}

Var hardmax_st(Tape& t, Var logits) {
    const Tensor& lv = t.val(logits);
    if (lv.rank() != 1 || lv.size() == 0)
        throw std::invalid_argument("hardmax_st: non-empty vector required");
    const std::size_t n = lv.size();
    std::vector<double> p = softmax_values(lv.values);
    Tensor out = Tensor::zeros({n});
    if (t.soft()) {
        out.values = p;
    } else {
        out.values[argmax_lowest(lv.values)] = 1.0;
    }
    return t.record(std::move(out), [logits, p = std::move(p), n](Tape& tp, const Tensor& g) {
        softmax_backward(tp, logits, p, g.values.data(), 0, n);
    });
}

Var rowwise_hardmax_st(Tape& t, Var logits) {
    const Tensor& lv = t.val(logits);
    if (lv.rank() != 2) throw std::invalid_argument("rowwise_hardmax_st: matrix required");
    const std::size_t m = lv.rows(), n = lv.cols();
    Tensor out = Tensor::zeros({m, n});
    std::vector<double> probs(m * n);
    std::vector<double> rowbuf(n);
    for (std::size_t i = 0; i < m; ++i) {
        std::copy_n(lv.values.begin() + i * n, n, rowbuf.begin());
        softmax_inplace(rowbuf);
        std::copy_n(rowbuf.begin(), n, probs.begin() + i * n);
        if (t.soft()) {
            std::copy_n(rowbuf.begin(), n, out.values.begin() + i * n);
        } else {
            out.values[i * n + argmax_lowest(lv.values.data() + i * n, n)] = 1.0;
        }
    }
    return t.record(std::move(out),
                    [logits, probs = std::move(probs), m, n](Tape& tp, const Tensor& g) {
                        std::vector<double> prow(n);
                        for (std::size_t i = 0; i < m; ++i) {
                            std::copy_n(probs.begin() + i * n, n, prow.begin());
                            softmax_backward(tp, logits, prow, g.values.data() + i * n,
                                             i * n, n);
                        }
                    });
}

Var softmax(Tape& t, Var logits) {
    const Tensor& lv = t.val(logits);
    if (lv.rank() != 1) throw std::invalid_argument("softmax: vector required");
    std::vector<double> p = softmax_values(lv.values);
    Tensor out = Tensor::vector(p);
    return t.record(std::move(out),
                    [logits, p = std::move(p)](Tape& tp, const Tensor& g) {
                        softmax_backward(tp, logits, p, g.values.data(), 0, p.size());
                    });
}

Var cross_entropy(Tape& t, Var logits, std::size_t target) {
    const Tensor& lv = t.val(logits);
    if (lv.rank() != 1) throw std::invalid_argument("cross_entropy: vector required");
    if (target >= lv.size())
        throw std::invalid_argument("cross_entropy: target index out of range");
    std::vector<double> p = softmax_values(lv.values);
    const double loss = -std::log(std::max(p[target], 1e-300));
    return t.record(Tensor::scalar(loss),
                    [logits, target, p = std::move(p)](Tape& tp, const Tensor& g) {
                        for (std::size_t i = 0; i < p.size(); ++i) {
                            const double onehot = (i == target) ? 1.0 : 0.0;
                            tp.accumulate_at(logits, i, g.values[0] * (p[i] - onehot));
                        }
                    });
}

}  // namespace remede
