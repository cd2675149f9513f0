#include "osfuse/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "osfuse/errors.hpp"

namespace osf::num {

namespace {

bool any_requires_grad(const std::vector<Var>& parents) {
    for (const auto& p : parents)
        if (p->requires_grad) return true;
    return false;
}

enum class Bcast { Same, AScalar, BScalar, BRow };

// b broadcasts against a: equal shapes, scalar either side, or b a length-n
// vector replicated over the rows of an m-by-n a.
Bcast broadcast_kind(const Tensor& a, const Tensor& b, const char* opname) {
    if (a.same_shape(b)) return Bcast::Same;
    if (b.is_scalar()) return Bcast::BScalar;
    if (a.is_scalar()) return Bcast::AScalar;
    if (a.rank() == 2 && b.size() == a.cols() && (b.rank() == 1 || (b.rank() == 2 && b.rows() == 1)))
        return Bcast::BRow;
    throw DimensionError(std::string(opname) + ": incompatible shapes " + a.shape_str() + " and " +
                         b.shape_str());
}

double bval(const Tensor& b, Bcast k, std::size_t i, std::size_t cols) {
    switch (k) {
        case Bcast::Same: return b[i];
        case Bcast::BScalar: return b[0];
        case Bcast::BRow: return b[i % cols];
        default: return 0.0;  // unreachable for b-side lookup
    }
}

Var unary(const Var& a, const std::function<double(double)>& f,
          const std::function<double(double, double)>& dfdx_from_x_y) {
    Tensor out(a->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a->value[i]);
    return make_op(std::move(out), {a}, [dfdx_from_x_y](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        Tensor g(pa.value.shape());
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] = self.grad[i] * dfdx_from_x_y(pa.value[i], self.value[i]);
        pa.add_grad(g);
    });
}

}  // namespace

Var constant(Tensor v) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->requires_grad = false;
    return n;
}

Var parameter(Tensor v, std::string name) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->requires_grad = true;
    n->name = std::move(name);
    return n;
}

Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    n->requires_grad = any_requires_grad(n->parents);
    if (n->requires_grad) n->backprop = std::move(backprop);
    return n;
}

Var add(const Var& a, const Var& b) {
    Bcast k = broadcast_kind(a->value, b->value, "add");
    if (k == Bcast::AScalar) return add(b, a);
    const std::size_t cols = (k == Bcast::BRow) ? a->value.cols() : 0;
    Tensor out(a->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] + bval(b->value, k, i, cols);
    return make_op(std::move(out), {a, b}, [k, cols](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) pa.add_grad(self.grad);
        if (pb.requires_grad) {
            Tensor g(pb.value.shape());
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                std::size_t j = (k == Bcast::Same) ? i : (k == Bcast::BScalar ? 0 : i % cols);
                g[j] += self.grad[i];
            }
            pb.add_grad(g);
        }
    });
}

Var neg(const Var& a) {
    return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var sub(const Var& a, const Var& b) { return add(a, neg(b)); }

Var mul(const Var& a, const Var& b) {
    Bcast k = broadcast_kind(a->value, b->value, "mul");
    if (k == Bcast::AScalar) return mul(b, a);
    const std::size_t cols = (k == Bcast::BRow) ? a->value.cols() : 0;
    Tensor out(a->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * bval(b->value, k, i, cols);
    return make_op(std::move(out), {a, b}, [k, cols](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) {
            Tensor g(pa.value.shape());
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] = self.grad[i] * bval(pb.value, k, i, cols);
            pa.add_grad(g);
        }
        if (pb.requires_grad) {
            Tensor g(pb.value.shape());
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                std::size_t j = (k == Bcast::Same) ? i : (k == Bcast::BScalar ? 0 : i % cols);
                g[j] += self.grad[i] * pa.value[i];
            }
            pb.add_grad(g);
        }
    });
}

Var div(const Var& a, const Var& b) {
    Bcast k = broadcast_kind(a->value, b->value, "div");
    if (k == Bcast::AScalar) {
        // scalar / tensor: fall back to mul by reciprocal
        Tensor rec(b->value.shape());
        for (std::size_t i = 0; i < rec.size(); ++i) rec[i] = 1.0;
        return mul(a, div(constant(std::move(rec)), b));
    }
    const std::size_t cols = (k == Bcast::BRow) ? a->value.cols() : 0;
    Tensor out(a->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] / bval(b->value, k, i, cols);
    return make_op(std::move(out), {a, b}, [k, cols](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) {
            Tensor g(pa.value.shape());
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] = self.grad[i] / bval(pb.value, k, i, cols);
            pa.add_grad(g);
        }
        if (pb.requires_grad) {
            Tensor g(pb.value.shape());
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                std::size_t j = (k == Bcast::Same) ? i : (k == Bcast::BScalar ? 0 : i % cols);
                const double bv = bval(pb.value, k, i, cols);
                g[j] += -self.grad[i] * pa.value[i] / (bv * bv);
            }
            pb.add_grad(g);
        }
    });
}

Var scale(const Var& a, double s) { return mul(a, constant(Tensor::scalar(s))); }
Var add_scalar(const Var& a, double s) { return add(a, constant(Tensor::scalar(s))); }

Var matmul(const Var& a, const Var& b) {
    Tensor out = num::matmul(a->value, b->value);
    return make_op(std::move(out), {a, b}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) pa.add_grad(num::matmul(self.grad, num::transpose(pb.value)));
        if (pb.requires_grad) pb.add_grad(num::matmul(num::transpose(pa.value), self.grad));
    });
}

Var transpose(const Var& a) {
    return make_op(num::transpose(a->value), {a}, [](Node& self) {
        Node& pa = *self.parents[0];
        if (pa.requires_grad) pa.add_grad(num::transpose(self.grad));
    });
}

Var exp(const Var& a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
    return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sqrt(const Var& a) {
    return unary(a, [](double x) { return std::sqrt(x); },
                 [](double, double y) { return 0.5 / y; });
}

Var sin(const Var& a) {
    return unary(a, [](double x) { return std::sin(x); },
                 [](double x, double) { return std::cos(x); });
}

Var cos(const Var& a) {
    return unary(a, [](double x) { return std::cos(x); },
                 [](double x, double) { return -std::sin(x); });
}

Var sigmoid(const Var& a) {
    return unary(a,
                 [](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                                              : std::exp(x) / (1.0 + std::exp(x)); },
                 [](double, double y) { return y * (1.0 - y); });
}

Var softplus(const Var& a) {
    // log(1+e^x), overflow-safe; derivative is the sigmoid.
    return unary(a,
                 [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
                 [](double x, double) {
                     return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
                 });
}

Var tanh(const Var& a) {
    return unary(a, [](double x) { return std::tanh(x); },
                 [](double, double y) { return 1.0 - y * y; });
}

Var softmax_lastdim(const Var& a) {
    Tensor out = num::softmax_lastdim(a->value);
    const std::size_t d = a->value.shape().back();
    return make_op(std::move(out), {a}, [d](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        Tensor g(pa.value.shape());
        const std::size_t outer = g.size() / d;
        for (std::size_t o = 0; o < outer; ++o) {
            const std::size_t base = o * d;
            double dot = 0.0;
            for (std::size_t i = 0; i < d; ++i) dot += self.grad[base + i] * self.value[base + i];
            for (std::size_t i = 0; i < d; ++i)
                g[base + i] = self.value[base + i] * (self.grad[base + i] - dot);
        }
        pa.add_grad(g);
    });
}

Var sum(const Var& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a->value.size(); ++i) s += a->value[i];
    return make_op(Tensor::scalar(s), {a}, [](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        Tensor g = Tensor::full(pa.value.shape(), self.grad[0]);
        pa.add_grad(g);
    });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a->value.size())); }

Var mean_rows(const Var& a) {
    const std::size_t m = a->value.rows(), n = a->value.cols();
    Tensor out({1, n});
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) out[c] += a->value[r * n + c] / static_cast<double>(m);
    return make_op(std::move(out), {a}, [m, n](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        Tensor g(pa.value.shape());
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < n; ++c) g[r * n + c] = self.grad[c] / static_cast<double>(m);
        pa.add_grad(g);
    });
}

Var reshape(const Var& a, std::vector<std::size_t> shape) {
    Tensor out(std::move(shape), a->value.data());
    return make_op(std::move(out), {a}, [](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        pa.add_grad(Tensor(pa.value.shape(), self.grad.data()));
    });
}

Var gather_rows(const Var& a, std::vector<std::size_t> idx) {
    const std::size_t n = a->value.cols();
    Tensor out({idx.size(), n});
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] >= a->value.rows())
            throw ContractError("gather_rows: index " + std::to_string(idx[r]) + " out of range");
        for (std::size_t c = 0; c < n; ++c) out[r * n + c] = a->value[idx[r] * n + c];
    }
    return make_op(std::move(out), {a}, [idx = std::move(idx), n](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        Tensor g(pa.value.shape());
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t c = 0; c < n; ++c) g[idx[r] * n + c] += self.grad[r * n + c];
        pa.add_grad(g);
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: empty input");
    auto part_rows = [](const Tensor& t) {
        return t.rank() == 1 ? std::size_t{1} : t.rows();
    };
    auto part_cols = [](const Tensor& t) {
        return t.rank() == 1 ? t.size() : t.cols();
    };
    const std::size_t n = part_cols(parts[0]->value);
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (part_cols(p->value) != n)
            throw DimensionError("concat_rows: column mismatch " + p->value.shape_str());
        total += part_rows(p->value);
    }
    Tensor out({total, n});
    std::size_t row = 0;
    for (const auto& p : parts) {
        const std::size_t m = part_rows(p->value);
        for (std::size_t i = 0; i < m * n; ++i) out[row * n + i] = p->value[i];
        row += m;
    }
    std::vector<Var> parents(parts.begin(), parts.end());
    return make_op(std::move(out), std::move(parents), [n](Node& self) {
        std::size_t row = 0;
        for (auto& p : self.parents) {
            const std::size_t m = p->value.rank() == 1 ? 1 : p->value.rows();
            if (p->requires_grad) {
                Tensor g(p->value.shape());
                for (std::size_t i = 0; i < m * n; ++i) g[i] = self.grad[row * n + i];
                p->add_grad(g);
            }
            row += m;
        }
    });
}

Var pick(const Var& a, std::size_t flat_index) {
    if (flat_index >= a->value.size())
        throw ContractError("pick: index " + std::to_string(flat_index) + " out of range for " +
                            a->value.shape_str());
    return make_op(Tensor::scalar(a->value[flat_index]), {a}, [flat_index](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        Tensor g(pa.value.shape());
        g[flat_index] = self.grad[0];
        pa.add_grad(g);
    });
}

namespace {

void topo_order(const Var& root, std::vector<Node*>& order) {
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (!seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
}

}  // namespace

void backward(const Var& loss) {
    if (!loss->value.is_scalar())
        throw ContractError("backward: loss must be scalar, got " + loss->value.shape_str());
    std::vector<Node*> order;
    topo_order(loss, order);
    loss->ensure_grad();
    loss->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->requires_grad && n->backprop) {
            n->ensure_grad();
            n->backprop(*n);
        }
    }
}

void zero_grad(const std::vector<Var>& params) {
    for (const auto& p : params) p->grad = Tensor::zeros(p->value.shape());
}

GradRecord record_gradients(const Var& loss, const std::vector<Var>& params) {
    zero_grad(params);
    backward(loss);
    GradRecord rec;
    for (const auto& p : params) {
        rec.names.push_back(p->name);
        rec.params.push_back(p->value);
        p->ensure_grad();
        rec.grads.push_back(p->grad);
    }
    return rec;
}

double finite_diff_check(const std::function<Var(const std::vector<Var>&)>& op,
                         const std::vector<Var>& params, double eps) {
    if (eps <= 0.0) throw ContractError("finite_diff_check: eps must be positive");
    Var out = op(params);
    if (!out->value.is_scalar())
        throw ContractError("finite_diff_check: op must return a scalar, got " +
                            out->value.shape_str());
    GradRecord rec = record_gradients(out, params);

    double max_rel = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& v = params[p]->value;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double saved = v[i];
            v[i] = saved + eps;
            const double fp = op(params)->value[0];
            v[i] = saved - eps;
            const double fm = op(params)->value[0];
            v[i] = saved;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double analytic = rec.grads[p][i];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
        }
    }
    return max_rel;
}

}  // namespace osf::num
