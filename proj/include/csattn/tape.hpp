#pragma once

#include <deque>
#include <functional>

#include "csattn/tensor.hpp"

namespace csattn {

template <typename T>
class Tape;

// Handle into the active tape. Cheap to copy; valid while the tape lives.
template <typename T>
struct Var {
    Tape<T>* tape = nullptr;
    std::int32_t id = -1;
};

// Record of executed operations in topological order. Node values are
// immutable once recorded; backward() replays the ops in reverse order and
// accumulates gradients for every node that requires them. One tape per
// logical execution context; not shared across threads.
template <typename T>
class Tape {
public:
    Var<T> leaf(Tensor<T> value, bool requires_grad = false) {
        return emit(std::move(value), requires_grad, nullptr, "leaf", false);
    }

    const Tensor<T>& val(Var<T> v) const { return nodes_[check(v)].value; }

    bool requires_grad(Var<T> v) const { return nodes_[check(v)].requires_grad; }

    // Valid after backward(); zero tensor if the node was never reached.
    const Tensor<T>& grad(Var<T> v) {
        std::size_t i = check(v);
        if (grads_[i].data.empty()) grads_[i] = Tensor<T>(nodes_[i].value.shape);
        return grads_[i];
    }

    void backward(Var<T> root) {
        std::size_t r = check(root);
        if (nodes_[r].value.size() != 1) {
            throw std::runtime_error("backward: root must be scalar, got " + shape_str(nodes_[r].value.shape));
        }
        if (!nodes_[r].requires_grad) {
            throw std::runtime_error("backward: root does not depend on any differentiable input");
        }
        accumulate(static_cast<std::int32_t>(r), Tensor<T>::scalar(T(1)));
        for (std::int64_t i = static_cast<std::int64_t>(r); i >= 0; --i) {
            auto& node = nodes_[static_cast<std::size_t>(i)];
            if (!node.requires_grad || grads_[static_cast<std::size_t>(i)].data.empty()) continue;
            if (node.backward) node.backward(*this);
        }
    }

    std::size_t node_count() const { return nodes_.size(); }

    // Id the next emitted node will get; ops capture it in their backward
    // closure before calling emit().
    std::int32_t next_id() const { return static_cast<std::int32_t>(nodes_.size()); }

    Var<T> emit(Tensor<T> value, bool requires_grad, std::function<void(Tape&)> backward, const char* op,
                bool check_finite = true) {
        if (check_finite && !all_finite(value)) {
            throw std::runtime_error(std::string("non-finite values produced by op '") + op + "'");
        }
        nodes_.push_back(Node{std::move(value), requires_grad, std::move(backward)});
        grads_.emplace_back();
        return Var<T>{this, static_cast<std::int32_t>(nodes_.size() - 1)};
    }

    void accumulate(std::int32_t id, const Tensor<T>& g) {
        auto& slot = grads_[static_cast<std::size_t>(id)];
        if (slot.data.empty()) {
            slot = g;
            return;
        }
        for (std::size_t i = 0; i < slot.data.size(); ++i) slot.data[i] += g.data[i];
    }

    // In-place accumulation target, allocated zeroed on first touch.
    Tensor<T>& grad_slot(std::int32_t id) {
        auto& slot = grads_[static_cast<std::size_t>(id)];
        if (slot.data.empty()) slot = Tensor<T>(nodes_[static_cast<std::size_t>(id)].value.shape);
        return slot;
    }

    const Tensor<T>& value_of(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)].value; }

private:
    struct Node {
        Tensor<T> value;
        bool requires_grad;
        std::function<void(Tape&)> backward;
    };

    std::size_t check(Var<T> v) const {
        if (v.tape != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
            throw std::runtime_error("var does not belong to this tape");
        }
        return static_cast<std::size_t>(v.id);
    }

    // Deques: emitting new nodes must not invalidate references handed out
    // for earlier values (ops hold them across emits).
    std::deque<Node> nodes_;
    std::deque<Tensor<T>> grads_;
};

namespace detail {

template <typename T>
inline Tape<T>& same_tape(Var<T> a, Var<T> b) {
    if (a.tape == nullptr || a.tape != b.tape) throw std::runtime_error("operands belong to different tapes");
    return *a.tape;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops. Tensor-tensor forms require equal shapes; the only
// broadcast is scalar-tensor (scale / add_scalar).
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    Tape<T>& tape = detail::same_tape(a, b);
    const Tensor<T>& x = tape.val(a);
    const Tensor<T>& y = tape.val(b);
    if (!x.same_shape(y)) {
        throw std::runtime_error("add: shape mismatch " + shape_str(x.shape) + " vs " + shape_str(y.shape));
    }
    Tensor<T> out(x.shape);
    for (std::int64_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];

    const bool ra = tape.requires_grad(a), rb = tape.requires_grad(b);
    std::function<void(Tape<T>&)> bwd;
    if (ra || rb) {
        const std::int32_t oid = tape.next_id(), aid = a.id, bid = b.id;
        bwd = [oid, aid, bid, ra, rb](Tape<T>& t) {
            const Tensor<T>& g = t.grad_slot(oid);
            if (ra) t.accumulate(aid, g);
            if (rb) t.accumulate(bid, g);
        };
    }
    return tape.emit(std::move(out), ra || rb, std::move(bwd), "add");
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
    Tape<T>& tape = detail::same_tape(a, b);
    const Tensor<T>& x = tape.val(a);
    const Tensor<T>& y = tape.val(b);
    if (!x.same_shape(y)) {
        throw std::runtime_error("sub: shape mismatch " + shape_str(x.shape) + " vs " + shape_str(y.shape));
    }
    Tensor<T> out(x.shape);
    for (std::int64_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];

    const bool ra = tape.requires_grad(a), rb = tape.requires_grad(b);
    std::function<void(Tape<T>&)> bwd;
    if (ra || rb) {
        const std::int32_t oid = tape.next_id(), aid = a.id, bid = b.id;
        bwd = [oid, aid, bid, ra, rb](Tape<T>& t) {
            const Tensor<T>& g = t.grad_slot(oid);
            if (ra) t.accumulate(aid, g);
            if (rb) {
                Tensor<T>& gb = t.grad_slot(bid);
                for (std::int64_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
        };
    }
    return tape.emit(std::move(out), ra || rb, std::move(bwd), "sub");
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
    Tape<T>& tape = detail::same_tape(a, b);
    const Tensor<T>& x = tape.val(a);
    const Tensor<T>& y = tape.val(b);
    if (!x.same_shape(y)) {
        throw std::runtime_error("mul: shape mismatch " + shape_str(x.shape) + " vs " + shape_str(y.shape));
    }
    Tensor<T> out(x.shape);
    for (std::int64_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];

    const bool ra = tape.requires_grad(a), rb = tape.requires_grad(b);
    std::function<void(Tape<T>&)> bwd;
    if (ra || rb) {
        const std::int32_t oid = tape.next_id(), aid = a.id, bid = b.id;
        bwd = [oid, aid, bid, ra, rb](Tape<T>& t) {
            const Tensor<T>& g = t.grad_slot(oid);
            if (ra) {
                const Tensor<T>& yv = t.value_of(bid);
                Tensor<T>& ga = t.grad_slot(aid);
                for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * yv[i];
            }
            if (rb) {
                const Tensor<T>& xv = t.value_of(aid);
                Tensor<T>& gb = t.grad_slot(bid);
                for (std::int64_t i = 0; i < g.size(); ++i) gb[i] += g[i] * xv[i];
            }
        };
    }
    return tape.emit(std::move(out), ra || rb, std::move(bwd), "mul");
}

template <typename T>
Var<T> scale(Var<T> a, T c) {
    Tape<T>& tape = *a.tape;
    const Tensor<T>& x = tape.val(a);
    Tensor<T> out(x.shape);
    for (std::int64_t i = 0; i < x.size(); ++i) out[i] = x[i] * c;

    const bool ra = tape.requires_grad(a);
    std::function<void(Tape<T>&)> bwd;
    if (ra) {
        const std::int32_t oid = tape.next_id(), aid = a.id;
        bwd = [oid, aid, c](Tape<T>& t) {
            const Tensor<T>& g = t.grad_slot(oid);
            Tensor<T>& ga = t.grad_slot(aid);
            for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
        };
    }
    return tape.emit(std::move(out), ra, std::move(bwd), "scale");
}

template <typename T>
Var<T> add_scalar(Var<T> a, T c) {
    Tape<T>& tape = *a.tape;
    const Tensor<T>& x = tape.val(a);
    Tensor<T> out(x.shape);
    for (std::int64_t i = 0; i < x.size(); ++i) out[i] = x[i] + c;

    const bool ra = tape.requires_grad(a);
    std::function<void(Tape<T>&)> bwd;
    if (ra) {
        const std::int32_t oid = tape.next_id(), aid = a.id;
        bwd = [oid, aid](Tape<T>& t) { t.accumulate(aid, t.grad_slot(oid)); };
    }
    return tape.emit(std::move(out), ra, std::move(bwd), "add_scalar");
}

// ---------------------------------------------------------------------------
// Matrix multiplication, rank 2 (m,k)x(k,n) or rank 3 batched (b,m,k)x(b,k,n).
// Summation runs in ascending k for every output element, so results are
// bit-reproducible independent of the thread count.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void matmul_kernel(const T* a, const T* b, T* out, std::int64_t batch, std::int64_t m, std::int64_t k,
                   std::int64_t n) {
#pragma omp parallel for schedule(static) collapse(2) if (batch * m * n * k > 2097152)
    for (std::int64_t bi = 0; bi < batch; ++bi) {
        for (std::int64_t i = 0; i < m; ++i) {
            const T* arow = a + (bi * m + i) * k;
            T* orow = out + (bi * m + i) * n;
            for (std::int64_t j = 0; j < n; ++j) orow[j] = T(0);
            for (std::int64_t kk = 0; kk < k; ++kk) {
                const T av = arow[kk];
                const T* brow = b + (bi * k + kk) * n;
                for (std::int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
            }
        }
    }
}

}  // namespace detail

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
    Tape<T>& tape = detail::same_tape(a, b);
    const Tensor<T>& x = tape.val(a);
    const Tensor<T>& y = tape.val(b);
    if (x.rank() != y.rank() || (x.rank() != 2 && x.rank() != 3)) {
        throw std::runtime_error("matmul: expects matching rank 2 or 3, got " + shape_str(x.shape) + " x " +
                                 shape_str(y.shape));
    }
    const bool batched = x.rank() == 3;
    const std::int64_t batch = batched ? x.shape[0] : 1;
    const std::int64_t m = x.shape[batched ? 1 : 0];
    const std::int64_t k = x.shape[batched ? 2 : 1];
    const std::int64_t k2 = y.shape[batched ? 1 : 0];
    const std::int64_t n = y.shape[batched ? 2 : 1];
    if (k != k2 || (batched && y.shape[0] != batch)) {
        throw std::runtime_error("matmul: dimension mismatch " + shape_str(x.shape) + " x " + shape_str(y.shape));
    }

    Shape oshape = batched ? Shape{batch, m, n} : Shape{m, n};
    Tensor<T> out(std::move(oshape));
    detail::matmul_kernel(x.data.data(), y.data.data(), out.data.data(), batch, m, k, n);

    const bool ra = tape.requires_grad(a), rb = tape.requires_grad(b);
    std::function<void(Tape<T>&)> bwd;
    if (ra || rb) {
        const std::int32_t oid = tape.next_id(), aid = a.id, bid = b.id;
        bwd = [oid, aid, bid, ra, rb, batch, m, k, n](Tape<T>& t) {
            const Tensor<T>& g = t.grad_slot(oid);
            if (ra) {
                // dA[i,kk] += sum_j g[i,j] * B[kk,j]
                const Tensor<T>& bv = t.value_of(bid);
                Tensor<T>& ga = t.grad_slot(aid);
#pragma omp parallel for schedule(static) collapse(2) if (batch * m * n * k > 2097152)
                for (std::int64_t bi = 0; bi < batch; ++bi) {
                    for (std::int64_t i = 0; i < m; ++i) {
                        const T* grow = g.data.data() + (bi * m + i) * n;
                        T* garow = ga.data.data() + (bi * m + i) * k;
                        for (std::int64_t kk = 0; kk < k; ++kk) {
                            const T* brow = bv.data.data() + (bi * k + kk) * n;
                            T acc = T(0);
                            for (std::int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                            garow[kk] += acc;
                        }
                    }
                }
            }
            if (rb) {
                // dB[kk,j] += sum_i A[i,kk] * g[i,j]
                const Tensor<T>& av = t.value_of(aid);
                Tensor<T>& gb = t.grad_slot(bid);
#pragma omp parallel for schedule(static) collapse(2) if (batch * k * n * m > 2097152)
                for (std::int64_t bi = 0; bi < batch; ++bi) {
                    for (std::int64_t kk = 0; kk < k; ++kk) {
                        T* gbrow = gb.data.data() + (bi * k + kk) * n;
                        for (std::int64_t i = 0; i < m; ++i) {
                            const T aval = av.data[static_cast<std::size_t>((bi * m + i) * k + kk)];
                            const T* grow = g.data.data() + (bi * m + i) * n;
                            for (std::int64_t j = 0; j < n; ++j) gbrow[j] += aval * grow[j];
                        }
                    }
                }
            }
        };
    }
    return tape.emit(std::move(out), ra || rb, std::move(bwd), "matmul");
}

// ---------------------------------------------------------------------------
// Softmax over the last axis, max-subtracted.
// ---------------------------------------------------------------------------

template <typename T>
Var<T> softmax_lastdim(Var<T> a) {
    Tape<T>& tape = *a.tape;
    const Tensor<T>& x = tape.val(a);
    if (x.rank() < 1) throw std::runtime_error("softmax_lastdim: rank must be >= 1");
    const std::int64_t n = x.shape.back();
    const std::int64_t slices = x.size() / n;
    if (!all_finite(x)) throw std::runtime_error("softmax_lastdim: non-finite input");

    Tensor<T> out(x.shape);
    for (std::int64_t s = 0; s < slices; ++s) {
        const T* xi = x.data.data() + s * n;
        T* yi = out.data.data() + s * n;
        T mx = xi[0];
        for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, xi[j]);
        T sum = T(0);
        for (std::int64_t j = 0; j < n; ++j) {
            yi[j] = std::exp(xi[j] - mx);
            sum += yi[j];
        }
        const T inv = T(1) / sum;
        for (std::int64_t j = 0; j < n; ++j) yi[j] *= inv;
    }

    const bool ra = tape.requires_grad(a);
    std::function<void(Tape<T>&)> bwd;
    if (ra) {
        const std::int32_t oid = tape.next_id(), aid = a.id;
        bwd = [oid, aid, slices, n](Tape<T>& t) {
            const Tensor<T>& g = t.grad_slot(oid);
            const Tensor<T>& y = t.value_of(oid);
            Tensor<T>& ga = t.grad_slot(aid);
            for (std::int64_t s = 0; s < slices; ++s) {
                const T* yi = y.data.data() + s * n;
                const T* gi = g.data.data() + s * n;
                T* gai = ga.data.data() + s * n;
                T dot = T(0);
                for (std::int64_t j = 0; j < n; ++j) dot += gi[j] * yi[j];
                for (std::int64_t j = 0; j < n; ++j) gai[j] += yi[j] * (gi[j] - dot);
            }
        };
    }
    return tape.emit(std::move(out), ra, std::move(bwd), "softmax_lastdim");
}

// ---------------------------------------------------------------------------
// Shape ops: data movement only, backward is the inverse movement.
// ---------------------------------------------------------------------------

template <typename T>
Var<T> reshape(Var<T> a, Shape new_shape) {
    Tape<T>& tape = *a.tape;
    const Tensor<T>& x = tape.val(a);
    if (numel(new_shape) != x.size()) {
        throw std::runtime_error("reshape: element count mismatch " + shape_str(x.shape) + " -> " +
                                 shape_str(new_shape));
    }
    Tensor<T> out(new_shape, x.data);

    const bool ra = tape.requires_grad(a);
    std::function<void(Tape<T>&)> bwd;
    if (ra) {
        const std::int32_t oid = tape.next_id(), aid = a.id;
        bwd = [oid, aid](Tape<T>& t) {
            const Tensor<T>& g = t.grad_slot(oid);
            Tensor<T>& ga = t.grad_slot(aid);
            for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        };
    }
    return tape.emit(std::move(out), ra, std::move(bwd), "reshape", false);
}

namespace detail {

inline std::vector<std::int64_t> strides_of(const Shape& shape) {
    std::vector<std::int64_t> s(shape.size(), 1);
    for (std::int64_t i = static_cast<std::int64_t>(shape.size()) - 2; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = s[static_cast<std::size_t>(i + 1)] * shape[static_cast<std::size_t>(i + 1)];
    }
    return s;
}

// out[idx] = in[perm applied]; walks output linearly.
template <typename T>
void permute_copy(const T* in, T* out, const Shape& in_shape, const std::vector<std::int64_t>& perm) {
    const std::size_t r = in_shape.size();
    Shape out_shape(r);
    for (std::size_t i = 0; i < r; ++i) out_shape[i] = in_shape[static_cast<std::size_t>(perm[i])];
    const auto in_strides = strides_of(in_shape);
    std::vector<std::int64_t> src_stride(r);
    for (std::size_t i = 0; i < r; ++i) src_stride[i] = in_strides[static_cast<std::size_t>(perm[i])];

    const std::int64_t total = numel(out_shape);
    std::vector<std::int64_t> idx(r, 0);
    std::int64_t src = 0;
    for (std::int64_t o = 0; o < total; ++o) {
        out[o] = in[src];
        for (std::int64_t ax = static_cast<std::int64_t>(r) - 1; ax >= 0; --ax) {
            const std::size_t u = static_cast<std::size_t>(ax);
            ++idx[u];
            src += src_stride[u];
            if (idx[u] < out_shape[u]) break;
            src -= src_stride[u] * out_shape[u];
            idx[u] = 0;
        }
    }
}

}  // namespace detail

template <typename T>
Var<T> permute(Var<T> a, std::vector<std::int64_t> perm) {
    Tape<T>& tape = *a.tape;
    const Tensor<T>& x = tape.val(a);
    const std::size_t r = x.shape.size();
    if (perm.size() != r) throw std::runtime_error("permute: axis list length mismatch");
    std::vector<bool> seen(r, false);
    for (std::int64_t p : perm) {
        if (p < 0 || static_cast<std::size_t>(p) >= r || seen[static_cast<std::size_t>(p)]) {
            throw std::runtime_error("permute: invalid axis permutation");
        }
        seen[static_cast<std::size_t>(p)] = true;
    }
    Shape oshape(r);
    for (std::size_t i = 0; i < r; ++i) oshape[i] = x.shape[static_cast<std::size_t>(perm[i])];
    Tensor<T> out(oshape);
    detail::permute_copy(x.data.data(), out.data.data(), x.shape, perm);

    const bool ra = tape.requires_grad(a);
    std::function<void(Tape<T>&)> bwd;
    if (ra) {
        std::vector<std::int64_t> inv(r);
        for (std::size_t i = 0; i < r; ++i) inv[static_cast<std::size_t>(perm[i])] = static_cast<std::int64_t>(i);
        const std::int32_t oid = tape.next_id(), aid = a.id;
        Shape oshape_copy = oshape;
        bwd = [oid, aid, inv, oshape_copy](Tape<T>& t) {
            const Tensor<T>& g = t.grad_slot(oid);
            Tensor<T> gi(t.value_of(aid).shape);
            detail::permute_copy(g.data.data(), gi.data.data(), oshape_copy, inv);
            t.accumulate(aid, gi);
        };
    }
    return tape.emit(std::move(out), ra, std::move(bwd), "permute", false);
}

// Concatenate NCHW tensors along the channel axis.
template <typename T>
Var<T> concat_channel(const std::vector<Var<T>>& parts) {
    if (parts.empty()) throw std::runtime_error("concat_channel: no inputs");
    Tape<T>& tape = *parts[0].tape;
    const Tensor<T>& first = tape.val(parts[0]);
    if (first.rank() != 4) throw std::runtime_error("concat_channel: expects NCHW tensors");
    const std::int64_t n = first.shape[0], h = first.shape[2], w = first.shape[3];
    std::int64_t ctot = 0;
    bool rg = false;
    for (const auto& p : parts) {
        if (p.tape != &tape) throw std::runtime_error("concat_channel: operands on different tapes");
        const Tensor<T>& x = tape.val(p);
        if (x.rank() != 4 || x.shape[0] != n || x.shape[2] != h || x.shape[3] != w) {
            throw std::runtime_error("concat_channel: incompatible shape " + shape_str(x.shape));
        }
        ctot += x.shape[1];
        rg = rg || tape.requires_grad(p);
    }

    Tensor<T> out(Shape{n, ctot, h, w});
    const std::int64_t plane = h * w;
    std::int64_t coff = 0;
    for (const auto& p : parts) {
        const Tensor<T>& x = tape.val(p);
        const std::int64_t c = x.shape[1];
        for (std::int64_t ni = 0; ni < n; ++ni) {
            std::memcpy(out.data.data() + (ni * ctot + coff) * plane, x.data.data() + ni * c * plane,
                        static_cast<std::size_t>(c * plane) * sizeof(T));
        }
        coff += c;
    }

    std::function<void(Tape<T>&)> bwd;
    if (rg) {
        std::vector<std::int32_t> ids;
        std::vector<std::int64_t> widths;
        std::vector<bool> needs;
        for (const auto& p : parts) {
            ids.push_back(p.id);
            widths.push_back(tape.val(p).shape[1]);
            needs.push_back(tape.requires_grad(p));
        }
        const std::int32_t oid = tape.next_id();
        bwd = [oid, ids, widths, needs, n, plane, ctot](Tape<T>& t) {
            const Tensor<T>& g = t.grad_slot(oid);
            std::int64_t coff2 = 0;
            for (std::size_t pi = 0; pi < ids.size(); ++pi) {
                const std::int64_t c = widths[pi];
                if (needs[pi]) {
                    Tensor<T>& gp = t.grad_slot(ids[pi]);
                    for (std::int64_t ni = 0; ni < n; ++ni) {
                        const T* src = g.data.data() + (ni * ctot + coff2) * plane;
                        T* dst = gp.data.data() + ni * c * plane;
                        for (std::int64_t i = 0; i < c * plane; ++i) dst[i] += src[i];
                    }
                }
                coff2 += c;
            }
        };
    }
    return tape.emit(std::move(out), rg, std::move(bwd), "concat_channel", false);
}

// Split an NCHW tensor into chunks along the channel axis; sizes must sum to C.
template <typename T>
std::vector<Var<T>> split_channel(Var<T> a, const std::vector<std::int64_t>& sizes) {
    Tape<T>& tape = *a.tape;
    const Tensor<T>& x = tape.val(a);
    if (x.rank() != 4) throw std::runtime_error("split_channel: expects NCHW tensor");
    const std::int64_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    std::int64_t sum = 0;
    for (std::int64_t s : sizes) {
        if (s <= 0) throw std::runtime_error("split_channel: nonpositive split size");
        sum += s;
    }
    if (sum != c) {
        throw std::runtime_error("split_channel: sizes sum to " + std::to_string(sum) + ", channels are " +
                                 std::to_string(c));
    }

    const std::int64_t plane = h * w;
    const bool ra = tape.requires_grad(a);
    std::vector<Var<T>> outs;
    std::int64_t coff = 0;
    for (std::int64_t s : sizes) {
        Tensor<T> part(Shape{n, s, h, w});
        for (std::int64_t ni = 0; ni < n; ++ni) {
            std::memcpy(part.data.data() + ni * s * plane, x.data.data() + (ni * c + coff) * plane,
                        static_cast<std::size_t>(s * plane) * sizeof(T));
        }
        std::function<void(Tape<T>&)> bwd;
        if (ra) {
            const std::int32_t oid = tape.next_id(), aid = a.id;
            const std::int64_t off = coff;
            bwd = [oid, aid, off, s, n, c, plane](Tape<T>& t) {
                const Tensor<T>& g = t.grad_slot(oid);
                Tensor<T>& ga = t.grad_slot(aid);
                for (std::int64_t ni = 0; ni < n; ++ni) {
                    const T* src = g.data.data() + ni * s * plane;
                    T* dst = ga.data.data() + (ni * c + off) * plane;
                    for (std::int64_t i = 0; i < s * plane; ++i) dst[i] += src[i];
                }
            };
        }
        outs.push_back(tape.emit(std::move(part), ra, std::move(bwd), "split_channel", false));
        coff += s;
    }
    return outs;
}

// ---------------------------------------------------------------------------
// Reductions with fixed ascending-index summation order.
// ---------------------------------------------------------------------------

enum class Reduce { sum, mean };

template <typename T>
Var<T> reduce(Reduce kind, Var<T> a, std::vector<std::int64_t> axes) {
    Tape<T>& tape = *a.tape;
    const Tensor<T>& x = tape.val(a);
    const std::size_t r = x.shape.size();
    std::vector<bool> is_reduced(r, false);
    for (std::int64_t ax : axes) {
        if (ax < 0 || static_cast<std::size_t>(ax) >= r) throw std::runtime_error("reduce: axis out of range");
        if (is_reduced[static_cast<std::size_t>(ax)]) throw std::runtime_error("reduce: duplicate axis");
        is_reduced[static_cast<std::size_t>(ax)] = true;
    }

    Shape oshape;
    std::int64_t count = 1;
    for (std::size_t i = 0; i < r; ++i) {
        if (is_reduced[i]) {
            count *= x.shape[i];
        } else {
            oshape.push_back(x.shape[i]);
        }
    }
    if (oshape.empty()) oshape = Shape{1};

    Tensor<T> out(oshape);
    const auto strides = detail::strides_of(x.shape);
    // Walk the input once in ascending linear order; each element maps to a
    // fixed output slot, so every output accumulates in ascending index order.
    {
        std::vector<std::int64_t> idx(r, 0);
        std::int64_t oidx = 0;
        std::vector<std::int64_t> out_stride(r, 0);
        {
            std::int64_t os = 1;
            for (std::int64_t i = static_cast<std::int64_t>(r) - 1; i >= 0; --i) {
                const std::size_t u = static_cast<std::size_t>(i);
                if (!is_reduced[u]) {
                    out_stride[u] = os;
                    os *= x.shape[u];
                }
            }
        }
        for (std::int64_t li = 0; li < x.size(); ++li) {
            out[oidx] += x[li];
            for (std::int64_t ax = static_cast<std::int64_t>(r) - 1; ax >= 0; --ax) {
                const std::size_t u = static_cast<std::size_t>(ax);
                ++idx[u];
                oidx += out_stride[u];
                if (idx[u] < x.shape[u]) break;
                oidx -= out_stride[u] * x.shape[u];
                idx[u] = 0;
            }
        }
    }
    if (kind == Reduce::mean) {
        const T inv = T(1) / static_cast<T>(count);
        for (auto& v : out.data) v *= inv;
    }

    const bool ra = tape.requires_grad(a);
    std::function<void(Tape<T>&)> bwd;
    if (ra) {
        const std::int32_t oid = tape.next_id(), aid = a.id;
        const T factor = kind == Reduce::mean ? T(1) / static_cast<T>(count) : T(1);
        Shape xshape = x.shape;
        std::vector<bool> red = is_reduced;
        bwd = [oid, aid, factor, xshape, red](Tape<T>& t) {
            const Tensor<T>& g = t.grad_slot(oid);
            Tensor<T>& ga = t.grad_slot(aid);
            const std::size_t r2 = xshape.size();
            std::vector<std::int64_t> out_stride(r2, 0);
            {
                std::int64_t os = 1;
                for (std::int64_t i = static_cast<std::int64_t>(r2) - 1; i >= 0; --i) {
                    const std::size_t u = static_cast<std::size_t>(i);
                    if (!red[u]) {
                        out_stride[u] = os;
                        os *= xshape[u];
                    }
                }
            }
            std::vector<std::int64_t> idx(r2, 0);
            std::int64_t oidx = 0;
            const std::int64_t total = ga.size();
            for (std::int64_t li = 0; li < total; ++li) {
                ga[li] += g[oidx] * factor;
                for (std::int64_t ax = static_cast<std::int64_t>(r2) - 1; ax >= 0; --ax) {
                    const std::size_t u = static_cast<std::size_t>(ax);
                    ++idx[u];
                    oidx += out_stride[u];
                    if (idx[u] < xshape[u]) break;
                    oidx -= out_stride[u] * xshape[u];
                    idx[u] = 0;
                }
            }
        };
    }
    return tape.emit(std::move(out), ra, std::move(bwd), kind == Reduce::mean ? "mean" : "sum");
}

template <typename T>
Var<T> sum_all(Var<T> a) {
    std::vector<std::int64_t> axes(a.tape->val(a).shape.size());
    std::iota(axes.begin(), axes.end(), 0);
    return reduce(Reduce::sum, a, axes);
}

template <typename T>
Var<T> mean_all(Var<T> a) {
    std::vector<std::int64_t> axes(a.tape->val(a).shape.size());
    std::iota(axes.begin(), axes.end(), 0);
    return reduce(Reduce::mean, a, axes);
}

}  // namespace csattn
