#include "adfilt/autodiff.hpp"

#include <cmath>
#include <cstring>

namespace adfilt::ad {

namespace {

void check_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) {
    throw NumericError(std::string("non-finite value produced by op '") + op + "'");
  }
}

bool wants_grad(std::initializer_list<Var> vars) {
  for (const Var& v : vars) {
    if (v.requires_grad()) return true;
  }
  return false;
}

void require_same_graph(std::initializer_list<Var> vars) {
  const Graph* g = vars.begin()->graph();
  for (const Var& v : vars) {
    if (v.graph() != g) throw ContractError("operands belong to different graphs");
  }
}

// C(m,n) += A(m,k) * B(k,n)
void mm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
           std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C(m,k) += G(m,n) * B(k,n)^T
void mm_nt(const double* g, const double* b, double* c, std::size_t m, std::size_t k,
           std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    double* crow = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      crow[p] += acc;
    }
  }
}

// C(k,n) += A(m,k)^T * G(m,n)
void mm_tn(const double* a, const double* g, double* c, std::size_t m, std::size_t k,
           std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
  }
}

void accumulate(Tensor& dst, const Tensor& src) {
  double* d = dst.data();
  const double* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

}  // namespace

const Tensor& Var::grad() const {
  if (n_->grad.size() == 0) {
    throw ContractError("gradient not available; run backward() first");
  }
  return n_->grad;
}

Var Graph::make(Tensor value, bool requires_grad, const char* op, std::vector<Node*> parents,
                std::function<void(Node&)> backprop) {
  check_finite(value, op);
  nodes_.emplace_back();
  Node& n = nodes_.back();
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.parents = std::move(parents);
  n.backprop = std::move(backprop);
  n.op = op;
  n.index = nodes_.size() - 1;
  return Var(this, &n);
}

void Graph::backward(Var root) {
  if (root.graph() != this) throw ContractError("backward root belongs to a different graph");
  if (!root.value().is_scalar()) {
    throw ContractError("backward root must be a scalar, got shape " + root.value().shape_str());
  }

  // Reset accumulators; every requires-grad node ends up with a grad tensor.
  for (Node& n : nodes_) {
    if (n.requires_grad) {
      n.grad = Tensor(n.value.shape());
    } else {
      n.grad = Tensor();
    }
  }
  if (!root.node()->requires_grad) return;  // no parameters feed the root

  // Mark ancestors of the root along requires-grad edges.
  std::vector<char> marked(nodes_.size(), 0);
  std::vector<Node*> stack{root.node()};
  marked[root.node()->index] = 1;
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    for (Node* p : n->parents) {
      if (p->requires_grad && !marked[p->index]) {
        marked[p->index] = 1;
        stack.push_back(p);
      }
    }
  }

  root.node()->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = *it;
    if (marked[n.index] && n.backprop) n.backprop(n);
  }
}

// ---- matmul ------------------------------------------------------------

Var matmul(Var a, Var b) {
  require_same_graph({a, b});
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const bool batch_a = A.rank() == 3;
  const bool batch_b = B.rank() == 3;
  if ((A.rank() != 2 && A.rank() != 3) || (B.rank() != 2 && B.rank() != 3) ||
      (batch_a && batch_b)) {
    throw ShapeError("matmul expects (m,k)x(k,n), (m,k)x(B,k,n) or (B,m,k)x(k,n), got " +
                     A.shape_str() + " x " + B.shape_str());
  }
  const std::size_t m = batch_a ? A.dim(1) : A.dim(0);
  const std::size_t k = batch_a ? A.dim(2) : A.dim(1);
  const std::size_t kb = batch_b ? B.dim(1) : B.dim(0);
  const std::size_t n = batch_b ? B.dim(2) : B.dim(1);
  if (k != kb) {
    throw ShapeError("matmul inner dimensions differ: " + A.shape_str() + " x " + B.shape_str());
  }
  const std::size_t batch = batch_a ? A.dim(0) : (batch_b ? B.dim(0) : 1);

  Tensor out(batch_a || batch_b ? Tensor::Shape{batch, m, n} : Tensor::Shape{m, n});
  for (std::size_t i = 0; i < batch; ++i) {
    const double* ap = A.data() + (batch_a ? i * m * k : 0);
    const double* bp = B.data() + (batch_b ? i * k * n : 0);
    mm_nn(ap, bp, out.data() + i * m * n, m, k, n);
  }

  const bool rg = wants_grad({a, b});
  std::function<void(Node&)> bp;
  if (rg) {
    bp = [m, k, n, batch, batch_a, batch_b](Node& node) {
      Node* pa = node.parents[0];
      Node* pb = node.parents[1];
      const Tensor& A = pa->value;
      const Tensor& B = pb->value;
      for (std::size_t i = 0; i < batch; ++i) {
        const double* go = node.grad.data() + i * m * n;
        const double* ap = A.data() + (batch_a ? i * m * k : 0);
        const double* bp_ = B.data() + (batch_b ? i * k * n : 0);
        if (pa->requires_grad) mm_nt(go, bp_, pa->grad.data() + (batch_a ? i * m * k : 0), m, k, n);
        if (pb->requires_grad) mm_tn(ap, go, pb->grad.data() + (batch_b ? i * k * n : 0), m, k, n);
      }
    };
  }
  return a.graph()->make(std::move(out), rg, "matmul", {a.node(), b.node()}, std::move(bp));
}

// ---- conv2d ------------------------------------------------------------

namespace {
struct ConvDims {
  std::size_t N, Cin, H, W, Cout, Cpg, KH, KW, OH, OW;
  int stride, groups, ph, pw;
  std::size_t copg;  // out channels per group
};

ConvDims conv_dims(const Tensor& x, const Tensor& k, int stride, int groups, int ph, int pw) {
  if (x.rank() != 4 || k.rank() != 4) {
    throw ShapeError("conv2d expects x (N,Cin,H,W) and k (Cout,Cin/groups,KH,KW), got " +
                     x.shape_str() + " and " + k.shape_str());
  }
  if (stride < 1 || groups < 1 || ph < 0 || pw < 0) {
    throw ContractError("conv2d stride/groups must be >= 1 and padding >= 0");
  }
  ConvDims d;
  d.N = x.dim(0);
  d.Cin = x.dim(1);
  d.H = x.dim(2);
  d.W = x.dim(3);
  d.Cout = k.dim(0);
  d.Cpg = k.dim(1);
  d.KH = k.dim(2);
  d.KW = k.dim(3);
  d.stride = stride;
  d.groups = groups;
  d.ph = ph;
  d.pw = pw;
  if (d.Cin % groups != 0 || d.Cout % groups != 0) {
    throw ShapeError("conv2d groups=" + std::to_string(groups) +
                     " must divide both channel counts (Cin=" + std::to_string(d.Cin) +
                     ", Cout=" + std::to_string(d.Cout) + ")");
  }
  if (d.Cpg != d.Cin / groups) {
    throw ShapeError("conv2d kernel expects Cin/groups=" + std::to_string(d.Cin / groups) +
                     " input channels, got " + std::to_string(d.Cpg));
  }
  if (d.H + 2 * static_cast<std::size_t>(ph) < d.KH ||
      d.W + 2 * static_cast<std::size_t>(pw) < d.KW) {
    throw ShapeError("conv2d kernel " + k.shape_str() + " larger than padded input " +
                     x.shape_str());
  }
  d.OH = (d.H + 2 * ph - d.KH) / stride + 1;
  d.OW = (d.W + 2 * pw - d.KW) / stride + 1;
  d.copg = d.Cout / groups;
  return d;
}

// Valid output range [lo,hi) for one kernel offset: 0 <= o*s + koff - pad < limit.
inline void out_range(std::size_t kidx, int pad, int stride, std::size_t limit, std::size_t count,
                      std::size_t& lo, std::size_t& hi) {
  const long off = static_cast<long>(kidx) - pad;
  long l = 0;
  if (off < 0) l = (-off + stride - 1) / stride;
  long h = static_cast<long>(count);
  const long max_i = static_cast<long>(limit) - 1 - off;
  if (max_i < 0) {
    lo = hi = 0;
    return;
  }
  h = std::min(h, max_i / stride + 1);
  lo = static_cast<std::size_t>(l);
  hi = static_cast<std::size_t>(std::max(l, h));
}

void conv_forward(const ConvDims& d, const double* x, const double* k, double* out) {
  const std::size_t s = static_cast<std::size_t>(d.stride);
  for (std::size_t n = 0; n < d.N; ++n) {
    for (int g = 0; g < d.groups; ++g) {
      for (std::size_t co = 0; co < d.copg; ++co) {
        const std::size_t co_full = g * d.copg + co;
        double* oplane = out + (n * d.Cout + co_full) * d.OH * d.OW;
        for (std::size_t ci = 0; ci < d.Cpg; ++ci) {
          const std::size_t ci_full = g * d.Cpg + ci;
          const double* xplane = x + (n * d.Cin + ci_full) * d.H * d.W;
          const double* ker = k + ((co_full * d.Cpg + ci) * d.KH) * d.KW;
          for (std::size_t kh = 0; kh < d.KH; ++kh) {
            std::size_t oh_lo, oh_hi;
            out_range(kh, d.ph, d.stride, d.H, d.OH, oh_lo, oh_hi);
            for (std::size_t kw = 0; kw < d.KW; ++kw) {
              const double kk = ker[kh * d.KW + kw];
              if (kk == 0.0) continue;
              std::size_t ow_lo, ow_hi;
              out_range(kw, d.pw, d.stride, d.W, d.OW, ow_lo, ow_hi);
              for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
                const std::size_t ih = oh * s + kh - d.ph;
                const double* xrow = xplane + ih * d.W + kw - d.pw;
                double* orow = oplane + oh * d.OW;
                if (s == 1) {
                  for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) orow[ow] += kk * xrow[ow];
                } else {
                  for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) orow[ow] += kk * xrow[ow * s];
                }
              }
            }
          }
        }
      }
    }
  }
}

void conv_backward(const ConvDims& d, const double* x, const double* k, const double* go,
                   double* dx, double* dk) {
  const std::size_t s = static_cast<std::size_t>(d.stride);
  for (std::size_t n = 0; n < d.N; ++n) {
    for (int g = 0; g < d.groups; ++g) {
      for (std::size_t co = 0; co < d.copg; ++co) {
        const std::size_t co_full = g * d.copg + co;
        const double* gplane = go + (n * d.Cout + co_full) * d.OH * d.OW;
        for (std::size_t ci = 0; ci < d.Cpg; ++ci) {
          const std::size_t ci_full = g * d.Cpg + ci;
          const double* xplane = x + (n * d.Cin + ci_full) * d.H * d.W;
          double* dxplane = dx ? dx + (n * d.Cin + ci_full) * d.H * d.W : nullptr;
          const std::size_t kbase = (co_full * d.Cpg + ci) * d.KH * d.KW;
          for (std::size_t kh = 0; kh < d.KH; ++kh) {
            std::size_t oh_lo, oh_hi;
            out_range(kh, d.ph, d.stride, d.H, d.OH, oh_lo, oh_hi);
            for (std::size_t kw = 0; kw < d.KW; ++kw) {
              std::size_t ow_lo, ow_hi;
              out_range(kw, d.pw, d.stride, d.W, d.OW, ow_lo, ow_hi);
              const double kk = k[kbase + kh * d.KW + kw];
              double kacc = 0.0;
              for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
                const std::size_t ih = oh * s + kh - d.ph;
                const double* grow = gplane + oh * d.OW;
                const std::size_t xoff = ih * d.W + kw - d.pw;
                const double* xrow = xplane + xoff;
                if (dk) {
                  if (s == 1) {
                    for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) kacc += grow[ow] * xrow[ow];
                  } else {
                    for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) kacc += grow[ow] * xrow[ow * s];
                  }
                }
                if (dx && kk != 0.0) {
                  double* dxrow = dxplane + xoff;
                  if (s == 1) {
                    for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) dxrow[ow] += kk * grow[ow];
                  } else {
                    for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) dxrow[ow * s] += kk * grow[ow];
                  }
                }
              }
              if (dk) dk[kbase + kh * d.KW + kw] += kacc;
            }
          }
        }
      }
    }
  }
}
}  // namespace

Var conv2d(Var x, Var k, int stride, int groups, int pad_h, int pad_w) {
  require_same_graph({x, k});
  const ConvDims d = conv_dims(x.value(), k.value(), stride, groups, pad_h, pad_w);
  Tensor out({d.N, d.Cout, d.OH, d.OW});
  conv_forward(d, x.value().data(), k.value().data(), out.data());

  const bool rg = wants_grad({x, k});
  std::function<void(Node&)> bp;
  if (rg) {
    bp = [d](Node& node) {
      Node* px = node.parents[0];
      Node* pk = node.parents[1];
      conv_backward(d, px->value.data(), pk->value.data(), node.grad.data(),
                    px->requires_grad ? px->grad.data() : nullptr,
                    pk->requires_grad ? pk->grad.data() : nullptr);
    };
  }
  return x.graph()->make(std::move(out), rg, "conv2d", {x.node(), k.node()}, std::move(bp));
}

// ---- elementwise -------------------------------------------------------

Var add(Var a, Var b) {
  require_same_graph({a, b});
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const bool broadcast = !A.same_shape(B);
  if (broadcast) {
    // b must match the trailing axes of a
    const auto& sa = A.shape();
    const auto& sb = B.shape();
    if (sb.size() >= sa.size() ||
        !std::equal(sb.begin(), sb.end(), sa.end() - sb.size())) {
      throw ShapeError("add shapes do not conform: " + A.shape_str() + " vs " + B.shape_str());
    }
  }
  Tensor out = A;
  const std::size_t nb = B.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i % nb];

  const bool rg = wants_grad({a, b});
  std::function<void(Node&)> bp;
  if (rg) {
    bp = [nb](Node& node) {
      Node* pa = node.parents[0];
      Node* pb = node.parents[1];
      if (pa->requires_grad) accumulate(pa->grad, node.grad);
      if (pb->requires_grad) {
        for (std::size_t i = 0; i < node.grad.size(); ++i) pb->grad[i % nb] += node.grad[i];
      }
    };
  }
  return a.graph()->make(std::move(out), rg, "add", {a.node(), b.node()}, std::move(bp));
}

Var sub(Var a, Var b) {
  require_same_graph({a, b});
  if (!a.value().same_shape(b.value())) {
    throw ShapeError("sub shapes differ: " + a.value().shape_str() + " vs " +
                     b.value().shape_str());
  }
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];

  const bool rg = wants_grad({a, b});
  std::function<void(Node&)> bp;
  if (rg) {
    bp = [](Node& node) {
      Node* pa = node.parents[0];
      Node* pb = node.parents[1];
      if (pa->requires_grad) accumulate(pa->grad, node.grad);
      if (pb->requires_grad) {
        for (std::size_t i = 0; i < node.grad.size(); ++i) pb->grad[i] -= node.grad[i];
      }
    };
  }
  return a.graph()->make(std::move(out), rg, "sub", {a.node(), b.node()}, std::move(bp));
}

Var mul(Var a, Var b) {
  require_same_graph({a, b});
  if (!a.value().same_shape(b.value())) {
    throw ShapeError("mul shapes differ: " + a.value().shape_str() + " vs " +
                     b.value().shape_str());
  }
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];

  const bool rg = wants_grad({a, b});
  std::function<void(Node&)> bp;
  if (rg) {
    bp = [](Node& node) {
      Node* pa = node.parents[0];
      Node* pb = node.parents[1];
      if (pa->requires_grad) {
        for (std::size_t i = 0; i < node.grad.size(); ++i)
          pa->grad[i] += node.grad[i] * pb->value[i];
      }
      if (pb->requires_grad) {
        for (std::size_t i = 0; i < node.grad.size(); ++i)
          pb->grad[i] += node.grad[i] * pa->value[i];
      }
    };
  }
  return a.graph()->make(std::move(out), rg, "mul", {a.node(), b.node()}, std::move(bp));
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  const bool rg = a.requires_grad();
  std::function<void(Node&)> bp;
  if (rg) {
    bp = [s](Node& node) {
      Node* pa = node.parents[0];
      for (std::size_t i = 0; i < node.grad.size(); ++i) pa->grad[i] += s * node.grad[i];
    };
  }
  return a.graph()->make(std::move(out), rg, "scale", {a.node()}, std::move(bp));
}

Var shift(Var a, double c) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += c;
  const bool rg = a.requires_grad();
  std::function<void(Node&)> bp;
  if (rg) {
    bp = [](Node& node) { accumulate(node.parents[0]->grad, node.grad); };
  }
  return a.graph()->make(std::move(out), rg, "shift", {a.node()}, std::move(bp));
}

namespace {
template <typename Fwd, typename Bwd>
Var unary_op(Var a, const char* name, Fwd fwd, Bwd bwd) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(out[i]);
  const bool rg = a.requires_grad();
  std::function<void(Node&)> bp;
  if (rg) {
    bp = [bwd](Node& node) {
      Node* pa = node.parents[0];
      for (std::size_t i = 0; i < node.grad.size(); ++i) {
        pa->grad[i] += node.grad[i] * bwd(pa->value[i], node.value[i]);
      }
    };
  }
  return a.graph()->make(std::move(out), rg, name, {a.node()}, std::move(bp));
}
}  // namespace

Var relu(Var a) {
  return unary_op(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var elu(Var a) {
  return unary_op(
      a, "elu", [](double x) { return x > 0.0 ? x : std::expm1(x); },
      [](double x, double y) { return x > 0.0 ? 1.0 : y + 1.0; });
}

Var square(Var a) {
  return unary_op(
      a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var logarithm(Var a) {
  for (std::size_t i = 0; i < a.value().size(); ++i) {
    if (!(a.value()[i] > 0.0)) {
      throw DomainError("logarithm of non-positive value " + std::to_string(a.value()[i]));
    }
  }
  return unary_op(
      a, "logarithm", [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

// ---- reductions --------------------------------------------------------

namespace {
Var full_reduce(Var a, bool is_mean) {
  const Tensor& A = a.value();
  double acc = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) acc += A[i];
  const double denom = is_mean ? static_cast<double>(A.size()) : 1.0;
  Tensor out = Tensor::scalar(acc / denom);
  const bool rg = a.requires_grad();
  std::function<void(Node&)> bp;
  if (rg) {
    bp = [denom](Node& node) {
      Node* pa = node.parents[0];
      const double g = node.grad[0] / denom;
      for (std::size_t i = 0; i < pa->grad.size(); ++i) pa->grad[i] += g;
    };
  }
  return a.graph()->make(std::move(out), rg, is_mean ? "mean" : "sum", {a.node()}, std::move(bp));
}

Var axis_reduce(Var a, std::size_t axis, bool is_mean) {
  const Tensor& A = a.value();
  if (axis >= A.rank()) {
    throw ContractError("reduction axis " + std::to_string(axis) + " out of range for " +
                        A.shape_str());
  }
  Tensor::Shape oshape;
  for (std::size_t i = 0; i < A.rank(); ++i) {
    if (i != axis) oshape.push_back(A.dim(i));
  }
  if (oshape.empty()) oshape.push_back(1);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= A.dim(i);
  for (std::size_t i = axis + 1; i < A.rank(); ++i) inner *= A.dim(i);
  const std::size_t n_axis = A.dim(axis);
  const double denom = is_mean ? static_cast<double>(n_axis) : 1.0;

  Tensor out(oshape);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < n_axis; ++j) {
      const double* src = A.data() + (o * n_axis + j) * inner;
      double* dst = out.data() + o * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  }
  if (is_mean) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= denom;
  }

  const bool rg = a.requires_grad();
  std::function<void(Node&)> bp;
  if (rg) {
    bp = [outer, inner, n_axis, denom](Node& node) {
      Node* pa = node.parents[0];
      for (std::size_t o = 0; o < outer; ++o) {
        const double* g = node.grad.data() + o * inner;
        for (std::size_t j = 0; j < n_axis; ++j) {
          double* dst = pa->grad.data() + (o * n_axis + j) * inner;
          for (std::size_t i = 0; i < inner; ++i) dst[i] += g[i] / denom;
        }
      }
    };
  }
  return a.graph()->make(std::move(out), rg, is_mean ? "mean_axis" : "sum_axis", {a.node()},
                         std::move(bp));
}
}  // namespace

Var mean(Var a) { return full_reduce(a, true); }
Var sum(Var a) { return full_reduce(a, false); }
Var mean(Var a, std::size_t axis) { return axis_reduce(a, axis, true); }
Var sum(Var a, std::size_t axis) { return axis_reduce(a, axis, false); }

// ---- shape ops ---------------------------------------------------------

Var reshape(Var a, Tensor::Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  const bool rg = a.requires_grad();
  std::function<void(Node&)> bp;
  if (rg) {
    bp = [](Node& node) {
      Node* pa = node.parents[0];
      accumulate(pa->grad, node.grad.reshaped(pa->value.shape()));
    };
  }
  return a.graph()->make(std::move(out), rg, "reshape", {a.node()}, std::move(bp));
}

Var flatten_batch(Var a) {
  const Tensor& A = a.value();
  if (A.rank() < 2) throw ShapeError("flatten_batch expects rank >= 2, got " + A.shape_str());
  return reshape(a, {A.dim(0), A.size() / A.dim(0)});
}

Var avg_pool(Var x, std::size_t window_h, std::size_t window_w) {
  const Tensor& X = x.value();
  if (X.rank() != 4) throw ShapeError("avg_pool expects (N,C,H,W), got " + X.shape_str());
  if (window_h == 0 || window_w == 0) throw ContractError("avg_pool window must be positive");
  const std::size_t N = X.dim(0), C = X.dim(1), H = X.dim(2), W = X.dim(3);
  const std::size_t OH = H / window_h, OW = W / window_w;
  if (OH == 0 || OW == 0) {
    throw ShapeError("avg_pool window larger than input " + X.shape_str());
  }
  Tensor out({N, C, OH, OW});
  const double inv = 1.0 / static_cast<double>(window_h * window_w);
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    const double* xp = X.data() + nc * H * W;
    double* op = out.data() + nc * OH * OW;
    for (std::size_t oh = 0; oh < OH; ++oh) {
      for (std::size_t ow = 0; ow < OW; ++ow) {
        double acc = 0.0;
        for (std::size_t i = 0; i < window_h; ++i) {
          const double* row = xp + (oh * window_h + i) * W + ow * window_w;
          for (std::size_t j = 0; j < window_w; ++j) acc += row[j];
        }
        op[oh * OW + ow] = acc * inv;
      }
    }
  }
  const bool rg = x.requires_grad();
  std::function<void(Node&)> bp;
  if (rg) {
    bp = [N, C, H, W, OH, OW, window_h, window_w, inv](Node& node) {
      Node* px = node.parents[0];
      for (std::size_t nc = 0; nc < N * C; ++nc) {
        double* dxp = px->grad.data() + nc * H * W;
        const double* gp = node.grad.data() + nc * OH * OW;
        for (std::size_t oh = 0; oh < OH; ++oh) {
          for (std::size_t ow = 0; ow < OW; ++ow) {
            const double g = gp[oh * OW + ow] * inv;
            for (std::size_t i = 0; i < window_h; ++i) {
              double* row = dxp + (oh * window_h + i) * W + ow * window_w;
              for (std::size_t j = 0; j < window_w; ++j) row[j] += g;
            }
          }
        }
      }
    };
  }
  return x.graph()->make(std::move(out), rg, "avg_pool", {x.node()}, std::move(bp));
}

// ---- losses ------------------------------------------------------------

Tensor softmax(const Tensor& logits) {
  const bool vec = logits.rank() == 1;
  const std::size_t B = vec ? 1 : logits.dim(0);
  const std::size_t K = vec ? logits.dim(0) : logits.dim(1);
  Tensor out = logits;
  for (std::size_t b = 0; b < B; ++b) {
    double* row = out.data() + b * K;
    double m = row[0];
    for (std::size_t k = 1; k < K; ++k) m = std::max(m, row[k]);
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      row[k] = std::exp(row[k] - m);
      z += row[k];
    }
    for (std::size_t k = 0; k < K; ++k) row[k] /= z;
  }
  return out;
}

Var softmax_cross_entropy(Var logits, const std::vector<int>& labels) {
  const Tensor& Z = logits.value();
  const bool vec = Z.rank() == 1;
  if (!vec && Z.rank() != 2) {
    throw ShapeError("softmax_cross_entropy expects (B,K) or (K) logits, got " + Z.shape_str());
  }
  const std::size_t B = vec ? 1 : Z.dim(0);
  const std::size_t K = vec ? Z.dim(0) : Z.dim(1);
  if (labels.size() != B) {
    throw ShapeError("softmax_cross_entropy got " + std::to_string(labels.size()) +
                     " labels for batch of " + std::to_string(B));
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= K) {
      throw ContractError("label " + std::to_string(y) + " out of range for K=" +
                          std::to_string(K));
    }
  }
  Tensor probs = softmax(Z);
  double ce = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    ce -= std::log(probs.data()[b * K + labels[b]]);
  }
  ce /= static_cast<double>(B);

  const bool rg = logits.requires_grad();
  std::function<void(Node&)> bp;
  if (rg) {
    bp = [B, K, labels, probs](Node& node) {
      Node* pz = node.parents[0];
      const double g = node.grad[0] / static_cast<double>(B);
      for (std::size_t b = 0; b < B; ++b) {
        double* drow = pz->grad.data() + b * K;
        const double* prow = probs.data() + b * K;
        for (std::size_t k = 0; k < K; ++k) {
          drow[k] += g * (prow[k] - (static_cast<int>(k) == labels[b] ? 1.0 : 0.0));
        }
      }
    };
  }
  return logits.graph()->make(Tensor::scalar(ce), rg, "softmax_cross_entropy", {logits.node()},
                              std::move(bp));
}

Var mse(Var a, Var b) {
  require_same_graph({a, b});
  if (!a.value().same_shape(b.value())) {
    throw ShapeError("mse shapes differ: " + a.value().shape_str() + " vs " +
                     b.value().shape_str());
  }
  const std::size_t n = a.value().size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a.value()[i] - b.value()[i];
    acc += d * d;
  }
  acc /= static_cast<double>(n);

  const bool rg = wants_grad({a, b});
  std::function<void(Node&)> bp;
  if (rg) {
    bp = [n](Node& node) {
      Node* pa = node.parents[0];
      Node* pb = node.parents[1];
      const double g = 2.0 * node.grad[0] / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double d = g * (pa->value[i] - pb->value[i]);
        if (pa->requires_grad) pa->grad[i] += d;
        if (pb->requires_grad) pb->grad[i] -= d;
      }
    };
  }
  return a.graph()->make(Tensor::scalar(acc), rg, "mse", {a.node(), b.node()}, std::move(bp));
}

}  // namespace adfilt::ad
