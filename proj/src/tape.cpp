#include "mflow/diff/tape.hpp"

#include <algorithm>
#include <string>

namespace mflow::diff {

namespace {
thread_local Tape* g_active = nullptr;
}

const char* primitive_name(Primitive p) {
  switch (p) {
    case Primitive::Add: return "add";
    case Primitive::Sub: return "sub";
    case Primitive::Mul: return "mul";
    case Primitive::Div: return "div";
    case Primitive::Neg: return "neg";
    case Primitive::Sin: return "sin";
    case Primitive::Cos: return "cos";
    case Primitive::Tan: return "tan";
    case Primitive::Atan: return "atan";
    case Primitive::Atan2: return "atan2";
    case Primitive::Exp: return "exp";
    case Primitive::Log: return "log";
    case Primitive::Log1p: return "log1p";
    case Primitive::Sqrt: return "sqrt";
    case Primitive::Pow: return "pow";
    case Primitive::Tanh: return "tanh";
    case Primitive::Relu: return "relu";
    case Primitive::Min: return "min";
    case Primitive::Max: return "max";
    case Primitive::Abs: return "abs";
    case Primitive::Dot: return "dot";
    case Primitive::Dense: return "dense";
    case Primitive::Leaf: return "leaf";
  }
  return "unknown";
}

Tape* active_tape() noexcept { return g_active; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active) { g_active = &tape; }
TapeScope::~TapeScope() { g_active = previous_; }

namespace detail {
Tape& require_tape(Primitive p) {
  Tape* t = g_active;
  if (t == nullptr) {
    throw DiffError(DiffError::Kind::NoTape,
                    std::string("no active tape while recording ") + primitive_name(p));
  }
  return *t;
}
}  // namespace detail

void Tape::check(Primitive p, double value) const {
  if (!std::isfinite(value)) {
    throw DiffError(DiffError::Kind::NonFinite,
                    std::string("non-finite result recorded by ") + primitive_name(p));
  }
}

std::uint32_t Tape::push_node(double value) {
  const auto id = static_cast<std::uint32_t>(values_.size());
  values_.push_back(value);
  edge_end_.push_back(static_cast<std::uint32_t>(parents_.size()));
  return id;
}

std::uint32_t Tape::materialize(const Var& v) {
  return v.is_constant() ? push_node(v.val) : v.node;
}

Var Tape::leaf(double value) {
  check(Primitive::Leaf, value);
  const auto id = push_node(value);
  leaf_nodes_.push_back(id);
  return Var(value, id);
}

std::vector<Var> Tape::leaves(std::span<const double> values) {
  std::vector<Var> out;
  out.reserve(values.size());
  const auto first = static_cast<std::uint32_t>(values_.size());
  const auto edges = static_cast<std::uint32_t>(parents_.size());
  values_.insert(values_.end(), values.begin(), values.end());
  edge_end_.insert(edge_end_.end(), values.size(), edges);
  for (std::size_t k = 0; k < values.size(); ++k) {
    check(Primitive::Leaf, values[k]);
    leaf_nodes_.push_back(first + static_cast<std::uint32_t>(k));
    out.emplace_back(values[k], first + static_cast<std::uint32_t>(k));
  }
  return out;
}

Var Tape::record(Primitive p, double value, const Var& a, double da) {
  check(p, value);
  check(p, da);
  parents_.push_back(a.node);
  partials_.push_back(da);
  const auto id = static_cast<std::uint32_t>(values_.size());
  values_.push_back(value);
  edge_end_.push_back(static_cast<std::uint32_t>(parents_.size()));
  return Var(value, id);
}

Var Tape::record(Primitive p, double value, const Var& a, double da, const Var& b, double db) {
  check(p, value);
  if (!a.is_constant()) {
    check(p, da);
    parents_.push_back(a.node);
    partials_.push_back(da);
  }
  if (!b.is_constant()) {
    check(p, db);
    parents_.push_back(b.node);
    partials_.push_back(db);
  }
  const auto id = static_cast<std::uint32_t>(values_.size());
  values_.push_back(value);
  edge_end_.push_back(static_cast<std::uint32_t>(parents_.size()));
  return Var(value, id);
}

Var Tape::dot(std::span<const Var> a, std::span<const Var> b) {
  if (a.size() != b.size()) {
    throw DiffError(DiffError::Kind::Shape, "dot: length mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i].val * b[i].val;
  check(Primitive::Dot, sum);
  bool any = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_constant()) {
      parents_.push_back(a[i].node);
      partials_.push_back(b[i].val);
      any = true;
    }
    if (!b[i].is_constant()) {
      parents_.push_back(b[i].node);
      partials_.push_back(a[i].val);
      any = true;
    }
  }
  if (!any) return Var(sum);
  const auto id = static_cast<std::uint32_t>(values_.size());
  values_.push_back(sum);
  edge_end_.push_back(static_cast<std::uint32_t>(parents_.size()));
  return Var(sum, id);
}

std::vector<Var> Tape::dense(std::span<const Var> w, std::span<const Var> b, std::span<const Var> x) {
  const std::size_t n_in = x.size();
  const std::size_t n_out = b.size();
  if (w.size() != n_in * n_out) {
    throw DiffError(DiffError::Kind::Shape, "dense: weight shape does not match input/output sizes");
  }
  bool contiguous = n_out > 0 && !b[0].is_constant() && (n_in == 0 || !w[0].is_constant());
  for (std::size_t k = 1; contiguous && k < w.size(); ++k) contiguous = w[k].node == w[0].node + k;
  for (std::size_t k = 1; contiguous && k < n_out; ++k) contiguous = b[k].node == b[0].node + k;

  std::vector<Var> y;
  y.reserve(n_out);
  if (!contiguous) {
    for (std::size_t o = 0; o < n_out; ++o) {
      y.push_back(diff::dot(w.subspan(o * n_in, n_in), x) + b[o]);
    }
    return y;
  }

  DenseOp op{};
  op.n_in = static_cast<std::uint32_t>(n_in);
  op.n_out = static_cast<std::uint32_t>(n_out);
  op.in_offset = static_cast<std::uint32_t>(dense_inputs_.size());
  for (const Var& xi : x) dense_inputs_.push_back(materialize(xi));
  op.w_node = n_in > 0 ? w[0].node : 0;
  op.b_node = b[0].node;
  op.out_node = static_cast<std::uint32_t>(values_.size());
  const double* wv = values_.data() + op.w_node;
  for (std::size_t o = 0; o < n_out; ++o) {
    double acc = values_[op.b_node + o];
    const double* row = wv + o * n_in;
    for (std::size_t j = 0; j < n_in; ++j) acc += row[j] * x[j].val;
    check(Primitive::Dense, acc);
    // values_ may reallocate, so re-read the weight base after push
    const auto id = push_node(acc);
    wv = values_.data() + op.w_node;
    y.emplace_back(acc, id);
  }
  dense_ops_.push_back(op);
  return y;
}

void Tape::backward(const Var& loss, std::span<double> grad) {
  if (consumed_) {
    throw DiffError(DiffError::Kind::TapeConsumed, "backward called twice on the same tape");
  }
  if (grad.size() != leaf_nodes_.size()) {
    throw DiffError(DiffError::Kind::Shape, "backward: gradient buffer does not match leaf count");
  }
  consumed_ = true;
  if (loss.is_constant()) return;

  const std::size_t n = values_.size();
  adjoints_.assign(n, 0.0);
  adjoints_[loss.node] = 1.0;

  // dense ops are recorded in increasing out_node order
  auto op_it = dense_ops_.rbegin();
  while (op_it != dense_ops_.rend() && op_it->out_node > loss.node) ++op_it;

  double* adj = adjoints_.data();
  const double* val = values_.data();
  for (std::int64_t i = loss.node; i >= 0; --i) {
    const double a = adj[i];
    const std::uint32_t begin = i == 0 ? 0 : edge_end_[i - 1];
    const std::uint32_t end = edge_end_[i];
    if (a != 0.0) {
      for (std::uint32_t e = begin; e < end; ++e) adj[parents_[e]] += partials_[e] * a;
    }
    if (op_it != dense_ops_.rend() && op_it->out_node == static_cast<std::uint32_t>(i)) {
      const DenseOp& op = *op_it;
      const std::uint32_t* in = dense_inputs_.data() + op.in_offset;
      for (std::uint32_t o = 0; o < op.n_out; ++o) {
        const double g = adj[op.out_node + o];
        if (g == 0.0) continue;
        adj[op.b_node + o] += g;
        double* wadj = adj + op.w_node + static_cast<std::size_t>(o) * op.n_in;
        const double* w = val + op.w_node + static_cast<std::size_t>(o) * op.n_in;
        for (std::uint32_t j = 0; j < op.n_in; ++j) {
          wadj[j] += g * val[in[j]];
          adj[in[j]] += g * w[j];
        }
      }
      ++op_it;
    }
  }
  for (std::size_t k = 0; k < leaf_nodes_.size(); ++k) grad[k] += adj[leaf_nodes_[k]];
}

std::vector<double> Tape::backward(const Var& loss) {
  std::vector<double> grad(leaf_nodes_.size(), 0.0);
  backward(loss, grad);
  return grad;
}

double Tape::adjoint(const Var& v) const {
  if (v.is_constant() || v.node >= adjoints_.size()) return 0.0;
  return adjoints_[v.node];
}

void Tape::clear() {
  values_.clear();
  edge_end_.clear();
  parents_.clear();
  partials_.clear();
  dense_ops_.clear();
  dense_inputs_.clear();
  leaf_nodes_.clear();
  adjoints_.clear();
  consumed_ = false;
}

Var dot(std::span<const Var> a, std::span<const Var> b) {
  Tape* t = active_tape();
  if (t == nullptr) {
    bool all_const = true;
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
      all_const = all_const && a[i].is_constant() && b[i].is_constant();
      sum += a[i].val * b[i].val;
    }
    if (a.size() != b.size()) throw DiffError(DiffError::Kind::Shape, "dot: length mismatch");
    if (all_const) return Var(sum);
    detail::require_tape(Primitive::Dot);
  }
  return t->dot(a, b);
}

}  // namespace mflow::diff
