#include "hypermml/autograd.hpp"

#include "hypermml/errors.hpp"

#include <cmath>
#include <unordered_set>

namespace hypermml::ag {

namespace {

thread_local bool g_grad_enabled = true;

void check_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

inline void push(Node& out, std::size_t i, const Mat& g) {
  auto& p = out.parents[i];
  if (p->requires_grad) p->accumulate(g);
}

inline bool wants(const Node& out, std::size_t i) { return out.parents[i]->requires_grad; }

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

void Node::accumulate(const Mat& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Var::Var(Mat value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Mat Var::grad() const {
  if (node_->has_grad()) return node_->grad;
  return Mat::Zero(node_->value.rows(), node_->value.cols());
}

Var constant(Mat value) { return Var(std::move(value), false); }
Var parameter(Mat value) { return Var(std::move(value), true); }
Var scalar(double v) { return constant(Mat::Constant(1, 1, v)); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Var make_op(Mat value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
  bool any = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) any = any || p.requires_grad();
  }
  if (!any) return constant(std::move(value));
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->parents.reserve(parents.size());
  for (auto& p : parents) node->parents.push_back(p.node());
  node->backward_fn = std::move(backward_fn);
  return Var(std::move(node));
}

void backward(const Var& root, bool retain_graph) {
  if (!root.requires_grad()) return;
  if (root.rows() != 1 || root.cols() != 1) throw ShapeError("backward: root must be 1x1");

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(Mat::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->has_grad()) n->backward_fn(*n);
  }

  if (!retain_graph) {
    for (Node* n : order) {
      if (n->backward_fn) {
        n->backward_fn = nullptr;
        n->grad.resize(0, 0);
        n->parents.clear();
      }
    }
  }
}

// ---------------------------------------------------------------------------

Var add(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "add");
  return make_op(a.value() + b.value(), {a, b}, [](Node& o) {
    push(o, 0, o.grad);
    push(o, 1, o.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "sub");
  return make_op(a.value() - b.value(), {a, b}, [](Node& o) {
    push(o, 0, o.grad);
    if (wants(o, 1)) push(o, 1, -o.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "mul");
  return make_op(a.value().cwiseProduct(b.value()), {a, b}, [](Node& o) {
    if (wants(o, 0)) push(o, 0, o.grad.cwiseProduct(o.parents[1]->value));
    if (wants(o, 1)) push(o, 1, o.grad.cwiseProduct(o.parents[0]->value));
  });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("add_row: row must be 1 x cols");
  Mat out = a.value().rowwise() + row.value().row(0);
  return make_op(std::move(out), {a, row}, [](Node& o) {
    push(o, 0, o.grad);
    if (wants(o, 1)) push(o, 1, o.grad.colwise().sum());
  });
}

Var mul_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("mul_row: row must be 1 x cols");
  Mat out = a.value().array().rowwise() * row.value().row(0).array();
  return make_op(std::move(out), {a, row}, [](Node& o) {
    const Mat& av = o.parents[0]->value;
    const Mat& rv = o.parents[1]->value;
    if (wants(o, 0)) push(o, 0, (o.grad.array().rowwise() * rv.row(0).array()).matrix());
    if (wants(o, 1)) push(o, 1, o.grad.cwiseProduct(av).colwise().sum());
  });
}

Var mul_col(const Var& a, const Var& col) {
  if (col.cols() != 1 || col.rows() != a.rows()) throw ShapeError("mul_col: col must be rows x 1");
  Mat out = a.value().array().colwise() * col.value().col(0).array();
  return make_op(std::move(out), {a, col}, [](Node& o) {
    const Mat& av = o.parents[0]->value;
    const Mat& cv = o.parents[1]->value;
    if (wants(o, 0)) push(o, 0, (o.grad.array().colwise() * cv.col(0).array()).matrix());
    if (wants(o, 1)) push(o, 1, o.grad.cwiseProduct(av).rowwise().sum());
  });
}

Var scale(const Var& a, double s) {
  return make_op(a.value() * s, {a}, [s](Node& o) { push(o, 0, o.grad * s); });
}

Var mul_scalar(const Var& a, const Var& s) {
  if (s.rows() != 1 || s.cols() != 1) throw ShapeError("mul_scalar: s must be 1x1");
  return make_op(a.value() * s.item(), {a, s}, [](Node& o) {
    const double sv = o.parents[1]->value(0, 0);
    if (wants(o, 0)) push(o, 0, o.grad * sv);
    if (wants(o, 1)) push(o, 1, Mat::Constant(1, 1, o.grad.cwiseProduct(o.parents[0]->value).sum()));
  });
}

Var add_scalar(const Var& a, double s) {
  return make_op((a.value().array() + s).matrix(), {a}, [](Node& o) { push(o, 0, o.grad); });
}

Var relu(const Var& a) {
  return make_op(a.value().cwiseMax(0.0), {a}, [](Node& o) {
    const Mat& x = o.parents[0]->value;
    push(o, 0, (x.array() > 0.0).select(o.grad, 0.0).matrix());
  });
}

Var leaky_relu(const Var& a, double slope) {
  Mat out = (a.value().array() > 0.0).select(a.value(), a.value() * slope);
  return make_op(std::move(out), {a}, [slope](Node& o) {
    const Mat& x = o.parents[0]->value;
    push(o, 0, (x.array() > 0.0).select(o.grad, o.grad * slope).matrix());
  });
}

Var sigmoid(const Var& a) {
  Mat out = a.value().unaryExpr(&sigmoid_scalar);
  return make_op(std::move(out), {a}, [](Node& o) {
    const Mat& y = o.value;
    push(o, 0, o.grad.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

Var tanh(const Var& a) {
  Mat out = a.value().array().tanh().matrix();
  return make_op(std::move(out), {a}, [](Node& o) {
    const Mat& y = o.value;
    push(o, 0, o.grad.cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Var softplus(const Var& a) {
  Mat out = a.value().unaryExpr([](double x) {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  });
  return make_op(std::move(out), {a}, [](Node& o) {
    const Mat& x = o.parents[0]->value;
    push(o, 0, o.grad.cwiseProduct(x.unaryExpr(&sigmoid_scalar)));
  });
}

Var exp(const Var& a) {
  Mat out = a.value().array().exp().matrix();
  return make_op(std::move(out), {a}, [](Node& o) { push(o, 0, o.grad.cwiseProduct(o.value)); });
}

Var log(const Var& a) {
  Mat out = a.value().array().log().matrix();
  return make_op(std::move(out), {a}, [](Node& o) {
    push(o, 0, o.grad.cwiseQuotient(o.parents[0]->value));
  });
}

Var log1p(const Var& a) {
  Mat out = a.value().array().log1p().matrix();
  return make_op(std::move(out), {a}, [](Node& o) {
    push(o, 0, o.grad.cwiseQuotient((1.0 + o.parents[0]->value.array()).matrix()));
  });
}

Var reciprocal(const Var& a) {
  Mat out = a.value().cwiseInverse();
  return make_op(std::move(out), {a}, [](Node& o) {
    push(o, 0, -o.grad.cwiseProduct(o.value.cwiseProduct(o.value)));
  });
}

Var square(const Var& a) {
  return make_op(a.value().cwiseProduct(a.value()), {a}, [](Node& o) {
    push(o, 0, 2.0 * o.grad.cwiseProduct(o.parents[0]->value));
  });
}

// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()));
  }
  Mat out = a.value() * b.value();
  return make_op(std::move(out), {a, b}, [](Node& o) {
    if (wants(o, 0)) push(o, 0, o.grad * o.parents[1]->value.transpose());
    if (wants(o, 1)) push(o, 1, o.parents[0]->value.transpose() * o.grad);
  });
}

Var transpose(const Var& a) {
  Mat out = a.value().transpose();
  return make_op(std::move(out), {a}, [](Node& o) { push(o, 0, o.grad.transpose()); });
}

Var sum(const Var& a) {
  return make_op(Mat::Constant(1, 1, a.value().sum()), {a}, [](Node& o) {
    const Mat& x = o.parents[0]->value;
    push(o, 0, Mat::Constant(x.rows(), x.cols(), o.grad(0, 0)));
  });
}

Var row_sum(const Var& a) {
  Mat out = a.value().rowwise().sum();
  return make_op(std::move(out), {a}, [](Node& o) {
    const Mat& x = o.parents[0]->value;
    Mat g(x.rows(), x.cols());
    g.colwise() = o.grad.col(0);
    push(o, 0, g);
  });
}

Var col_sum(const Var& a) {
  Mat out = a.value().colwise().sum();
  return make_op(std::move(out), {a}, [](Node& o) {
    const Mat& x = o.parents[0]->value;
    Mat g(x.rows(), x.cols());
    g.rowwise() = o.grad.row(0);
    push(o, 0, g);
  });
}

Var col_mean(const Var& a) { return scale(col_sum(a), 1.0 / static_cast<double>(a.rows())); }

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ShapeError("slice_rows: out of range");
  Mat out = a.value().middleRows(start, count);
  return make_op(std::move(out), {a}, [start, count](Node& o) {
    const Mat& x = o.parents[0]->value;
    if (!o.parents[0]->has_grad()) o.parents[0]->grad = Mat::Zero(x.rows(), x.cols());
    o.parents[0]->grad.middleRows(start, count) += o.grad;
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ShapeError("slice_cols: out of range");
  Mat out = a.value().middleCols(start, count);
  return make_op(std::move(out), {a}, [start, count](Node& o) {
    const Mat& x = o.parents[0]->value;
    if (!o.parents[0]->has_grad()) o.parents[0]->grad = Mat::Zero(x.rows(), x.cols());
    o.parents[0]->grad.middleCols(start, count) += o.grad;
  });
}

Var select_rows(const Var& a, std::vector<Eigen::Index> rows) {
  Mat out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) throw ShapeError("select_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(rows[i]);
  }
  return make_op(std::move(out), {a}, [rows = std::move(rows)](Node& o) {
    const Mat& x = o.parents[0]->value;
    if (!o.parents[0]->has_grad()) o.parents[0]->grad = Mat::Zero(x.rows(), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      o.parents[0]->grad.row(rows[i]) += o.grad.row(static_cast<Eigen::Index>(i));
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column mismatch");
    rows += p.rows();
  }
  Mat out(rows, cols);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return make_op(std::move(out), std::vector<Var>(parts.begin(), parts.end()), [](Node& o) {
    Eigen::Index r0 = 0;
    for (std::size_t i = 0; i < o.parents.size(); ++i) {
      const Eigen::Index n = o.parents[i]->value.rows();
      if (wants(o, i)) push(o, i, o.grad.middleRows(r0, n));
      r0 += n;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Mat out(rows, cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return make_op(std::move(out), std::vector<Var>(parts.begin(), parts.end()), [](Node& o) {
    Eigen::Index c0 = 0;
    for (std::size_t i = 0; i < o.parents.size(); ++i) {
      const Eigen::Index n = o.parents[i]->value.cols();
      if (wants(o, i)) push(o, i, o.grad.middleCols(c0, n));
      c0 += n;
    }
  });
}

Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) throw ShapeError("reshape: size mismatch");
  Mat out = Eigen::Map<const Mat>(a.value().data(), rows, cols);
  return make_op(std::move(out), {a}, [](Node& o) {
    const Mat& x = o.parents[0]->value;
    push(o, 0, Eigen::Map<const Mat>(o.grad.data(), x.rows(), x.cols()));
  });
}

Var scatter(const Var& source, Eigen::Index rows, Eigen::Index cols, std::vector<ScatterEntry> entries) {
  if (source.rows() != 1) throw ShapeError("scatter: source must be a row vector");
  Mat out = Mat::Zero(rows, cols);
  for (const auto& e : entries) {
    if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols || e.source < 0 ||
        e.source >= source.cols()) {
      throw ShapeError("scatter: entry out of range");
    }
    out(e.row, e.col) += source.value()(0, e.source);
  }
  return make_op(std::move(out), {source}, [entries = std::move(entries)](Node& o) {
    Mat g = Mat::Zero(1, o.parents[0]->value.cols());
    for (const auto& e : entries) g(0, e.source) += o.grad(e.row, e.col);
    push(o, 0, g);
  });
}

// ---------------------------------------------------------------------------

Var softmax_rows(const Var& a) {
  Mat out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return make_op(std::move(out), {a}, [](Node& o) {
    const Mat& y = o.value;
    const Mat gy = o.grad.cwiseProduct(y);
    Mat g = gy - (y.array().colwise() * gy.rowwise().sum().array()).matrix();
    push(o, 0, g);
  });
}

Var layer_norm_all(const Var& a, double eps) {
  const Mat& x = a.value();
  const double n = static_cast<double>(x.size());
  const double mean = x.sum() / n;
  const double var = (x.array() - mean).square().sum() / n;
  const double inv = 1.0 / std::sqrt(var + eps);
  Mat out = ((x.array() - mean) * inv).matrix();
  return make_op(std::move(out), {a}, [inv, n](Node& o) {
    const Mat& y = o.value;
    const double gmean = o.grad.sum() / n;
    const double gy = o.grad.cwiseProduct(y).sum() / n;
    push(o, 0, (inv * (o.grad.array() - gmean - y.array() * gy)).matrix());
  });
}

Var layer_norm_rows(const Var& a, double eps) {
  const Mat& x = a.value();
  const double n = static_cast<double>(x.cols());
  Vec inv(x.rows());
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).sum() / n;
    const double var = (x.row(r).array() - mean).square().sum() / n;
    inv(r) = 1.0 / std::sqrt(var + eps);
    out.row(r) = ((x.row(r).array() - mean) * inv(r)).matrix();
  }
  return make_op(std::move(out), {a}, [inv, n](Node& o) {
    const Mat& y = o.value;
    Mat g(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double gmean = o.grad.row(r).sum() / n;
      const double gy = o.grad.row(r).cwiseProduct(y.row(r)).sum() / n;
      g.row(r) = (inv(r) * (o.grad.row(r).array() - gmean - y.row(r).array() * gy)).matrix();
    }
    push(o, 0, g);
  });
}

Var dropout(const Var& a, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return a;
  if (rate >= 1.0) return constant(Mat::Zero(a.rows(), a.cols()));
  const double keep = 1.0 - rate;
  Mat mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    mask.data()[i] = u < keep ? 1.0 / keep : 0.0;
  }
  Mat out = a.value().cwiseProduct(mask);
  return make_op(std::move(out), {a}, [mask = std::move(mask)](Node& o) {
    push(o, 0, o.grad.cwiseProduct(mask));
  });
}

Var cross_entropy_sum(const Var& logits, std::span<const int> labels) {
  const Mat& z = logits.value();
  if (static_cast<Eigen::Index>(labels.size()) != z.rows()) throw ShapeError("cross_entropy: label count");
  constexpr double kMinProb = 1e-12;
  const double log_min = std::log(kMinProb);
  Mat prob(z.rows(), z.cols());
  std::vector<bool> clamped(labels.size(), false);
  double total = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= z.cols()) throw ArgumentError("cross_entropy: label out of range");
    const double m = z.row(r).maxCoeff();
    const double lse = m + std::log((z.row(r).array() - m).exp().sum());
    prob.row(r) = (z.row(r).array() - lse).exp().matrix();
    double logp = z(r, y) - lse;
    if (logp < log_min) {
      logp = log_min;
      clamped[static_cast<std::size_t>(r)] = true;
    }
    total -= logp;
  }
  std::vector<int> ys(labels.begin(), labels.end());
  return make_op(Mat::Constant(1, 1, total), {logits},
                 [prob = std::move(prob), ys = std::move(ys), clamped = std::move(clamped)](Node& o) {
                   Mat g = prob;
                   for (Eigen::Index r = 0; r < g.rows(); ++r) {
                     if (clamped[static_cast<std::size_t>(r)]) {
                       g.row(r).setZero();
                     } else {
                       g(r, ys[static_cast<std::size_t>(r)]) -= 1.0;
                     }
                   }
                   push(o, 0, g * o.grad(0, 0));
                 });
}

Var l2_norm(std::span<const Var> tensors) {
  double ss = 0.0;
  for (const auto& t : tensors) ss += t.value().squaredNorm();
  const double norm = std::sqrt(ss);
  return make_op(Mat::Constant(1, 1, norm), std::vector<Var>(tensors.begin(), tensors.end()),
                 [norm](Node& o) {
                   if (norm == 0.0) return;
                   const double s = o.grad(0, 0) / norm;
                   for (std::size_t i = 0; i < o.parents.size(); ++i) {
                     if (wants(o, i)) push(o, i, o.parents[i]->value * s);
                   }
                 });
}

Var gru_cell(const Var& x_proj, const Var& h, const Var& w_hh, const Var& b_hh) {
  const Eigen::Index H = h.cols();
  if (x_proj.cols() != 3 * H || w_hh.rows() != H || w_hh.cols() != 3 * H || b_hh.cols() != 3 * H ||
      x_proj.rows() != h.rows()) {
    throw ShapeError("gru_cell: inconsistent shapes");
  }
  Mat hh = h.value() * w_hh.value();
  hh.rowwise() += b_hh.value().row(0);
  const Mat& xp = x_proj.value();
  Mat r = (xp.leftCols(H) + hh.leftCols(H)).unaryExpr(&sigmoid_scalar);
  Mat z = (xp.middleCols(H, H) + hh.middleCols(H, H)).unaryExpr(&sigmoid_scalar);
  Mat hn = hh.rightCols(H);
  Mat n = (xp.rightCols(H) + r.cwiseProduct(hn)).array().tanh().matrix();
  Mat out = ((1.0 - z.array()) * n.array() + z.array() * h.value().array()).matrix();

  return make_op(std::move(out), {x_proj, h, w_hh, b_hh},
                 [r = std::move(r), z = std::move(z), n = std::move(n), hn = std::move(hn), H](Node& o) {
                   const Mat& g = o.grad;
                   const Mat& hv = o.parents[1]->value;
                   const Mat dn = g.cwiseProduct((1.0 - z.array()).matrix());
                   const Mat dz = g.cwiseProduct(hv - n);
                   const Mat dn_pre = dn.cwiseProduct((1.0 - n.array().square()).matrix());
                   const Mat dr = dn_pre.cwiseProduct(hn);
                   const Mat dz_pre = dz.cwiseProduct(z.cwiseProduct((1.0 - z.array()).matrix()));
                   const Mat dr_pre = dr.cwiseProduct(r.cwiseProduct((1.0 - r.array()).matrix()));
                   Mat dx(g.rows(), 3 * H);
                   dx << dr_pre, dz_pre, dn_pre;
                   Mat dhh(g.rows(), 3 * H);
                   dhh << dr_pre, dz_pre, dn_pre.cwiseProduct(r);
                   if (wants(o, 0)) push(o, 0, dx);
                   if (wants(o, 1)) {
                     push(o, 1, g.cwiseProduct(z) + dhh * o.parents[2]->value.transpose());
                   }
                   if (wants(o, 2)) push(o, 2, hv.transpose() * dhh);
                   if (wants(o, 3)) push(o, 3, dhh.colwise().sum());
                 });
}

}  // namespace hypermml::ag
