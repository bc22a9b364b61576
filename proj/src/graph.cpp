#include "memqa/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "memqa/error.hpp"
#include "memqa/simd/kernels.hpp"

namespace memqa {

const Tensor& Var::value() const { return graph_->nodes_.at(id_).value; }

Var Graph::Constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Graph::Parameter(const std::string& name, const Tensor& value) {
  if (auto it = params_.find(name); it != params_.end()) return Var(this, it->second);
  nodes_.push_back(Node{value, {}, false, true, {}});
  params_.emplace(name, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Graph::Record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  bool needs_grad = false;
  for (const Var& in : inputs) {
    if (in.graph_ != this) throw std::invalid_argument("op input belongs to a different graph");
    needs_grad = needs_grad || nodes_[in.id_].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, false, needs_grad,
                        needs_grad ? std::move(backward) : BackwardFn{}});
  return Var(this, nodes_.size() - 1);
}

Tensor& Graph::GradBuffer(Var v) {
  Node& n = nodes_.at(v.id_);
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

Tensor Graph::Grad(Var v) const {
  const Node& n = nodes_.at(v.id_);
  return n.has_grad ? n.grad : Tensor(n.value.shape());
}

void Graph::Backward(Var loss) {
  if (loss.graph_ != this) throw std::invalid_argument("loss belongs to a different graph");
  if (value(loss).size() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " + ShapeString(value(loss).shape()));
  }
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  GradBuffer(loss)[0] = 1.0;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.requires_grad || !n.backward) continue;
    // Callbacks only touch the buffers of earlier nodes.
    n.backward(*this, n.value, n.grad);
  }
}

ParamStore Graph::ParamGrads(const ParamStore& params) const {
  ParamStore out;
  for (const auto& name : params.names()) {
    auto it = params_.find(name);
    if (it != params_.end() && nodes_[it->second].has_grad) {
      out.Add(name, nodes_[it->second].grad);
    } else {
      out.Add(name, Tensor(params.Get(name).shape()));
    }
  }
  return out;
}

namespace ops {
namespace {

void RequireSameShape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + ShapeString(a.shape()) + " vs " +
                     ShapeString(b.shape()));
  }
}

Graph& G(Var v) { return *v.graph(); }

template <typename Fwd, typename Bwd>
Var Elementwise2(Var a, Var b, const char* name, Fwd fwd, Bwd bwd) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  RequireSameShape(av, bv, name);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
  const Var ins[] = {a, b};
  return G(a).Record(std::move(out), ins, [a, b, bwd](Graph& g, const Tensor&, const Tensor& dy) {
    const Tensor& x = g.value(a);
    const Tensor& y = g.value(b);
    const bool ga = g.RequiresGrad(a);
    const bool gb = g.RequiresGrad(b);
    Tensor* da = ga ? &g.GradBuffer(a) : nullptr;
    Tensor* db = gb ? &g.GradBuffer(b) : nullptr;
    for (std::size_t i = 0; i < dy.size(); ++i) {
      double pa = 0.0;
      double pb = 0.0;
      bwd(x[i], y[i], pa, pb);
      if (da) (*da)[i] += dy[i] * pa;
      if (db) (*db)[i] += dy[i] * pb;
    }
  });
}

}  // namespace

Var Affine(Var x, Var weight, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  if (wv.rank() != 2 || xv.rank() < 1 || xv.cols() != wv.dim(0) || bv.size() != wv.dim(1)) {
    throw ShapeError("affine: x " + ShapeString(xv.shape()) + ", weight " + ShapeString(wv.shape()) +
                     ", bias " + ShapeString(bv.shape()));
  }
  const std::size_t in = wv.dim(0);
  const std::size_t out_dim = wv.dim(1);
  const std::size_t rows = xv.rows();
  Shape out_shape = xv.shape();
  out_shape.back() = out_dim;
  Tensor out(out_shape);
  const auto& k = simd::Active();
  for (std::size_t r = 0; r < rows; ++r) {
    double* y = out.ptr() + r * out_dim;
    std::copy(bv.ptr(), bv.ptr() + out_dim, y);
    const double* xr = xv.ptr() + r * in;
    for (std::size_t i = 0; i < in; ++i) {
      if (xr[i] != 0.0) k.axpy(xr[i], wv.ptr() + i * out_dim, y, out_dim);
    }
  }
  const Var ins[] = {x, weight, bias};
  return G(x).Record(std::move(out), ins, [x, weight, bias, in, out_dim, rows](Graph& g, const Tensor&, const Tensor& dy) {
    const auto& k = simd::Active();
    const Tensor& xv = g.value(x);
    const Tensor& wv = g.value(weight);
    if (g.RequiresGrad(x)) {
      Tensor& dx = g.GradBuffer(x);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* dyr = dy.ptr() + r * out_dim;
        double* dxr = dx.ptr() + r * in;
        for (std::size_t i = 0; i < in; ++i) dxr[i] += k.dot(dyr, wv.ptr() + i * out_dim, out_dim);
      }
    }
    if (g.RequiresGrad(weight)) {
      Tensor& dw = g.GradBuffer(weight);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* dyr = dy.ptr() + r * out_dim;
        const double* xr = xv.ptr() + r * in;
        for (std::size_t i = 0; i < in; ++i) {
          if (xr[i] != 0.0) k.axpy(xr[i], dyr, dw.ptr() + i * out_dim, out_dim);
        }
      }
    }
    if (g.RequiresGrad(bias)) {
      Tensor& db = g.GradBuffer(bias);
      for (std::size_t r = 0; r < rows; ++r) k.axpy(1.0, dy.ptr() + r * out_dim, db.ptr(), out_dim);
    }
  });
}

Var Relu(Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  const Var ins[] = {x};
  return G(x).Record(std::move(out), ins, [x](Graph& g, const Tensor& y, const Tensor& dy) {
    Tensor& dx = g.GradBuffer(x);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      if (y[i] > 0.0) dx[i] += dy[i];
    }
  });
}

Var Softmax(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() < 1 || xv.cols() == 0) throw ShapeError("softmax: empty last axis");
  Tensor out(xv.shape());
  const std::size_t c = xv.cols();
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    const double* xr = xv.ptr() + r * c;
    double* yr = out.ptr() + r * c;
    const double m = *std::max_element(xr, xr + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (yr[j] = std::exp(xr[j] - m));
    for (std::size_t j = 0; j < c; ++j) yr[j] /= z;
  }
  const Var ins[] = {x};
  return G(x).Record(std::move(out), ins, [x, c](Graph& g, const Tensor& y, const Tensor& dy) {
    Tensor& dx = g.GradBuffer(x);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const double* yr = y.ptr() + r * c;
      const double* gr = dy.ptr() + r * c;
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += yr[j] * gr[j];
      for (std::size_t j = 0; j < c; ++j) dx[r * c + j] += yr[j] * (gr[j] - dot);
    }
  });
}

Var Dropout(Var x, double rate, bool train, RngStream& rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must be in [0, 1)");
  if (!train || rate == 0.0) return x;
  const Tensor& xv = x.value();
  std::vector<double> keep(xv.size());
  const double scale = 1.0 / (1.0 - rate);
  for (double& k : keep) k = rng.Uniform() < rate ? 0.0 : scale;
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * keep[i];
  const Var ins[] = {x};
  return G(x).Record(std::move(out), ins,
                     [x, keep = std::move(keep)](Graph& g, const Tensor&, const Tensor& dy) {
                       Tensor& dx = g.GradBuffer(x);
                       for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * keep[i];
                     });
}

namespace {

void CheckTimeInput(const Tensor& xv, std::span<const std::uint8_t> mask, const char* op) {
  if (xv.rank() != 3 || mask.size() != xv.dim(0) * xv.dim(1)) {
    throw ShapeError(std::string(op) + ": input " + ShapeString(xv.shape()) + " with mask of " +
                     std::to_string(mask.size()));
  }
}

}  // namespace

Var MaxOverTime(Var x, std::span<const std::uint8_t> mask) {
  const Tensor& xv = x.value();
  CheckTimeInput(xv, mask, "max_over_time");
  const std::size_t batch = xv.dim(0);
  const std::size_t len = xv.dim(1);
  const std::size_t h = xv.dim(2);
  Tensor out({batch, h});
  // Source row (within the flattened [B*L, h] view) of each output entry;
  // -1 where the sequence has no real token.
  std::vector<std::int64_t> argmax(batch * h, -1);
  for (std::size_t b = 0; b < batch; ++b) {
    double* y = out.ptr() + b * h;
    std::int64_t* am = argmax.data() + b * h;
    for (std::size_t t = 0; t < len; ++t) {
      if (!mask[b * len + t]) continue;
      const std::size_t row = b * len + t;
      const double* xr = xv.ptr() + row * h;
      for (std::size_t j = 0; j < h; ++j) {
        if (am[j] < 0 || xr[j] > y[j]) {
          y[j] = xr[j];
          am[j] = static_cast<std::int64_t>(row);
        }
      }
    }
  }
  const Var ins[] = {x};
  return G(x).Record(std::move(out), ins,
                     [x, h, argmax = std::move(argmax)](Graph& g, const Tensor&, const Tensor& dy) {
                       Tensor& dx = g.GradBuffer(x);
                       for (std::size_t i = 0; i < argmax.size(); ++i) {
                         if (argmax[i] >= 0) dx[static_cast<std::size_t>(argmax[i]) * h + i % h] += dy[i];
                       }
                     });
}

Var MeanOverTime(Var x, std::span<const std::uint8_t> mask) {
  const Tensor& xv = x.value();
  CheckTimeInput(xv, mask, "mean_over_time");
  const std::size_t batch = xv.dim(0);
  const std::size_t len = xv.dim(1);
  const std::size_t h = xv.dim(2);
  Tensor out({batch, h});
  std::vector<double> inv_count(batch, 0.0);
  const auto& k = simd::Active();
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t n = 0;
    for (std::size_t t = 0; t < len; ++t) {
      if (!mask[b * len + t]) continue;
      k.axpy(1.0, xv.ptr() + (b * len + t) * h, out.ptr() + b * h, h);
      ++n;
    }
    if (n > 0) {
      inv_count[b] = 1.0 / static_cast<double>(n);
      for (std::size_t j = 0; j < h; ++j) out[b * h + j] *= inv_count[b];
    }
  }
  std::vector<std::uint8_t> mask_copy(mask.begin(), mask.end());
  const Var ins[] = {x};
  return G(x).Record(std::move(out), ins,
                     [x, len, h, inv_count = std::move(inv_count), mask_copy = std::move(mask_copy)](
                         Graph& g, const Tensor&, const Tensor& dy) {
                       Tensor& dx = g.GradBuffer(x);
                       const auto& k = simd::Active();
                       for (std::size_t b = 0; b < inv_count.size(); ++b) {
                         for (std::size_t t = 0; t < len; ++t) {
                           if (!mask_copy[b * len + t]) continue;
                           k.axpy(inv_count[b], dy.ptr() + b * h, dx.ptr() + (b * len + t) * h, h);
                         }
                       }
                     });
}

Var Conv1d(Var x, Var kernel, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& kv = kernel.value();
  const Tensor& bv = bias.value();
  if (xv.rank() != 3 || kv.rank() != 3 || kv.dim(1) != xv.dim(2) || bv.size() != kv.dim(2) ||
      kv.dim(0) == 0 || kv.dim(0) > xv.dim(1)) {
    throw ShapeError("conv1d: x " + ShapeString(xv.shape()) + ", kernel " + ShapeString(kv.shape()) +
                     ", bias " + ShapeString(bv.shape()));
  }
  const std::size_t batch = xv.dim(0);
  const std::size_t width = xv.dim(1);
  const std::size_t ch = xv.dim(2);
  const std::size_t kw = kv.dim(0);
  const std::size_t n = kv.dim(2);
  const std::size_t windows = width - kw + 1;
  // A window of kw consecutive positions is kw*ch contiguous values, and the
  // kernel viewed as [kw*ch, n] maps it to one output row.
  const std::size_t span = kw * ch;
  Tensor out({batch, windows, n});
  const auto& k = simd::Active();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < windows; ++t) {
      double* y = out.ptr() + (b * windows + t) * n;
      std::copy(bv.ptr(), bv.ptr() + n, y);
      const double* win = xv.ptr() + (b * width + t) * ch;
      for (std::size_t q = 0; q < span; ++q) {
        if (win[q] != 0.0) k.axpy(win[q], kv.ptr() + q * n, y, n);
      }
    }
  }
  const Var ins[] = {x, kernel, bias};
  return G(x).Record(std::move(out), ins,
                     [x, kernel, bias, batch, width, ch, windows, span, n](Graph& g, const Tensor&,
                                                                         const Tensor& dy) {
                       const auto& k = simd::Active();
                       const Tensor& xv = g.value(x);
                       const Tensor& kv = g.value(kernel);
                       Tensor* dx = g.RequiresGrad(x) ? &g.GradBuffer(x) : nullptr;
                       Tensor* dk = g.RequiresGrad(kernel) ? &g.GradBuffer(kernel) : nullptr;
                       Tensor* db = g.RequiresGrad(bias) ? &g.GradBuffer(bias) : nullptr;
                       for (std::size_t b = 0; b < batch; ++b) {
                         for (std::size_t t = 0; t < windows; ++t) {
                           const double* dyr = dy.ptr() + (b * windows + t) * n;
                           const std::size_t off = (b * width + t) * ch;
                           if (dx) {
                             for (std::size_t q = 0; q < span; ++q) {
                               (*dx)[off + q] += k.dot(dyr, kv.ptr() + q * n, n);
                             }
                           }
                           if (dk) {
                             const double* win = xv.ptr() + off;
                             for (std::size_t q = 0; q < span; ++q) {
                               if (win[q] != 0.0) k.axpy(win[q], dyr, dk->ptr() + q * n, n);
                             }
                           }
                           if (db) k.axpy(1.0, dyr, db->ptr(), n);
                         }
                       }
                     });
}

Var Concat(std::span<const Var> xs) {
  if (xs.empty()) throw ShapeError("concat: no inputs");
  const Tensor& first = xs[0].value();
  if (first.rank() < 1) throw ShapeError("concat: scalar input");
  const std::size_t rows = first.rows();
  Shape lead(first.shape().begin(), first.shape().end() - 1);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& v : xs) {
    const Tensor& t = v.value();
    if (Shape(t.shape().begin(), t.shape().end() - 1) != lead) {
      throw ShapeError("concat: leading shape mismatch " + ShapeString(first.shape()) + " vs " +
                       ShapeString(t.shape()));
    }
    widths.push_back(t.cols());
    total += t.cols();
  }
  Shape out_shape = lead;
  out_shape.push_back(total);
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Tensor& t = xs[i].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(t.ptr() + r * widths[i], t.ptr() + (r + 1) * widths[i], out.ptr() + r * total + offset);
    }
    offset += widths[i];
  }
  std::vector<Var> inputs(xs.begin(), xs.end());
  return G(xs[0]).Record(std::move(out), xs,
                         [inputs, widths, rows, total](Graph& g, const Tensor&, const Tensor& dy) {
                           std::size_t offset = 0;
                           for (std::size_t i = 0; i < inputs.size(); ++i) {
                             if (g.RequiresGrad(inputs[i])) {
                               Tensor& dx = g.GradBuffer(inputs[i]);
                               for (std::size_t r = 0; r < rows; ++r) {
                                 const double* src = dy.ptr() + r * total + offset;
                                 double* dst = dx.ptr() + r * widths[i];
                                 for (std::size_t j = 0; j < widths[i]; ++j) dst[j] += src[j];
                               }
                             }
                             offset += widths[i];
                           }
                         });
}

Var Concat(std::initializer_list<Var> xs) { return Concat(std::span<const Var>(xs.begin(), xs.size())); }

Var Hadamard(Var a, Var b) {
  return Elementwise2(
      a, b, "hadamard", [](double x, double y) { return x * y; },
      [](double x, double y, double& da, double& db) {
        da = y;
        db = x;
      });
}

Var AbsDiff(Var a, Var b) {
  return Elementwise2(
      a, b, "abs_diff", [](double x, double y) { return std::abs(x - y); },
      [](double x, double y, double& da, double& db) {
        const double s = x > y ? 1.0 : (x < y ? -1.0 : 0.0);
        da = s;
        db = -s;
      });
}

Var Add(Var a, Var b) {
  return Elementwise2(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double& da, double& db) {
        da = 1.0;
        db = 1.0;
      });
}

Var Sub(Var a, Var b) {
  return Elementwise2(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double& da, double& db) {
        da = 1.0;
        db = -1.0;
      });
}

Var Div(Var a, Var b) {
  return Elementwise2(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double x, double y, double& da, double& db) {
        da = 1.0 / y;
        db = -x / (y * y);
      });
}

Var Scale(Var x, double c) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * xv[i];
  const Var ins[] = {x};
  return G(x).Record(std::move(out), ins, [x, c](Graph& g, const Tensor&, const Tensor& dy) {
    simd::Active().axpy(c, dy.ptr(), g.GradBuffer(x).ptr(), dy.size());
  });
}

Var AddScalar(Var x, double c) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] + c;
  const Var ins[] = {x};
  return G(x).Record(std::move(out), ins, [x](Graph& g, const Tensor&, const Tensor& dy) {
    simd::Active().axpy(1.0, dy.ptr(), g.GradBuffer(x).ptr(), dy.size());
  });
}

Var Log(Var x, double floor) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(xv[i], floor));
  const Var ins[] = {x};
  return G(x).Record(std::move(out), ins, [x, floor](Graph& g, const Tensor&, const Tensor& dy) {
    const Tensor& xv = g.value(x);
    Tensor& dx = g.GradBuffer(x);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      if (xv[i] > floor) dx[i] += dy[i] / xv[i];
    }
  });
}

Var Exp(Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(xv[i]);
  const Var ins[] = {x};
  return G(x).Record(std::move(out), ins, [x](Graph& g, const Tensor& y, const Tensor& dy) {
    Tensor& dx = g.GradBuffer(x);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * y[i];
  });
}

Var Sum(Var x) {
  const Tensor& xv = x.value();
  double s = 0.0;
  for (double v : xv.data()) s += v;
  const Var ins[] = {x};
  return G(x).Record(Tensor::Scalar(s), ins, [x](Graph& g, const Tensor&, const Tensor& dy) {
    Tensor& dx = g.GradBuffer(x);
    for (double& v : dx.data()) v += dy[0];
  });
}

Var Mean(Var x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw ShapeError("mean: empty tensor");
  return Scale(Sum(x), 1.0 / static_cast<double>(n));
}

Var WeightedSum(Var x, std::span<const double> weights) {
  const Tensor& xv = x.value();
  if (weights.size() != xv.size()) {
    throw ShapeError("weighted_sum: " + std::to_string(weights.size()) + " weights for tensor " +
                     ShapeString(xv.shape()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) s += weights[i] * xv[i];
  std::vector<double> w(weights.begin(), weights.end());
  const Var ins[] = {x};
  return G(x).Record(Tensor::Scalar(s), ins, [x, w = std::move(w)](Graph& g, const Tensor&, const Tensor& dy) {
    simd::Active().axpy(dy[0], w.data(), g.GradBuffer(x).ptr(), w.size());
  });
}

Var Pick(Var x, std::span<const std::size_t> index) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || index.size() != xv.dim(0)) {
    throw ShapeError("pick: input " + ShapeString(xv.shape()) + " with " + std::to_string(index.size()) +
                     " indices");
  }
  const std::size_t c = xv.dim(1);
  Tensor out({index.size()});
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= c) throw ShapeError("pick: column index out of range");
    out[r] = xv.at(r, index[r]);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  const Var ins[] = {x};
  return G(x).Record(std::move(out), ins, [x, c, idx = std::move(idx)](Graph& g, const Tensor&, const Tensor& dy) {
    Tensor& dx = g.GradBuffer(x);
    for (std::size_t r = 0; r < idx.size(); ++r) dx[r * c + idx[r]] += dy[r];
  });
}

Var Cosine(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  RequireSameShape(av, bv, "cosine");
  if (av.rank() != 2) throw ShapeError("cosine: expects [B, d], got " + ShapeString(av.shape()));
  const std::size_t rows = av.dim(0);
  const std::size_t d = av.dim(1);
  const auto& k = simd::Active();
  Tensor out({rows});
  std::vector<double> na(rows), nb(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av.ptr() + r * d;
    const double* y = bv.ptr() + r * d;
    na[r] = std::sqrt(k.dot(x, x, d));
    nb[r] = std::sqrt(k.dot(y, y, d));
    out[r] = (na[r] > 0.0 && nb[r] > 0.0) ? k.dot(x, y, d) / (na[r] * nb[r]) : 0.0;
  }
  const Var ins[] = {a, b};
  return G(a).Record(std::move(out), ins,
                     [a, b, d, na = std::move(na), nb = std::move(nb)](Graph& g, const Tensor& cos,
                                                                       const Tensor& dy) {
                       const Tensor& av = g.value(a);
                       const Tensor& bv = g.value(b);
                       Tensor* da = g.RequiresGrad(a) ? &g.GradBuffer(a) : nullptr;
                       Tensor* db = g.RequiresGrad(b) ? &g.GradBuffer(b) : nullptr;
                       for (std::size_t r = 0; r < na.size(); ++r) {
                         if (na[r] == 0.0 || nb[r] == 0.0) continue;
                         const double* x = av.ptr() + r * d;
                         const double* y = bv.ptr() + r * d;
                         for (std::size_t j = 0; j < d; ++j) {
                           // d cos / dx = y/(|x||y|) - cos * x/|x|^2
                           if (da) {
                             (*da)[r * d + j] += dy[r] * (y[j] / (na[r] * nb[r]) - cos[r] * x[j] / (na[r] * na[r]));
                           }
                           if (db) {
                             (*db)[r * d + j] += dy[r] * (x[j] / (na[r] * nb[r]) - cos[r] * y[j] / (nb[r] * nb[r]));
                           }
                         }
                       }
                     });
}

Var GatherRows(Var table, std::span<const std::int32_t> ids) {
  const Tensor& tv = table.value();
  if (tv.rank() != 2) throw ShapeError("gather_rows: table must be 2-D, got " + ShapeString(tv.shape()));
  const std::size_t c = tv.dim(1);
  Tensor out({ids.size(), c});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= tv.dim(0)) {
      throw ShapeError("gather_rows: id " + std::to_string(ids[i]) + " outside table of " +
                       std::to_string(tv.dim(0)) + " rows");
    }
    const double* src = tv.ptr() + static_cast<std::size_t>(ids[i]) * c;
    std::copy(src, src + c, out.ptr() + i * c);
  }
  std::vector<std::int32_t> idv(ids.begin(), ids.end());
  const Var ins[] = {table};
  return G(table).Record(std::move(out), ins,
                         [table, c, idv = std::move(idv)](Graph& g, const Tensor&, const Tensor& dy) {
                           Tensor& dt = g.GradBuffer(table);
                           const auto& k = simd::Active();
                           for (std::size_t i = 0; i < idv.size(); ++i) {
                             k.axpy(1.0, dy.ptr() + i * c, dt.ptr() + static_cast<std::size_t>(idv[i]) * c, c);
                           }
                         });
}

Var Reshape(Var x, Shape shape) {
  Tensor out = x.value().Reshaped(std::move(shape));
  const Var ins[] = {x};
  return G(x).Record(std::move(out), ins, [x](Graph& g, const Tensor&, const Tensor& dy) {
    simd::Active().axpy(1.0, dy.ptr(), g.GradBuffer(x).ptr(), dy.size());
  });
}

}  // namespace ops
}  // namespace memqa
