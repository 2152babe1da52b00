// Copyright 2026 The EquiSwarm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "equiswarm/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "equiswarm/errors.hpp"
#include "equiswarm/kernels.hpp"

namespace equiswarm {

// ---------------------------------------------------------------------------
// ParameterStore

Parameter& ParameterStore::add(std::string name, Tensor value) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Tensor(value.shape(), 0);
  p->value = std::move(value);
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterStore::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

const Parameter* ParameterStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

Parameter& ParameterStore::get(const std::string& name) {
  Parameter* p = find(name);
  if (!p) throw ConfigError("unknown parameter: " + name);
  return *p;
}

std::size_t ParameterStore::element_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) {
    if (!p->grad.same_shape(p->value)) p->grad = Tensor(p->value.shape(), 0);
    p->grad.fill(0);
  }
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
  if (other.size() != size()) throw ShapeError("parameter count mismatch");
  for (std::size_t i = 0; i < size(); ++i) {
    const Parameter& src = other[i];
    Parameter& dst = *params_[i];
    if (src.name != dst.name || !src.value.same_shape(dst.value)) {
      throw ShapeError("parameter mismatch: " + dst.name + " " +
                       dst.value.shape_string() + " vs " + src.name + " " +
                       src.value.shape_string());
    }
    dst.value = src.value;
  }
}

// ---------------------------------------------------------------------------
// Tape

const Tensor& Var::value() const {
  if (!tape_) throw TapeError("access to an unbound Var");
  return tape_->value(id_);
}

void Tape::check_open(const char* op) const {
  if (consumed_) {
    throw TapeError(std::string(op) + ": tape already consumed by backward; reset it first");
  }
}

Var Tape::constant(Tensor value) {
  check_open("constant");
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(Parameter& p) {
  check_open("param");
  Node n;
  n.value = p.value;
  n.param = &p;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Tensor value, std::span<const Var> parents, Backward backward) {
  check_open("record");
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) {
    if (p.tape() != this) throw TapeError("operand recorded on a different tape");
    n.needs_grad = n.needs_grad || needs_grad(p.id());
  }
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor& Tape::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.grad.same_shape(n.value)) n.grad = Tensor(n.value.shape(), 0);
  return n.grad;
}

void Tape::backward(const Var& loss) {
  if (loss.tape() != this) throw TapeError("backward: loss belongs to another tape");
  if (consumed_) throw TapeError("backward: tape already consumed");
  if (value(loss.id()).size() != 1) {
    throw TapeError("backward: loss must be scalar, got shape " +
                    value(loss.id()).shape_string());
  }
  consumed_ = true;
  grad(loss.id()).fill(1);
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || !n.grad.same_shape(n.value)) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param) {
      Tensor& pg = n.param->grad;
      if (!pg.same_shape(n.param->value)) pg = Tensor(n.param->value.shape(), 0);
      kernels::axpy(1, n.grad.data(), pg.data(), pg.size());
    }
  }
}

void Tape::reset() {
  nodes_.clear();
  consumed_ = false;
}

// ---------------------------------------------------------------------------
// Primitives

namespace ops {
namespace {

enum class Bcast { kSame, kRow, kScalar };

Bcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
  if (a.same_shape(b)) return Bcast::kSame;
  if (a.rank() == 2 && b.rank() == 2) {
    if (b.rows() == 1 && b.cols() == a.cols()) return Bcast::kRow;
    if (b.rows() == 1 && b.cols() == 1) return Bcast::kScalar;
  }
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() +
                   " and " + b.shape_string());
}

Scalar bval(const Tensor& b, Bcast kind, std::size_t i, int cols) {
  switch (kind) {
    case Bcast::kSame:
      return b[i];
    case Bcast::kRow:
      return b[i % static_cast<std::size_t>(cols)];
    case Bcast::kScalar:
      return b[0];
  }
  return 0;
}

// Accumulates `g` (shape of a) into the gradient of the broadcast operand b.
void reduce_into(Tensor& gb, const Tensor& g, Bcast kind, int cols) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    switch (kind) {
      case Bcast::kSame:
        gb[i] += g[i];
        break;
      case Bcast::kRow:
        gb[i % static_cast<std::size_t>(cols)] += g[i];
        break;
      case Bcast::kScalar:
        gb[0] += g[i];
        break;
    }
  }
}

void require_rank2(const char* op, const Tensor& a) {
  if (a.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a rank-2 tensor, got " + a.shape_string());
  }
}

// Elementwise map whose derivative is expressed through input x and output y.
template <typename Fwd, typename Deriv>
Var unary(const Var& a, Fwd f, Deriv dydx) {
  Tape* tape = a.tape();
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const int xid = a.id();
  const int yid = static_cast<int>(tape->node_count());
  return tape->record(std::move(y), std::array{a},
                      [xid, yid, dydx](Tape& t, const Tensor& g) {
                        const Tensor& xv = t.value(xid);
                        const Tensor& yv = t.value(yid);
                        Tensor& gx = t.grad(xid);
                        for (std::size_t i = 0; i < g.size(); ++i) {
                          gx[i] += g[i] * dydx(xv[i], yv[i]);
                        }
                      });
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2("matmul", av);
  require_rank2("matmul", bv);
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + av.shape_string() + " x " +
                     bv.shape_string());
  }
  const int m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor y = Tensor::matrix(m, n);
  kernels::gemm_nn(m, n, k, av.data(), bv.data(), y.data());
  const int aid = a.id(), bid = b.id();
  return a.tape()->record(std::move(y), std::array{a, b},
                          [aid, bid, m, n, k](Tape& t, const Tensor& g) {
                            if (t.needs_grad(aid)) {
                              kernels::gemm_nt(m, k, n, g.data(), t.value(bid).data(),
                                               t.grad(aid).data(), true);
                            }
                            if (t.needs_grad(bid)) {
                              kernels::gemm_tn(k, n, m, t.value(aid).data(), g.data(),
                                               t.grad(bid).data(), true);
                            }
                          });
}

namespace {

enum class Arith { kAdd, kSub, kMul };

Var arith(const char* name, Arith op, const Var& a, const Var& b) {
  if (a.tape() != b.tape()) throw TapeError(std::string(name) + ": operands on different tapes");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Bcast kind = broadcast_kind(name, av, bv);
  const int cols = av.cols();
  Tensor y(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) {
    const Scalar bi = bval(bv, kind, i, cols);
    y[i] = op == Arith::kAdd ? av[i] + bi : op == Arith::kSub ? av[i] - bi : av[i] * bi;
  }
  const int aid = a.id(), bid = b.id();
  return a.tape()->record(
      std::move(y), std::array{a, b}, [aid, bid, op, kind, cols](Tape& t, const Tensor& g) {
        if (t.needs_grad(aid)) {
          Tensor& ga = t.grad(aid);
          if (op == Arith::kMul) {
            const Tensor& bv2 = t.value(bid);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bval(bv2, kind, i, cols);
          } else {
            kernels::axpy(1, g.data(), ga.data(), g.size());
          }
        }
        if (t.needs_grad(bid)) {
          Tensor& gb = t.grad(bid);
          if (op == Arith::kAdd) {
            reduce_into(gb, g, kind, cols);
          } else if (op == Arith::kSub) {
            Tensor ng = g;
            for (auto& v : ng.storage()) v = -v;
            reduce_into(gb, ng, kind, cols);
          } else {
            const Tensor& av2 = t.value(aid);
            Tensor prod = g;
            for (std::size_t i = 0; i < g.size(); ++i) prod[i] *= av2[i];
            reduce_into(gb, prod, kind, cols);
          }
        }
      });
}

}  // namespace

Var add(const Var& a, const Var& b) { return arith("add", Arith::kAdd, a, b); }
Var sub(const Var& a, const Var& b) { return arith("sub", Arith::kSub, a, b); }
Var mul(const Var& a, const Var& b) { return arith("mul", Arith::kMul, a, b); }

Var scale(const Var& a, Scalar s) {
  return unary(a, [s](Scalar x) { return s * x; }, [s](Scalar, Scalar) { return s; });
}

Var add_scalar(const Var& a, Scalar s) {
  return unary(a, [s](Scalar x) { return x + s; }, [](Scalar, Scalar) { return Scalar(1); });
}

Var neg(const Var& a) { return scale(a, -1); }

Var tanh(const Var& a) {
  return unary(a, [](Scalar x) { return std::tanh(x); },
               [](Scalar, Scalar y) { return 1 - y * y; });
}

Var exp(const Var& a) {
  return unary(a, [](Scalar x) { return std::exp(x); }, [](Scalar, Scalar y) { return y; });
}

Var log(const Var& a) {
  return unary(a, [](Scalar x) { return std::log(x); },
               [](Scalar x, Scalar) { return 1 / x; });
}

Var square(const Var& a) {
  return unary(a, [](Scalar x) { return x * x; }, [](Scalar x, Scalar) { return 2 * x; });
}

Var abs(const Var& a) {
  return unary(a, [](Scalar x) { return std::abs(x); },
               [](Scalar x, Scalar) { return x > 0 ? Scalar(1) : x < 0 ? Scalar(-1) : Scalar(0); });
}

Var clip(const Var& a, Scalar lo, Scalar hi) {
  return unary(a, [lo, hi](Scalar x) { return std::clamp(x, lo, hi); },
               [lo, hi](Scalar x, Scalar) { return (x > lo && x < hi) ? Scalar(1) : Scalar(0); });
}

Var minimum(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (!av.same_shape(bv)) {
    throw ShapeError("minimum: incompatible shapes " + av.shape_string() + " and " +
                     bv.shape_string());
  }
  Tensor y(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) y[i] = std::min(av[i], bv[i]);
  const int aid = a.id(), bid = b.id();
  return a.tape()->record(std::move(y), std::array{a, b}, [aid, bid](Tape& t, const Tensor& g) {
    const Tensor& x = t.value(aid);
    const Tensor& z = t.value(bid);
    // Ties route the gradient to the first operand.
    if (t.needs_grad(aid)) {
      Tensor& ga = t.grad(aid);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (x[i] <= z[i]) ga[i] += g[i];
      }
    }
    if (t.needs_grad(bid)) {
      Tensor& gb = t.grad(bid);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (x[i] > z[i]) gb[i] += g[i];
      }
    }
  });
}

Var softmax_rows(const Var& a, std::shared_ptr<const std::vector<std::uint8_t>> mask) {
  const Tensor& x = a.value();
  require_rank2("softmax_rows", x);
  if (mask && mask->size() != x.size()) {
    throw ShapeError("softmax_rows: mask length " + std::to_string(mask->size()) +
                     " vs input " + x.shape_string());
  }
  const int rows = x.rows(), cols = x.cols();
  Tensor y(x.shape());
  for (int r = 0; r < rows; ++r) {
    const std::size_t off = static_cast<std::size_t>(r) * cols;
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    for (int c = 0; c < cols; ++c) {
      if (!mask || (*mask)[off + c]) mx = std::max(mx, x[off + c]);
    }
    if (!std::isfinite(mx)) {
      throw NumericError("softmax_rows: row " + std::to_string(r) + " fully masked or non-finite");
    }
    Scalar s = 0;
    for (int c = 0; c < cols; ++c) {
      const Scalar e = (!mask || (*mask)[off + c]) ? std::exp(x[off + c] - mx) : Scalar(0);
      y[off + c] = e;
      s += e;
    }
    for (int c = 0; c < cols; ++c) y[off + c] /= s;
  }
  const int xid = a.id();
  const int yid = static_cast<int>(a.tape()->node_count());
  return a.tape()->record(std::move(y), std::array{a}, [xid, yid, rows, cols](Tape& t, const Tensor& g) {
    const Tensor& yv = t.value(yid);
    Tensor& gx = t.grad(xid);
    for (int r = 0; r < rows; ++r) {
      const std::size_t off = static_cast<std::size_t>(r) * cols;
      const Scalar s = kernels::dot(yv.data() + off, g.data() + off, static_cast<std::size_t>(cols));
      for (int c = 0; c < cols; ++c) gx[off + c] += yv[off + c] * (g[off + c] - s);
    }
  });
}

Var layer_norm_rows(const Var& a, Scalar eps) {
  const Tensor& x = a.value();
  require_rank2("layer_norm_rows", x);
  const int rows = x.rows(), cols = x.cols();
  Tensor y(x.shape());
  auto inv_std = std::make_shared<std::vector<Scalar>>(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    const std::size_t off = static_cast<std::size_t>(r) * cols;
    Scalar mu = 0;
    for (int c = 0; c < cols; ++c) mu += x[off + c];
    mu /= cols;
    Scalar var = 0;
    for (int c = 0; c < cols; ++c) var += (x[off + c] - mu) * (x[off + c] - mu);
    var /= cols;
    const Scalar is = 1 / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(r)] = is;
    for (int c = 0; c < cols; ++c) y[off + c] = (x[off + c] - mu) * is;
  }
  const int xid = a.id();
  const int yid = static_cast<int>(a.tape()->node_count());
  return a.tape()->record(std::move(y), std::array{a},
                          [xid, yid, rows, cols, inv_std](Tape& t, const Tensor& g) {
                            const Tensor& yv = t.value(yid);
                            Tensor& gx = t.grad(xid);
                            for (int r = 0; r < rows; ++r) {
                              const std::size_t off = static_cast<std::size_t>(r) * cols;
                              Scalar gm = 0, gy = 0;
                              for (int c = 0; c < cols; ++c) {
                                gm += g[off + c];
                                gy += g[off + c] * yv[off + c];
                              }
                              gm /= cols;
                              gy /= cols;
                              const Scalar is = (*inv_std)[static_cast<std::size_t>(r)];
                              for (int c = 0; c < cols; ++c) {
                                gx[off + c] += is * (g[off + c] - gm - yv[off + c] * gy);
                              }
                            }
                          });
}

Var rms_norm_rows(const Var& a, Scalar eps) {
  const Tensor& x = a.value();
  require_rank2("rms_norm_rows", x);
  const int rows = x.rows(), cols = x.cols();
  Tensor y(x.shape());
  auto inv_rms = std::make_shared<std::vector<Scalar>>(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    const std::size_t off = static_cast<std::size_t>(r) * cols;
    const Scalar ms = kernels::dot(x.data() + off, x.data() + off, static_cast<std::size_t>(cols)) / cols;
    const Scalar ir = 1 / std::sqrt(ms + eps);
    (*inv_rms)[static_cast<std::size_t>(r)] = ir;
    for (int c = 0; c < cols; ++c) y[off + c] = x[off + c] * ir;
  }
  const int xid = a.id();
  const int yid = static_cast<int>(a.tape()->node_count());
  return a.tape()->record(std::move(y), std::array{a},
                          [xid, yid, rows, cols, inv_rms](Tape& t, const Tensor& g) {
                            const Tensor& yv = t.value(yid);
                            Tensor& gx = t.grad(xid);
                            for (int r = 0; r < rows; ++r) {
                              const std::size_t off = static_cast<std::size_t>(r) * cols;
                              const Scalar gy = kernels::dot(g.data() + off, yv.data() + off,
                                                             static_cast<std::size_t>(cols)) / cols;
                              const Scalar ir = (*inv_rms)[static_cast<std::size_t>(r)];
                              for (int c = 0; c < cols; ++c) {
                                gx[off + c] += ir * (g[off + c] - yv[off + c] * gy);
                              }
                            }
                          });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const int rows = parts[0].value().rows();
  int total = 0;
  for (const Var& p : parts) {
    require_rank2("concat_cols", p.value());
    if (p.value().rows() != rows) {
      throw ShapeError("concat_cols: row count mismatch, " + parts[0].value().shape_string() +
                       " and " + p.value().shape_string());
    }
    total += p.value().cols();
  }
  Tensor y = Tensor::matrix(rows, total);
  std::vector<int> ids, widths;
  int off = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (int r = 0; r < rows; ++r) {
      std::copy_n(v.data() + static_cast<std::size_t>(r) * v.cols(), v.cols(),
                  y.data() + static_cast<std::size_t>(r) * total + off);
    }
    off += v.cols();
    ids.push_back(p.id());
    widths.push_back(v.cols());
  }
  return parts[0].tape()->record(std::move(y), parts,
                                 [ids, widths, rows, total](Tape& t, const Tensor& g) {
                                   int o = 0;
                                   for (std::size_t i = 0; i < ids.size(); ++i) {
                                     if (t.needs_grad(ids[i])) {
                                       Tensor& gp = t.grad(ids[i]);
                                       for (int r = 0; r < rows; ++r) {
                                         kernels::axpy(1, g.data() + static_cast<std::size_t>(r) * total + o,
                                                       gp.data() + static_cast<std::size_t>(r) * widths[i],
                                                       static_cast<std::size_t>(widths[i]));
                                       }
                                     }
                                     o += widths[i];
                                   }
                                 });
}

Var slice_cols(const Var& a, int begin, int count) {
  const Tensor& x = a.value();
  require_rank2("slice_cols", x);
  if (begin < 0 || count < 0 || begin + count > x.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + x.shape_string());
  }
  const int rows = x.rows(), cols = x.cols();
  Tensor y = Tensor::matrix(rows, count);
  for (int r = 0; r < rows; ++r) {
    std::copy_n(x.data() + static_cast<std::size_t>(r) * cols + begin, count,
                y.data() + static_cast<std::size_t>(r) * count);
  }
  const int xid = a.id();
  return a.tape()->record(std::move(y), std::array{a},
                          [xid, rows, cols, begin, count](Tape& t, const Tensor& g) {
                            Tensor& gx = t.grad(xid);
                            for (int r = 0; r < rows; ++r) {
                              kernels::axpy(1, g.data() + static_cast<std::size_t>(r) * count,
                                            gx.data() + static_cast<std::size_t>(r) * cols + begin,
                                            static_cast<std::size_t>(count));
                            }
                          });
}

Var reshape(const Var& a, int rows, int cols) {
  Tensor y = a.value();
  y.reshape({rows, cols});
  const int xid = a.id();
  return a.tape()->record(std::move(y), std::array{a}, [xid](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad(xid);
    kernels::axpy(1, g.data(), gx.data(), g.size());
  });
}

Var mean(const Var& a, int axis) {
  const Tensor& x = a.value();
  require_rank2("mean", x);
  if (axis != 0 && axis != 1) throw ShapeError("mean: axis must be 0 or 1");
  const int rows = x.rows(), cols = x.cols();
  Tensor y = axis == 0 ? Tensor::matrix(1, cols) : Tensor::matrix(rows, 1);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const Scalar v = x.at(r, c);
      if (axis == 0) y[static_cast<std::size_t>(c)] += v / rows;
      else y[static_cast<std::size_t>(r)] += v / cols;
    }
  }
  const int xid = a.id();
  return a.tape()->record(std::move(y), std::array{a}, [xid, rows, cols, axis](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad(xid);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        gx.at(r, c) += axis == 0 ? g[static_cast<std::size_t>(c)] / rows
                                 : g[static_cast<std::size_t>(r)] / cols;
      }
    }
  });
}

Var sum(const Var& a) {
  const Tensor& x = a.value();
  Scalar s = 0;
  for (Scalar v : x.values()) s += v;
  const int xid = a.id();
  return a.tape()->record(Tensor::scalar(s), std::array{a}, [xid](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad(xid);
    for (auto& v : gx.storage()) v += g[0];
  });
}

Var mean_all(const Var& a) {
  const auto n = static_cast<Scalar>(a.value().size());
  return scale(sum(a), 1 / n);
}

Var gather_rows(const Var& a, std::shared_ptr<const std::vector<int>> index) {
  const Tensor& x = a.value();
  require_rank2("gather_rows", x);
  const int cols = x.cols();
  const int n = static_cast<int>(index->size());
  Tensor y = Tensor::matrix(n, cols);
  for (int i = 0; i < n; ++i) {
    const int src = (*index)[static_cast<std::size_t>(i)];
    if (src < 0 || src >= x.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(src) + " outside " + x.shape_string());
    }
    std::copy_n(x.data() + static_cast<std::size_t>(src) * cols, cols,
                y.data() + static_cast<std::size_t>(i) * cols);
  }
  const int xid = a.id();
  return a.tape()->record(std::move(y), std::array{a}, [xid, index, cols](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad(xid);
    for (std::size_t i = 0; i < index->size(); ++i) {
      kernels::axpy(1, g.data() + i * cols,
                    gx.data() + static_cast<std::size_t>((*index)[i]) * cols,
                    static_cast<std::size_t>(cols));
    }
  });
}

namespace {

// out_rows = M * in_rows on every vector channel, M = R or R^T.
void rotate_rows(const Tensor& in, Tensor& out, const std::vector<Rot3>& rots, int m0, int m1,
                 bool transpose, bool accumulate) {
  const int rows = in.rows(), cols = in.cols();
  for (int r = 0; r < rows; ++r) {
    const Rot3& R = rots[static_cast<std::size_t>(r)];
    const std::size_t off = static_cast<std::size_t>(r) * cols;
    if (!accumulate) {
      std::copy_n(in.data() + off, m0, out.data() + off);
      std::fill_n(out.data() + off + m0, 3 * m1, Scalar(0));
    } else {
      kernels::axpy(1, in.data() + off, out.data() + off, static_cast<std::size_t>(m0));
    }
    for (int i = 0; i < 3; ++i) {
      Scalar* dst = out.data() + off + m0 + static_cast<std::size_t>(i) * m1;
      for (int j = 0; j < 3; ++j) {
        const Scalar mij = transpose ? R[static_cast<std::size_t>(3 * j + i)]
                                     : R[static_cast<std::size_t>(3 * i + j)];
        if (mij != 0) {
          kernels::axpy(mij, in.data() + off + m0 + static_cast<std::size_t>(j) * m1, dst,
                        static_cast<std::size_t>(m1));
        }
      }
    }
  }
}

}  // namespace

Var rotate_vector_channels(const Var& a, std::shared_ptr<const std::vector<Rot3>> rotations,
                           int m0, int m1, bool transpose) {
  const Tensor& x = a.value();
  require_rank2("rotate_vector_channels", x);
  if (x.cols() != m0 + 3 * m1) {
    throw ShapeError("rotate_vector_channels: width " + std::to_string(x.cols()) +
                     " != m0 + 3*m1 = " + std::to_string(m0 + 3 * m1));
  }
  if (static_cast<int>(rotations->size()) != x.rows()) {
    throw ShapeError("rotate_vector_channels: " + std::to_string(rotations->size()) +
                     " rotations for input " + x.shape_string());
  }
  Tensor y(x.shape());
  rotate_rows(x, y, *rotations, m0, m1, transpose, false);
  const int xid = a.id();
  return a.tape()->record(std::move(y), std::array{a},
                          [xid, rotations, m0, m1, transpose](Tape& t, const Tensor& g) {
                            rotate_rows(g, t.grad(xid), *rotations, m0, m1, !transpose, true);
                          });
}

Var grouped_row_dot(const Var& q, const Var& k, int group, int heads, Scalar scale_factor) {
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  require_rank2("grouped_row_dot", qv);
  require_rank2("grouped_row_dot", kv);
  const int rows = qv.rows();
  const int width = qv.cols();
  if (kv.rows() != rows * group || kv.cols() != width || width % heads != 0) {
    throw ShapeError("grouped_row_dot: query " + qv.shape_string() + " vs key " +
                     kv.shape_string() + " (group " + std::to_string(group) + ", heads " +
                     std::to_string(heads) + ")");
  }
  const int d = width / heads;
  Tensor y = Tensor::matrix(rows, heads * group);
  for (int r = 0; r < rows; ++r) {
    for (int h = 0; h < heads; ++h) {
      const Scalar* qp = qv.data() + static_cast<std::size_t>(r) * width + h * d;
      for (int p = 0; p < group; ++p) {
        const Scalar* kp = kv.data() + (static_cast<std::size_t>(r) * group + p) * width + h * d;
        y.at(r, h * group + p) = scale_factor * kernels::dot(qp, kp, static_cast<std::size_t>(d));
      }
    }
  }
  const int qid = q.id(), kid = k.id();
  return q.tape()->record(
      std::move(y), std::array{q, k},
      [qid, kid, rows, width, group, heads, d, scale_factor](Tape& t, const Tensor& g) {
        const Tensor& qv2 = t.value(qid);
        const Tensor& kv2 = t.value(kid);
        const bool need_q = t.needs_grad(qid), need_k = t.needs_grad(kid);
        for (int r = 0; r < rows; ++r) {
          for (int h = 0; h < heads; ++h) {
            for (int p = 0; p < group; ++p) {
              const Scalar gs = scale_factor * g.at(r, h * group + p);
              if (gs == 0) continue;
              const std::size_t qo = static_cast<std::size_t>(r) * width + h * d;
              const std::size_t ko = (static_cast<std::size_t>(r) * group + p) * width + h * d;
              if (need_q) kernels::axpy(gs, kv2.data() + ko, t.grad(qid).data() + qo, d);
              if (need_k) kernels::axpy(gs, qv2.data() + qo, t.grad(kid).data() + ko, d);
            }
          }
        }
      });
}

Var grouped_weighted_sum(const Var& alpha, const Var& v, int group, int heads) {
  const Tensor& av = alpha.value();
  const Tensor& vv = v.value();
  require_rank2("grouped_weighted_sum", av);
  require_rank2("grouped_weighted_sum", vv);
  const int rows = av.rows();
  const int width = vv.cols();
  if (av.cols() != heads * group || vv.rows() != rows * group || width % heads != 0) {
    throw ShapeError("grouped_weighted_sum: weights " + av.shape_string() + " vs values " +
                     vv.shape_string() + " (group " + std::to_string(group) + ", heads " +
                     std::to_string(heads) + ")");
  }
  const int d = width / heads;
  Tensor y = Tensor::matrix(rows, width);
  for (int r = 0; r < rows; ++r) {
    for (int h = 0; h < heads; ++h) {
      Scalar* out = y.data() + static_cast<std::size_t>(r) * width + h * d;
      for (int p = 0; p < group; ++p) {
        const Scalar w = av.at(r, h * group + p);
        if (w == 0) continue;
        kernels::axpy(w, vv.data() + (static_cast<std::size_t>(r) * group + p) * width + h * d,
                      out, static_cast<std::size_t>(d));
      }
    }
  }
  const int aid = alpha.id(), vid = v.id();
  return alpha.tape()->record(
      std::move(y), std::array{alpha, v},
      [aid, vid, rows, width, group, heads, d](Tape& t, const Tensor& g) {
        const Tensor& av2 = t.value(aid);
        const Tensor& vv2 = t.value(vid);
        const bool need_a = t.needs_grad(aid), need_v = t.needs_grad(vid);
        for (int r = 0; r < rows; ++r) {
          for (int h = 0; h < heads; ++h) {
            const std::size_t go = static_cast<std::size_t>(r) * width + h * d;
            for (int p = 0; p < group; ++p) {
              const std::size_t vo = (static_cast<std::size_t>(r) * group + p) * width + h * d;
              if (need_a) {
                t.grad(aid).at(r, h * group + p) += kernels::dot(g.data() + go, vv2.data() + vo, d);
              }
              if (need_v) {
                const Scalar w = av2.at(r, h * group + p);
                if (w != 0) kernels::axpy(w, g.data() + go, t.grad(vid).data() + vo, d);
              }
            }
          }
        }
      });
}

}  // namespace ops

// ---------------------------------------------------------------------------
// Layers

Tensor xavier_uniform(int fan_in, int fan_out, std::mt19937_64& rng, Scalar gain) {
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor w = Tensor::matrix(fan_in, fan_out);
  for (auto& v : w.storage()) v = static_cast<Scalar>(dist(rng));
  return w;
}

Linear::Linear(ParameterStore& store, const std::string& name, int in, int out,
               std::mt19937_64& rng, bool bias, Scalar gain)
    : in_(in), out_(out) {
  weight_ = &store.add(name + ".weight", xavier_uniform(in, out, rng, gain));
  if (bias) bias_ = &store.add(name + ".bias", Tensor::matrix(1, out));
}

Var Linear::operator()(Tape& tape, const Var& x) const {
  Var y = ops::matmul(x, tape.param(*weight_));
  if (bias_) y = ops::add(y, tape.param(*bias_));
  return y;
}

}  // namespace equiswarm
