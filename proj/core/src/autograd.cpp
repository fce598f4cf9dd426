#include "convemo/autograd.hpp"

#include <algorithm>
#include <cmath>

namespace convemo {

Value Tape::push(Tensor val, std::function<void(Tape&)> back) {
  Node n;
  n.grad = Tensor(val.shape, 0.0);
  n.val = std::move(val);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Value{static_cast<int>(nodes_.size()) - 1};
}

Value Tape::leaf(Tensor t) { return push(std::move(t), nullptr); }

Value Tape::param(ParamStore& store, const std::string& name) {
  auto& e = store.entry(name);
  Value v = push(e.value, nullptr);
  bindings_.emplace_back(v.id, &e);
  return v;
}

void Tape::backward(Value root) {
  if (!root.valid()) throw std::invalid_argument("backward: invalid root");
  if (nodes_[root.id].val.size() != 1)
    throw std::invalid_argument("backward: root must be scalar");
  nodes_[root.id].grad.data[0] = 1.0;
  for (int i = root.id; i >= 0; --i) {
    if (nodes_[i].back) nodes_[i].back(*this);
  }
  for (auto& [id, entry] : bindings_) {
    const Tensor& g = nodes_[id].grad;
    for (std::size_t k = 0; k < g.size(); ++k) entry->grad.data[k] += g.data[k];
  }
}

Value Tape::add(Value a, Value b) {
  check_same_shape(val(a), val(b), "add");
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += val(b).data[i];
  return push(std::move(out), [a, b, o = static_cast<int>(nodes_.size())](Tape& t) {
    const Tensor& g = t.nodes_[o].grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      t.nodes_[a.id].grad.data[i] += g.data[i];
      t.nodes_[b.id].grad.data[i] += g.data[i];
    }
  });
}

Value Tape::add3(Value a, Value b, Value c) { return add(add(a, b), c); }

Value Tape::sub(Value a, Value b) {
  check_same_shape(val(a), val(b), "sub");
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= val(b).data[i];
  return push(std::move(out), [a, b, o = static_cast<int>(nodes_.size())](Tape& t) {
    const Tensor& g = t.nodes_[o].grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      t.nodes_[a.id].grad.data[i] += g.data[i];
      t.nodes_[b.id].grad.data[i] -= g.data[i];
    }
  });
}

Value Tape::mul(Value a, Value b) {
  check_same_shape(val(a), val(b), "mul");
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= val(b).data[i];
  return push(std::move(out), [a, b, o = static_cast<int>(nodes_.size())](Tape& t) {
    const Tensor& g = t.nodes_[o].grad;
    const Tensor& av = t.nodes_[a.id].val;
    const Tensor& bv = t.nodes_[b.id].val;
    for (std::size_t i = 0; i < g.size(); ++i) {
      t.nodes_[a.id].grad.data[i] += g.data[i] * bv.data[i];
      t.nodes_[b.id].grad.data[i] += g.data[i] * av.data[i];
    }
  });
}

Value Tape::scale(Value a, double c) {
  Tensor out = val(a);
  for (double& v : out.data) v *= c;
  return push(std::move(out), [a, c, o = static_cast<int>(nodes_.size())](Tape& t) {
    const Tensor& g = t.nodes_[o].grad;
    for (std::size_t i = 0; i < g.size(); ++i)
      t.nodes_[a.id].grad.data[i] += c * g.data[i];
  });
}

Value Tape::add_const(Value a, const Tensor& c) {
  check_same_shape(val(a), c, "add_const");
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += c.data[i];
  return push(std::move(out), [a, o = static_cast<int>(nodes_.size())](Tape& t) {
    const Tensor& g = t.nodes_[o].grad;
    for (std::size_t i = 0; i < g.size(); ++i)
      t.nodes_[a.id].grad.data[i] += g.data[i];
  });
}

Value Tape::mul_const(Value a, const Tensor& c) {
  check_same_shape(val(a), c, "mul_const");
  Tensor out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= c.data[i];
  return push(std::move(out),
              [a, c, o = static_cast<int>(nodes_.size())](Tape& t) {
                const Tensor& g = t.nodes_[o].grad;
                for (std::size_t i = 0; i < g.size(); ++i)
                  t.nodes_[a.id].grad.data[i] += g.data[i] * c.data[i];
              });
}

Value Tape::exp(Value a) {
  Tensor out = val(a);
  for (double& v : out.data) v = std::exp(v);
  return push(std::move(out), [a, o = static_cast<int>(nodes_.size())](Tape& t) {
    const Tensor& g = t.nodes_[o].grad;
    const Tensor& y = t.nodes_[o].val;
    for (std::size_t i = 0; i < g.size(); ++i)
      t.nodes_[a.id].grad.data[i] += g.data[i] * y.data[i];
  });
}

Value Tape::relu(Value a) {
  Tensor out = val(a);
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return push(std::move(out), [a, o = static_cast<int>(nodes_.size())](Tape& t) {
    const Tensor& g = t.nodes_[o].grad;
    const Tensor& x = t.nodes_[a.id].val;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x.data[i] > 0.0) t.nodes_[a.id].grad.data[i] += g.data[i];
  });
}

Value Tape::sigmoid(Value a) {
  Tensor out = val(a);
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return push(std::move(out), [a, o = static_cast<int>(nodes_.size())](Tape& t) {
    const Tensor& g = t.nodes_[o].grad;
    const Tensor& y = t.nodes_[o].val;
    for (std::size_t i = 0; i < g.size(); ++i)
      t.nodes_[a.id].grad.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
  });
}

Value Tape::tanh(Value a) {
  Tensor out = val(a);
  for (double& v : out.data) v = std::tanh(v);
  return push(std::move(out), [a, o = static_cast<int>(nodes_.size())](Tape& t) {
    const Tensor& g = t.nodes_[o].grad;
    const Tensor& y = t.nodes_[o].val;
    for (std::size_t i = 0; i < g.size(); ++i)
      t.nodes_[a.id].grad.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
  });
}

Value Tape::matmul(Value a, Value b) {
  const Tensor& av = val(a);
  const Tensor& bv = val(b);
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k)
    throw std::invalid_argument("matmul: inner axis mismatch, lhs cols=" +
                                std::to_string(k) + " rhs rows=" +
                                std::to_string(bv.rows()));
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double x = av.data[i * k + p];
      if (x == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j)
        out.data[i * n + j] += x * bv.data[p * n + j];
    }
  return push(std::move(out),
              [a, b, m, k, n, o = static_cast<int>(nodes_.size())](Tape& t) {
                const Tensor& g = t.nodes_[o].grad;
                const Tensor& av2 = t.nodes_[a.id].val;
                const Tensor& bv2 = t.nodes_[b.id].val;
                Tensor& ga = t.nodes_[a.id].grad;
                Tensor& gb = t.nodes_[b.id].grad;
                // dA = g B^T ; dB = A^T g
                for (std::size_t i = 0; i < m; ++i)
                  for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j)
                      acc += g.data[i * n + j] * bv2.data[p * n + j];
                    ga.data[i * k + p] += acc;
                  }
                for (std::size_t p = 0; p < k; ++p)
                  for (std::size_t j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < m; ++i)
                      acc += av2.data[i * k + p] * g.data[i * n + j];
                    gb.data[p * n + j] += acc;
                  }
              });
}

Value Tape::transpose(Value a) {
  const Tensor& av = val(a);
  const std::size_t m = av.rows(), n = av.cols();
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.data[j * m + i] = av.data[i * n + j];
  return push(std::move(out),
              [a, m, n, o = static_cast<int>(nodes_.size())](Tape& t) {
                const Tensor& g = t.nodes_[o].grad;
                Tensor& ga = t.nodes_[a.id].grad;
                for (std::size_t i = 0; i < m; ++i)
                  for (std::size_t j = 0; j < n; ++j)
                    ga.data[i * n + j] += g.data[j * m + i];
              });
}

Value Tape::linear(Value x, Value w, Value b) {
  const Tensor& xv = val(x);
  const Tensor& wv = val(w);
  const std::size_t m = xv.rows(), din = xv.cols();
  const std::size_t dout = wv.rows();
  if (wv.cols() != din)
    throw std::invalid_argument(
        "linear: input axis d_in=" + std::to_string(din) +
        " does not match weight d_in=" + std::to_string(wv.cols()));
  if (b.valid() && val(b).size() != dout)
    throw std::invalid_argument(
        "linear: bias axis d_out=" + std::to_string(val(b).size()) +
        " does not match weight d_out=" + std::to_string(dout));
  Tensor out({m, dout});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < dout; ++j) {
      double acc = b.valid() ? val(b).data[j] : 0.0;
      for (std::size_t p = 0; p < din; ++p)
        acc += xv.data[i * din + p] * wv.data[j * din + p];
      out.data[i * dout + j] = acc;
    }
  return push(std::move(out),
              [x, w, b, m, din, dout, o = static_cast<int>(nodes_.size())](Tape& t) {
                const Tensor& g = t.nodes_[o].grad;
                const Tensor& xv2 = t.nodes_[x.id].val;
                const Tensor& wv2 = t.nodes_[w.id].val;
                Tensor& gx = t.nodes_[x.id].grad;
                Tensor& gw = t.nodes_[w.id].grad;
                for (std::size_t i = 0; i < m; ++i)
                  for (std::size_t j = 0; j < dout; ++j) {
                    const double gij = g.data[i * dout + j];
                    if (gij == 0.0) continue;
                    for (std::size_t p = 0; p < din; ++p) {
                      gx.data[i * din + p] += gij * wv2.data[j * din + p];
                      gw.data[j * din + p] += gij * xv2.data[i * din + p];
                    }
                  }
                if (b.valid()) {
                  Tensor& gb = t.nodes_[b.id].grad;
                  for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < dout; ++j)
                      gb.data[j] += g.data[i * dout + j];
                }
              });
}

Value Tape::layer_norm(Value x, Value gamma, Value beta, double eps) {
  const Tensor& xv = val(x);
  const std::size_t m = xv.rows(), d = xv.cols();
  if (val(gamma).size() != d || val(beta).size() != d)
    throw std::invalid_argument("layer_norm: affine axis must equal feature axis d=" +
                                std::to_string(d));
  Tensor out(xv.shape);
  std::vector<double> inv(m), xhat(m * d);
  for (std::size_t i = 0; i < m; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xv.data[i * d + j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = xv.data[i * d + j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    inv[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (xv.data[i * d + j] - mean) * inv[i];
      xhat[i * d + j] = h;
      out.data[i * d + j] = val(gamma).data[j] * h + val(beta).data[j];
    }
  }
  return push(std::move(out),
              [x, gamma, beta, m, d, inv = std::move(inv), xhat = std::move(xhat),
               o = static_cast<int>(nodes_.size())](Tape& t) {
                const Tensor& g = t.nodes_[o].grad;
                const Tensor& gam = t.nodes_[gamma.id].val;
                Tensor& gx = t.nodes_[x.id].grad;
                Tensor& gg = t.nodes_[gamma.id].grad;
                Tensor& gb = t.nodes_[beta.id].grad;
                for (std::size_t i = 0; i < m; ++i) {
                  double sum_gy = 0.0, sum_gyh = 0.0;
                  for (std::size_t j = 0; j < d; ++j) {
                    const double gy = g.data[i * d + j] * gam.data[j];
                    sum_gy += gy;
                    sum_gyh += gy * xhat[i * d + j];
                  }
                  const double mean_gy = sum_gy / static_cast<double>(d);
                  const double mean_gyh = sum_gyh / static_cast<double>(d);
                  for (std::size_t j = 0; j < d; ++j) {
                    const double gy = g.data[i * d + j] * gam.data[j];
                    gx.data[i * d + j] +=
                        inv[i] * (gy - mean_gy - xhat[i * d + j] * mean_gyh);
                    gg.data[j] += g.data[i * d + j] * xhat[i * d + j];
                    gb.data[j] += g.data[i * d + j];
                  }
                }
              });
}

Value Tape::softmax_rows(Value x) {
  const Tensor& xv = val(x);
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out(xv.shape);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = xv.data[i * n];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xv.data[i * n + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out.data[i * n + j] = std::exp(xv.data[i * n + j] - mx);
      z += out.data[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] /= z;
  }
  return push(std::move(out),
              [x, m, n, o = static_cast<int>(nodes_.size())](Tape& t) {
                const Tensor& g = t.nodes_[o].grad;
                const Tensor& y = t.nodes_[o].val;
                Tensor& gx = t.nodes_[x.id].grad;
                for (std::size_t i = 0; i < m; ++i) {
                  double dot = 0.0;
                  for (std::size_t j = 0; j < n; ++j)
                    dot += g.data[i * n + j] * y.data[i * n + j];
                  for (std::size_t j = 0; j < n; ++j)
                    gx.data[i * n + j] +=
                        y.data[i * n + j] * (g.data[i * n + j] - dot);
                }
              });
}

Value Tape::dropout(Value x, double rate, bool train, RngState& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout: rate must lie in [0,1), got " +
                                std::to_string(rate));
  if (!train || rate == 0.0) {
    // identity pass-through node
    Tensor out = val(x);
    return push(std::move(out), [x, o = static_cast<int>(nodes_.size())](Tape& t) {
      const Tensor& g = t.nodes_[o].grad;
      for (std::size_t i = 0; i < g.size(); ++i)
        t.nodes_[x.id].grad.data[i] += g.data[i];
    });
  }
  const double keep = 1.0 - rate;
  std::vector<double> mask(val(x).size());
  for (double& mv : mask) mv = rng.next_uniform() < rate ? 0.0 : 1.0 / keep;
  Tensor out = val(x);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= mask[i];
  return push(std::move(out),
              [x, mask = std::move(mask), o = static_cast<int>(nodes_.size())](Tape& t) {
                const Tensor& g = t.nodes_[o].grad;
                for (std::size_t i = 0; i < g.size(); ++i)
                  t.nodes_[x.id].grad.data[i] += g.data[i] * mask[i];
              });
}

Value Tape::concat_cols(const std::vector<Value>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_cols: empty input");
  const std::size_t m = val(xs[0]).rows();
  std::size_t total = 0;
  for (Value v : xs) {
    if (val(v).rows() != m)
      throw std::invalid_argument("concat_cols: row axis mismatch");
    total += val(v).cols();
  }
  Tensor out({m, total});
  std::size_t off = 0;
  for (Value v : xs) {
    const Tensor& t = val(v);
    for (std::size_t i = 0; i < m; ++i)
      std::copy(t.data.begin() + i * t.cols(), t.data.begin() + (i + 1) * t.cols(),
                out.data.begin() + i * total + off);
    off += t.cols();
  }
  return push(std::move(out),
              [xs, m, total, o = static_cast<int>(nodes_.size())](Tape& t) {
                const Tensor& g = t.nodes_[o].grad;
                std::size_t off2 = 0;
                for (Value v : xs) {
                  Tensor& gv = t.nodes_[v.id].grad;
                  const std::size_t c = gv.cols();
                  for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < c; ++j)
                      gv.data[i * c + j] += g.data[i * total + off2 + j];
                  off2 += c;
                }
              });
}

Value Tape::slice_cols(Value x, std::size_t start, std::size_t len) {
  const Tensor& xv = val(x);
  const std::size_t m = xv.rows(), n = xv.cols();
  if (start + len > n) throw std::invalid_argument("slice_cols: out of range");
  Tensor out({m, len});
  for (std::size_t i = 0; i < m; ++i)
    std::copy(xv.data.begin() + i * n + start,
              xv.data.begin() + i * n + start + len, out.data.begin() + i * len);
  return push(std::move(out),
              [x, start, len, m, n, o = static_cast<int>(nodes_.size())](Tape& t) {
                const Tensor& g = t.nodes_[o].grad;
                Tensor& gx = t.nodes_[x.id].grad;
                for (std::size_t i = 0; i < m; ++i)
                  for (std::size_t j = 0; j < len; ++j)
                    gx.data[i * n + start + j] += g.data[i * len + j];
              });
}

Value Tape::concat_rows(const std::vector<Value>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_rows: empty input");
  const std::size_t c = val(xs[0]).cols();
  std::size_t total = 0;
  for (Value v : xs) {
    if (val(v).cols() != c)
      throw std::invalid_argument("concat_rows: column axis mismatch");
    total += val(v).rows();
  }
  Tensor out({total, c});
  std::size_t off = 0;
  for (Value v : xs) {
    const Tensor& t = val(v);
    std::copy(t.data.begin(), t.data.end(), out.data.begin() + off * c);
    off += t.rows();
  }
  return push(std::move(out),
              [xs, c, o = static_cast<int>(nodes_.size())](Tape& t) {
                const Tensor& g = t.nodes_[o].grad;
                std::size_t off2 = 0;
                for (Value v : xs) {
                  Tensor& gv = t.nodes_[v.id].grad;
                  for (std::size_t i = 0; i < gv.size(); ++i)
                    gv.data[i] += g.data[off2 * c + i];
                  off2 += gv.rows();
                }
              });
}

Value Tape::slice_rows(Value x, std::size_t start, std::size_t len) {
  const Tensor& xv = val(x);
  const std::size_t n = xv.cols();
  if (start + len > xv.rows())
    throw std::invalid_argument("slice_rows: out of range");
  Tensor out({len, n});
  std::copy(xv.data.begin() + start * n, xv.data.begin() + (start + len) * n,
            out.data.begin());
  return push(std::move(out),
              [x, start, len, n, o = static_cast<int>(nodes_.size())](Tape& t) {
                const Tensor& g = t.nodes_[o].grad;
                Tensor& gx = t.nodes_[x.id].grad;
                for (std::size_t i = 0; i < len * n; ++i)
                  gx.data[start * n + i] += g.data[i];
              });
}

Value Tape::repeat_rows(Value x, std::size_t times) {
  const Tensor& xv = val(x);
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out({m * times, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t r = 0; r < times; ++r)
      std::copy(xv.data.begin() + i * n, xv.data.begin() + (i + 1) * n,
                out.data.begin() + (i * times + r) * n);
  return push(std::move(out),
              [x, times, m, n, o = static_cast<int>(nodes_.size())](Tape& t) {
                const Tensor& g = t.nodes_[o].grad;
                Tensor& gx = t.nodes_[x.id].grad;
                for (std::size_t i = 0; i < m; ++i)
                  for (std::size_t r = 0; r < times; ++r)
                    for (std::size_t j = 0; j < n; ++j)
                      gx.data[i * n + j] += g.data[(i * times + r) * n + j];
              });
}

Value Tape::tile_rows(Value x, std::size_t times) {
  const Tensor& xv = val(x);
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out({m * times, n});
  for (std::size_t r = 0; r < times; ++r)
    std::copy(xv.data.begin(), xv.data.end(), out.data.begin() + r * m * n);
  return push(std::move(out),
              [x, times, m, n, o = static_cast<int>(nodes_.size())](Tape& t) {
                const Tensor& g = t.nodes_[o].grad;
                Tensor& gx = t.nodes_[x.id].grad;
                for (std::size_t r = 0; r < times; ++r)
                  for (std::size_t i = 0; i < m * n; ++i)
                    gx.data[i] += g.data[r * m * n + i];
              });
}

Value Tape::gather_rows(Value x, std::vector<std::size_t> indices) {
  const Tensor& xv = val(x);
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out({indices.size(), n});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= m) throw std::invalid_argument("gather_rows: out of range");
    std::copy(xv.data.begin() + indices[i] * n,
              xv.data.begin() + (indices[i] + 1) * n, out.data.begin() + i * n);
  }
  return push(std::move(out),
              [x, indices = std::move(indices), n,
               o = static_cast<int>(nodes_.size())](Tape& t) {
                const Tensor& g = t.nodes_[o].grad;
                Tensor& gx = t.nodes_[x.id].grad;
                for (std::size_t i = 0; i < indices.size(); ++i)
                  for (std::size_t j = 0; j < n; ++j)
                    gx.data[indices[i] * n + j] += g.data[i * n + j];
              });
}

Value Tape::sum_all(Value x) {
  double s = 0.0;
  for (double v : val(x).data) s += v;
  Tensor out({1, 1});
  out.data[0] = s;
  return push(std::move(out), [x, o = static_cast<int>(nodes_.size())](Tape& t) {
    const double g = t.nodes_[o].grad.data[0];
    for (double& gv : t.nodes_[x.id].grad.data) gv += g;
  });
}

Value Tape::cross_entropy_sum(Value probs, std::vector<int> labels,
                              double clamp) {
  const Tensor& p = val(probs);
  const std::size_t m = p.rows(), c = p.cols();
  if (labels.size() != m)
    throw std::invalid_argument("cross_entropy_sum: label count mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c)
      throw std::invalid_argument("cross_entropy_sum: label out of range");
    loss -= std::log(std::max(p.data[i * c + y], clamp));
  }
  Tensor out({1, 1});
  out.data[0] = loss;
  return push(std::move(out),
              [probs, labels = std::move(labels), clamp, m, c,
               o = static_cast<int>(nodes_.size())](Tape& t) {
                const double g = t.nodes_[o].grad.data[0];
                const Tensor& p2 = t.nodes_[probs.id].val;
                Tensor& gp = t.nodes_[probs.id].grad;
                for (std::size_t i = 0; i < m; ++i) {
                  const double pi = p2.data[i * c + labels[i]];
                  if (pi > clamp) gp.data[i * c + labels[i]] -= g / pi;
                }
              });
}

// ---------------------------------------------------------------------------

AttentionResult scaled_dot_attention(Tape& t, Value q, Value k, Value v,
                                     const std::vector<bool>* mask) {
  const std::size_t dk = t.val(q).cols();
  if (t.val(k).cols() != dk)
    throw std::invalid_argument("attention: query/key axis d_k mismatch");
  const std::size_t nq = t.val(q).rows();
  const std::size_t nk = t.val(k).rows();
  if (t.val(v).rows() != nk)
    throw std::invalid_argument("attention: key/value row axis mismatch");
  if (mask && mask->size() != nk)
    throw std::invalid_argument("attention: mask length must equal key count");

  Value scores =
      t.scale(t.matmul(q, t.transpose(k)), 1.0 / std::sqrt(static_cast<double>(dk)));

  AttentionResult res;
  bool any_valid = true;
  if (mask) {
    any_valid = std::find(mask->begin(), mask->end(), true) != mask->end();
    Tensor bias({nq, nk}, 0.0);
    for (std::size_t j = 0; j < nk; ++j)
      if (!(*mask)[j])
        for (std::size_t i = 0; i < nq; ++i) bias.data[i * nk + j] = -1e9;
    scores = t.add_const(scores, bias);
  }
  Value weights = t.softmax_rows(scores);
  Value out = t.matmul(weights, v);
  if (!any_valid) {
    res.all_masked = true;
    out = t.mul_const(out, Tensor(t.val(out).shape, 0.0));
  }
  res.out = out;
  return res;
}

Value multi_head_attention(Tape& t, Value q, Value k, Value v,
                           std::size_t heads, Value wq, Value wk, Value wv,
                           Value wo, const std::vector<bool>* mask) {
  const std::size_t d = t.val(q).cols();
  if (heads == 0 || d % heads != 0)
    throw std::invalid_argument("multi_head_attention: model dim " +
                                std::to_string(d) + " not divisible by heads " +
                                std::to_string(heads));
  Value pq = t.linear(q, wq, Tape::none());
  Value pk = t.linear(k, wk, Tape::none());
  Value pv = t.linear(v, wv, Tape::none());
  const std::size_t dh = d / heads;
  std::vector<Value> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Value hq = t.slice_cols(pq, h * dh, dh);
    Value hk = t.slice_cols(pk, h * dh, dh);
    Value hv = t.slice_cols(pv, h * dh, dh);
    outs.push_back(scaled_dot_attention(t, hq, hk, hv, mask).out);
  }
  return t.linear(t.concat_cols(outs), wo, Tape::none());
}

Value gru_direction(Tape& t, Value x, const GruDirParams& p, bool reverse) {
  const std::size_t n = t.val(x).rows();
  const std::size_t hidden = t.val(p.w_hh).cols();
  Value h = t.constant(Tensor({1, hidden}, 0.0));
  std::vector<Value> steps(n);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t idx = reverse ? n - 1 - s : s;
    Value xt = t.slice_rows(x, idx, 1);
    Value gx = t.linear(xt, p.w_ih, p.b_ih);
    Value gh = t.linear(h, p.w_hh, p.b_hh);
    Value r = t.sigmoid(t.add(t.slice_cols(gx, 0, hidden), t.slice_cols(gh, 0, hidden)));
    Value z = t.sigmoid(
        t.add(t.slice_cols(gx, hidden, hidden), t.slice_cols(gh, hidden, hidden)));
    Value cand = t.tanh(t.add(t.slice_cols(gx, 2 * hidden, hidden),
                              t.mul(r, t.slice_cols(gh, 2 * hidden, hidden))));
    // h' = (1-z) * cand + z * h
    h = t.add(cand, t.mul(z, t.sub(h, cand)));
    steps[idx] = h;
  }
  return t.concat_rows(steps);
}

Value bigru(Tape& t, Value x, const GruDirParams& fw, const GruDirParams& bw) {
  Value f = gru_direction(t, x, fw, /*reverse=*/false);
  Value b = gru_direction(t, x, bw, /*reverse=*/true);
  return t.concat_cols({f, b});
}

}  // namespace convemo
