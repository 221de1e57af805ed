#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace hagnn {

class Tape;

/// Dense 2-D tensor of doubles on a reverse-mode tape. Scalars are 1x1,
/// vectors nx1. Value/grad buffers are shared so that backward lambdas
/// stay valid after tensors are copied around.
struct Tensor {
  int64_t rows = 0;
  int64_t cols = 0;
  std::shared_ptr<std::vector<double>> val;
  std::shared_ptr<std::vector<double>> grad;
  Tape* tape = nullptr;

  int64_t size() const { return rows * cols; }
  double& v(int64_t r, int64_t c) { return (*val)[static_cast<size_t>(r * cols + c)]; }
  double v(int64_t r, int64_t c) const { return (*val)[static_cast<size_t>(r * cols + c)]; }
  double& g(int64_t r, int64_t c) { return (*grad)[static_cast<size_t>(r * cols + c)]; }

  std::string shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
  }

  static Tensor constant(int64_t rows, int64_t cols, std::vector<double> data) {
    if (static_cast<int64_t>(data.size()) != rows * cols)
      throw std::invalid_argument("constant: data size != shape");
    Tensor t;
    t.rows = rows;
    t.cols = cols;
    t.val = std::make_shared<std::vector<double>>(std::move(data));
    t.grad = std::make_shared<std::vector<double>>(static_cast<size_t>(rows * cols), 0.0);
    return t;
  }
};

/// Records backward rules in forward order; backward() replays in reverse.
/// One backward pass per tape.
class Tape {
 public:
  Tensor leaf(int64_t rows, int64_t cols, std::vector<double> data) {
    Tensor t = Tensor::constant(rows, cols, std::move(data));
    t.tape = this;
    return t;
  }

  Tensor alloc(int64_t rows, int64_t cols) {
    Tensor t = Tensor::constant(rows, cols, std::vector<double>(static_cast<size_t>(rows * cols), 0.0));
    t.tape = this;
    return t;
  }

  void record(std::function<void()> backward_fn) { nodes_.push_back(std::move(backward_fn)); }

  void backward(const Tensor& loss) {
    if (loss.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    if (ran_) throw std::logic_error("backward: tape already consumed");
    ran_ = true;
    (*loss.grad)[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

 private:
  std::vector<std::function<void()>> nodes_;
  bool ran_ = false;
};

namespace ops {

inline Tape* tape_of(std::initializer_list<const Tensor*> ts) {
  Tape* tape = nullptr;
  for (const Tensor* t : ts) {
    if (t->tape != nullptr) {
      if (tape != nullptr && tape != t->tape) throw std::logic_error("tensors on different tapes");
      tape = t->tape;
    }
  }
  return tape;
}

inline Tensor make_out(Tape* tape, int64_t rows, int64_t cols) {
  Tensor t = Tensor::constant(rows, cols, std::vector<double>(static_cast<size_t>(rows * cols), 0.0));
  t.tape = tape;
  return t;
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols != b.rows)
    throw std::invalid_argument("matmul: " + a.shape_str() + " * " + b.shape_str());
  Tape* tape = tape_of({&a, &b});
  Tensor out = make_out(tape, a.rows, b.cols);
  const auto& av = *a.val;
  const auto& bv = *b.val;
  auto& ov = *out.val;
  for (int64_t i = 0; i < a.rows; ++i)
    for (int64_t k = 0; k < a.cols; ++k) {
      double aik = av[static_cast<size_t>(i * a.cols + k)];
      if (aik == 0.0) continue;
      for (int64_t j = 0; j < b.cols; ++j)
        ov[static_cast<size_t>(i * b.cols + j)] += aik * bv[static_cast<size_t>(k * b.cols + j)];
    }
  if (tape) {
    tape->record([a, b, out]() {
      const auto& og = *out.grad;
      const auto& av = *a.val;
      const auto& bv = *b.val;
      auto& ag = *a.grad;
      auto& bg = *b.grad;
      // dA += dC * B^T ; dB += A^T * dC
      for (int64_t i = 0; i < a.rows; ++i)
        for (int64_t j = 0; j < b.cols; ++j) {
          double go = og[static_cast<size_t>(i * b.cols + j)];
          if (go == 0.0) continue;
          for (int64_t k = 0; k < a.cols; ++k) {
            ag[static_cast<size_t>(i * a.cols + k)] += go * bv[static_cast<size_t>(k * b.cols + j)];
            bg[static_cast<size_t>(k * b.cols + j)] += av[static_cast<size_t>(i * a.cols + k)] * go;
          }
        }
    });
  }
  return out;
}

inline Tensor transpose(const Tensor& a) {
  Tape* tape = tape_of({&a});
  Tensor out = make_out(tape, a.cols, a.rows);
  for (int64_t i = 0; i < a.rows; ++i)
    for (int64_t j = 0; j < a.cols; ++j)
      (*out.val)[static_cast<size_t>(j * a.rows + i)] = a.v(i, j);
  if (tape) {
    tape->record([a, out]() {
      for (int64_t i = 0; i < a.rows; ++i)
        for (int64_t j = 0; j < a.cols; ++j)
          (*a.grad)[static_cast<size_t>(i * a.cols + j)] +=
              (*out.grad)[static_cast<size_t>(j * a.rows + i)];
    });
  }
  return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw std::invalid_argument("add: " + a.shape_str() + " vs " + b.shape_str());
  Tape* tape = tape_of({&a, &b});
  Tensor out = make_out(tape, a.rows, a.cols);
  for (int64_t i = 0; i < a.size(); ++i)
    (*out.val)[static_cast<size_t>(i)] = (*a.val)[static_cast<size_t>(i)] + (*b.val)[static_cast<size_t>(i)];
  if (tape) {
    tape->record([a, b, out]() {
      for (int64_t i = 0; i < a.size(); ++i) {
        (*a.grad)[static_cast<size_t>(i)] += (*out.grad)[static_cast<size_t>(i)];
        (*b.grad)[static_cast<size_t>(i)] += (*out.grad)[static_cast<size_t>(i)];
      }
    });
  }
  return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw std::invalid_argument("mul: " + a.shape_str() + " vs " + b.shape_str());
  Tape* tape = tape_of({&a, &b});
  Tensor out = make_out(tape, a.rows, a.cols);
  for (int64_t i = 0; i < a.size(); ++i)
    (*out.val)[static_cast<size_t>(i)] = (*a.val)[static_cast<size_t>(i)] * (*b.val)[static_cast<size_t>(i)];
  if (tape) {
    tape->record([a, b, out]() {
      for (int64_t i = 0; i < a.size(); ++i) {
        (*a.grad)[static_cast<size_t>(i)] +=
            (*out.grad)[static_cast<size_t>(i)] * (*b.val)[static_cast<size_t>(i)];
        (*b.grad)[static_cast<size_t>(i)] +=
            (*out.grad)[static_cast<size_t>(i)] * (*a.val)[static_cast<size_t>(i)];
      }
    });
  }
  return out;
}

inline Tensor scale(const Tensor& a, double c) {
  Tape* tape = tape_of({&a});
  Tensor out = make_out(tape, a.rows, a.cols);
  for (int64_t i = 0; i < a.size(); ++i) (*out.val)[static_cast<size_t>(i)] = c * (*a.val)[static_cast<size_t>(i)];
  if (tape) {
    tape->record([a, out, c]() {
      for (int64_t i = 0; i < a.size(); ++i)
        (*a.grad)[static_cast<size_t>(i)] += c * (*out.grad)[static_cast<size_t>(i)];
    });
  }
  return out;
}

inline Tensor unary(const Tensor& a, double (*f)(double), double (*df)(double)) {
  Tape* tape = tape_of({&a});
  Tensor out = make_out(tape, a.rows, a.cols);
  for (int64_t i = 0; i < a.size(); ++i) (*out.val)[static_cast<size_t>(i)] = f((*a.val)[static_cast<size_t>(i)]);
  if (tape) {
    tape->record([a, out, df]() {
      for (int64_t i = 0; i < a.size(); ++i)
        (*a.grad)[static_cast<size_t>(i)] += df((*a.val)[static_cast<size_t>(i)]) * (*out.grad)[static_cast<size_t>(i)];
    });
  }
  return out;
}

inline Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

inline Tensor log(const Tensor& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

inline Tensor sigmoid(const Tensor& a) {
  return unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](double x) {
                 double s = 1.0 / (1.0 + std::exp(-x));
                 return s * (1.0 - s);
               });
}

inline Tensor elu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
               [](double x) { return x > 0.0 ? 1.0 : std::exp(x); });
}

inline Tensor leaky_relu(const Tensor& a, double slope) {
  Tape* tape = tape_of({&a});
  Tensor out = make_out(tape, a.rows, a.cols);
  for (int64_t i = 0; i < a.size(); ++i) {
    double x = (*a.val)[static_cast<size_t>(i)];
    (*out.val)[static_cast<size_t>(i)] = x > 0.0 ? x : slope * x;
  }
  if (tape) {
    tape->record([a, out, slope]() {
      for (int64_t i = 0; i < a.size(); ++i) {
        double x = (*a.val)[static_cast<size_t>(i)];
        (*a.grad)[static_cast<size_t>(i)] += (x > 0.0 ? 1.0 : slope) * (*out.grad)[static_cast<size_t>(i)];
      }
    });
  }
  return out;
}

/// axis 0: stack vertically (same cols); axis 1: side by side (same rows).
inline Tensor concat(const std::vector<Tensor>& ts, int axis) {
  if (ts.empty()) throw std::invalid_argument("concat: empty list");
  Tape* tape = nullptr;
  for (const auto& t : ts) {
    Tape* tt = tape_of({&t});
    if (tt) tape = tt;
  }
  int64_t rows = 0, cols = 0;
  if (axis == 0) {
    cols = ts.front().cols;
    for (const auto& t : ts) {
      if (t.cols != cols) throw std::invalid_argument("concat axis 0: column mismatch");
      rows += t.rows;
    }
  } else if (axis == 1) {
    rows = ts.front().rows;
    for (const auto& t : ts) {
      if (t.rows != rows) throw std::invalid_argument("concat axis 1: row mismatch");
      cols += t.cols;
    }
  } else {
    throw std::invalid_argument("concat: axis must be 0 or 1");
  }
  Tensor out = make_out(tape, rows, cols);
  int64_t off = 0;
  for (const auto& t : ts) {
    if (axis == 0) {
      std::copy(t.val->begin(), t.val->end(), out.val->begin() + off * cols);
      off += t.rows;
    } else {
      for (int64_t i = 0; i < rows; ++i)
        std::copy(t.val->begin() + i * t.cols, t.val->begin() + (i + 1) * t.cols,
                  out.val->begin() + i * cols + off);
      off += t.cols;
    }
  }
  if (tape) {
    tape->record([ts, out, axis]() {
      int64_t off = 0;
      for (const auto& t : ts) {
        if (axis == 0) {
          for (int64_t i = 0; i < t.size(); ++i)
            (*t.grad)[static_cast<size_t>(i)] += (*out.grad)[static_cast<size_t>(off * t.cols + i)];
          off += t.rows;
        } else {
          for (int64_t i = 0; i < t.rows; ++i)
            for (int64_t j = 0; j < t.cols; ++j)
              (*t.grad)[static_cast<size_t>(i * t.cols + j)] +=
                  (*out.grad)[static_cast<size_t>(i * out.cols + off + j)];
          off += t.cols;
        }
      }
    });
  }
  return out;
}

inline Tensor gather_rows(const Tensor& a, const std::vector<int64_t>& idx) {
  for (int64_t i : idx)
    if (i < 0 || i >= a.rows) throw std::out_of_range("gather_rows: index out of range");
  Tape* tape = tape_of({&a});
  Tensor out = make_out(tape, static_cast<int64_t>(idx.size()), a.cols);
  for (size_t r = 0; r < idx.size(); ++r)
    std::copy(a.val->begin() + idx[r] * a.cols, a.val->begin() + (idx[r] + 1) * a.cols,
              out.val->begin() + static_cast<int64_t>(r) * a.cols);
  if (tape) {
    tape->record([a, out, idx]() {
      for (size_t r = 0; r < idx.size(); ++r)
        for (int64_t j = 0; j < a.cols; ++j)
          (*a.grad)[static_cast<size_t>(idx[r] * a.cols + j)] +=
              (*out.grad)[static_cast<size_t>(static_cast<int64_t>(r) * a.cols + j)];
    });
  }
  return out;
}

inline Tensor sum_all(const Tensor& a) {
  Tape* tape = tape_of({&a});
  Tensor out = make_out(tape, 1, 1);
  double s = 0.0;
  for (double x : *a.val) s += x;
  (*out.val)[0] = s;
  if (tape) {
    tape->record([a, out]() {
      for (int64_t i = 0; i < a.size(); ++i) (*a.grad)[static_cast<size_t>(i)] += (*out.grad)[0];
    });
  }
  return out;
}

inline Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.size())); }

/// axis 1: per-row sums (n x 1); axis 0: per-column sums (1 x m).
inline Tensor sum_axis(const Tensor& a, int axis) {
  Tape* tape = tape_of({&a});
  Tensor out = axis == 1 ? make_out(tape, a.rows, 1) : make_out(tape, 1, a.cols);
  for (int64_t i = 0; i < a.rows; ++i)
    for (int64_t j = 0; j < a.cols; ++j)
      (*out.val)[static_cast<size_t>(axis == 1 ? i : j)] += a.v(i, j);
  if (tape) {
    tape->record([a, out, axis]() {
      for (int64_t i = 0; i < a.rows; ++i)
        for (int64_t j = 0; j < a.cols; ++j)
          (*a.grad)[static_cast<size_t>(i * a.cols + j)] +=
              (*out.grad)[static_cast<size_t>(axis == 1 ? i : j)];
    });
  }
  return out;
}

/// Softmax along axis 1 (per row), max-subtracted.
inline Tensor softmax_rows(const Tensor& a) {
  Tape* tape = tape_of({&a});
  Tensor out = make_out(tape, a.rows, a.cols);
  for (int64_t i = 0; i < a.rows; ++i) {
    double mx = a.v(i, 0);
    for (int64_t j = 1; j < a.cols; ++j) mx = std::max(mx, a.v(i, j));
    double denom = 0.0;
    for (int64_t j = 0; j < a.cols; ++j) denom += std::exp(a.v(i, j) - mx);
    for (int64_t j = 0; j < a.cols; ++j)
      (*out.val)[static_cast<size_t>(i * a.cols + j)] = std::exp(a.v(i, j) - mx) / denom;
  }
  if (tape) {
    tape->record([a, out]() {
      for (int64_t i = 0; i < a.rows; ++i) {
        double dot = 0.0;
        for (int64_t j = 0; j < a.cols; ++j)
          dot += (*out.grad)[static_cast<size_t>(i * a.cols + j)] *
                 (*out.val)[static_cast<size_t>(i * a.cols + j)];
        for (int64_t j = 0; j < a.cols; ++j)
          (*a.grad)[static_cast<size_t>(i * a.cols + j)] +=
              (*out.val)[static_cast<size_t>(i * a.cols + j)] *
              ((*out.grad)[static_cast<size_t>(i * a.cols + j)] - dot);
      }
    });
  }
  return out;
}

/// Softmax within each contiguous segment of `seg` (sorted, non-negative).
/// `values` is n x 1. Empty segments simply contribute no outputs.
inline Tensor segment_softmax(const Tensor& values, const std::vector<int64_t>& seg) {
  if (values.cols != 1) throw std::invalid_argument("segment_softmax: values must be n x 1");
  if (static_cast<int64_t>(seg.size()) != values.rows)
    throw std::invalid_argument("segment_softmax: segment ids length mismatch");
  for (size_t i = 1; i < seg.size(); ++i)
    if (seg[i] < seg[i - 1]) throw std::invalid_argument("segment_softmax: ids not sorted");
  Tape* tape = tape_of({&values});
  Tensor out = make_out(tape, values.rows, 1);
  size_t i = 0;
  while (i < seg.size()) {
    size_t j = i;
    while (j < seg.size() && seg[j] == seg[i]) ++j;
    double mx = (*values.val)[i];
    for (size_t k = i; k < j; ++k) mx = std::max(mx, (*values.val)[k]);
    double denom = 0.0;
    for (size_t k = i; k < j; ++k) denom += std::exp((*values.val)[k] - mx);
    for (size_t k = i; k < j; ++k) (*out.val)[k] = std::exp((*values.val)[k] - mx) / denom;
    i = j;
  }
  if (tape) {
    tape->record([values, out, seg]() {
      size_t i = 0;
      while (i < seg.size()) {
        size_t j = i;
        while (j < seg.size() && seg[j] == seg[i]) ++j;
        double dot = 0.0;
        for (size_t k = i; k < j; ++k) dot += (*out.grad)[k] * (*out.val)[k];
        for (size_t k = i; k < j; ++k)
          (*values.grad)[k] += (*out.val)[k] * ((*out.grad)[k] - dot);
        i = j;
      }
    });
  }
  return out;
}

/// out[s] = sum over edges e with seg[e] == s of weights[e] * messages[e].
/// Segments with no edges stay zero.
inline Tensor segment_weighted_sum(const Tensor& messages, const Tensor& weights,
                                   const std::vector<int64_t>& seg, int64_t n_segments) {
  if (weights.cols != 1 || weights.rows != messages.rows)
    throw std::invalid_argument("segment_weighted_sum: weights must be E x 1 matching messages");
  if (static_cast<int64_t>(seg.size()) != messages.rows)
    throw std::invalid_argument("segment_weighted_sum: segment ids length mismatch");
  Tape* tape = tape_of({&messages, &weights});
  Tensor out = make_out(tape, n_segments, messages.cols);
  for (size_t e = 0; e < seg.size(); ++e) {
    if (seg[e] < 0 || seg[e] >= n_segments)
      throw std::out_of_range("segment_weighted_sum: segment id out of range");
    for (int64_t j = 0; j < messages.cols; ++j)
      (*out.val)[static_cast<size_t>(seg[e] * messages.cols + j)] +=
          (*weights.val)[e] * (*messages.val)[static_cast<size_t>(static_cast<int64_t>(e) * messages.cols + j)];
  }
  if (tape) {
    tape->record([messages, weights, out, seg]() {
      for (size_t e = 0; e < seg.size(); ++e) {
        double wg = 0.0;
        for (int64_t j = 0; j < messages.cols; ++j) {
          double og = (*out.grad)[static_cast<size_t>(seg[e] * messages.cols + j)];
          (*messages.grad)[static_cast<size_t>(static_cast<int64_t>(e) * messages.cols + j)] +=
              (*weights.val)[e] * og;
          wg += og * (*messages.val)[static_cast<size_t>(static_cast<int64_t>(e) * messages.cols + j)];
        }
        (*weights.grad)[e] += wg;
      }
    });
  }
  return out;
}

/// Row-wise select: rows with mask set come from `primary`, others from
/// `fallback`.
inline Tensor row_merge(const Tensor& primary, const Tensor& fallback,
                        const std::vector<uint8_t>& mask) {
  if (primary.rows != fallback.rows || primary.cols != fallback.cols)
    throw std::invalid_argument("row_merge: shape mismatch");
  if (static_cast<int64_t>(mask.size()) != primary.rows)
    throw std::invalid_argument("row_merge: mask length mismatch");
  Tape* tape = tape_of({&primary, &fallback});
  Tensor out = make_out(tape, primary.rows, primary.cols);
  for (int64_t i = 0; i < primary.rows; ++i) {
    const Tensor& src = mask[static_cast<size_t>(i)] ? primary : fallback;
    std::copy(src.val->begin() + i * src.cols, src.val->begin() + (i + 1) * src.cols,
              out.val->begin() + i * out.cols);
  }
  if (tape) {
    tape->record([primary, fallback, out, mask]() {
      for (int64_t i = 0; i < primary.rows; ++i) {
        const Tensor& src = mask[static_cast<size_t>(i)] ? primary : fallback;
        for (int64_t j = 0; j < primary.cols; ++j)
          (*src.grad)[static_cast<size_t>(i * src.cols + j)] +=
              (*out.grad)[static_cast<size_t>(i * out.cols + j)];
      }
    });
  }
  return out;
}

/// Mean negative log-likelihood after a per-row softmax, over the rows in
/// `mask_idx`. `labels` rows are one-hot. Fused for numerical stability.
inline Tensor masked_softmax_xent(const Tensor& logits, const Tensor& labels,
                                  const std::vector<int64_t>& mask_idx) {
  if (logits.rows != labels.rows || logits.cols != labels.cols)
    throw std::invalid_argument("masked_softmax_xent: logits " + logits.shape_str() +
                                " vs labels " + labels.shape_str());
  if (mask_idx.empty()) throw std::invalid_argument("masked_softmax_xent: empty mask");
  Tape* tape = tape_of({&logits});
  Tensor out = make_out(tape, 1, 1);
  double total = 0.0;
  for (int64_t i : mask_idx) {
    double mx = logits.v(i, 0);
    for (int64_t j = 1; j < logits.cols; ++j) mx = std::max(mx, logits.v(i, j));
    double lse = 0.0;
    for (int64_t j = 0; j < logits.cols; ++j) lse += std::exp(logits.v(i, j) - mx);
    lse = mx + std::log(lse);
    for (int64_t j = 0; j < logits.cols; ++j)
      if (labels.v(i, j) != 0.0) total += labels.v(i, j) * (lse - logits.v(i, j));
  }
  (*out.val)[0] = total / static_cast<double>(mask_idx.size());
  if (tape) {
    tape->record([logits, labels, out, mask_idx]() {
      double go = (*out.grad)[0] / static_cast<double>(mask_idx.size());
      for (int64_t i : mask_idx) {
        double mx = logits.v(i, 0);
        for (int64_t j = 1; j < logits.cols; ++j) mx = std::max(mx, logits.v(i, j));
        double denom = 0.0;
        for (int64_t j = 0; j < logits.cols; ++j) denom += std::exp(logits.v(i, j) - mx);
        for (int64_t j = 0; j < logits.cols; ++j) {
          double p = std::exp(logits.v(i, j) - mx) / denom;
          (*logits.grad)[static_cast<size_t>(i * logits.cols + j)] += go * (p - labels.v(i, j));
        }
      }
    });
  }
  return out;
}

/// Mean over masked rows of the summed per-column binary cross-entropy
/// on sigmoid(logits). Stable log1p formulation.
inline Tensor masked_sigmoid_bce(const Tensor& logits, const Tensor& targets,
                                 const std::vector<int64_t>& mask_idx) {
  if (logits.rows != targets.rows || logits.cols != targets.cols)
    throw std::invalid_argument("masked_sigmoid_bce: logits " + logits.shape_str() +
                                " vs targets " + targets.shape_str());
  if (mask_idx.empty()) throw std::invalid_argument("masked_sigmoid_bce: empty mask");
  Tape* tape = tape_of({&logits});
  Tensor out = make_out(tape, 1, 1);
  double total = 0.0;
  for (int64_t i : mask_idx) {
    for (int64_t j = 0; j < logits.cols; ++j) {
      double x = logits.v(i, j);
      double y = targets.v(i, j);
      // max(x,0) - x*y + log(1+exp(-|x|))
      total += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
    }
  }
  (*out.val)[0] = total / static_cast<double>(mask_idx.size());
  if (tape) {
    tape->record([logits, targets, out, mask_idx]() {
      double go = (*out.grad)[0] / static_cast<double>(mask_idx.size());
      for (int64_t i : mask_idx) {
        for (int64_t j = 0; j < logits.cols; ++j) {
          double s = 1.0 / (1.0 + std::exp(-logits.v(i, j)));
          (*logits.grad)[static_cast<size_t>(i * logits.cols + j)] += go * (s - targets.v(i, j));
        }
      }
    });
  }
  return out;
}

}  // namespace ops
}  // namespace hagnn
