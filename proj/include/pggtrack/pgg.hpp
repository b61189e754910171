#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>
#include <variant>
#include <vector>

#include "pggtrack/autodiff.hpp"
#include "pggtrack/grid.hpp"
#include "pggtrack/heatmap.hpp"
#include "pggtrack/skeleton.hpp"

namespace pggtrack {

// D x N column matrix of masked embeddings, row-major.
struct EmbeddingMatrix {
  int dims = 0;
  int cols = 0;
  std::vector<double> data;  // data[d * cols + i]

  EmbeddingMatrix() = default;
  EmbeddingMatrix(int d, int n) : dims(d), cols(n), data(static_cast<std::size_t>(d) * n, 0.0) {}

  double& at(int d, int i) { return data[static_cast<std::size_t>(d) * cols + i]; }
  double at(int d, int i) const { return data[static_cast<std::size_t>(d) * cols + i]; }
};

// Row-major pixel indices of the mask's true bits, strictly increasing.
using MaskIndex = std::vector<int>;

// All grouping iterates [X^(1), ..., X^(R+1)] plus the bandwidth and
// iteration count that produced them.
struct PggTrace {
  std::vector<EmbeddingMatrix> iterates;
  double delta = 5.0;
  int iterations = 1;
  bool inverse_kernel = false;
  std::vector<double> channel_scales;  // distance-metric scales; empty = all ones
};

enum class PggKernel { kPaper, kInverse };

struct PggConfig {
  double delta = 5.0;
  int iterations = 1;
  PggKernel kernel = PggKernel::kPaper;
  std::vector<double> channel_scales;  // empty = all ones
};

using FieldView = std::variant<const ScalarField*, const VectorField2*>;

// Concatenates the given fields channel-wise and keeps only masked pixels.
// A scalar field contributes one row, a vector field two (dx then dy).
inline std::pair<EmbeddingMatrix, MaskIndex> gather_masked(const std::vector<FieldView>& fields,
                                                           const BinaryMask& mask) {
  int dims = 0;
  for (const FieldView& f : fields) {
    if (std::holds_alternative<const ScalarField*>(f)) {
      if (!(std::get<const ScalarField*>(f)->shape() == mask.shape))
        throw InvalidInput("gather_masked: field shape differs from mask shape");
      dims += 1;
    } else {
      if (!(std::get<const VectorField2*>(f)->shape() == mask.shape))
        throw InvalidInput("gather_masked: field shape differs from mask shape");
      dims += 2;
    }
  }
  MaskIndex index;
  index.reserve(mask.occupancy);
  for (std::size_t p = 0; p < mask.bits.size(); ++p)
    if (mask.bits[p]) index.push_back(static_cast<int>(p));

  EmbeddingMatrix x(dims, static_cast<int>(index.size()));
  int row = 0;
  for (const FieldView& f : fields) {
    if (std::holds_alternative<const ScalarField*>(f)) {
      const ScalarField& s = *std::get<const ScalarField*>(f);
      for (std::size_t i = 0; i < index.size(); ++i) x.at(row, static_cast<int>(i)) = s[index[i]];
      ++row;
    } else {
      const VectorField2& v = *std::get<const VectorField2*>(f);
      for (std::size_t i = 0; i < index.size(); ++i) {
        x.at(row, static_cast<int>(i)) = v[index[i]].x;
        x.at(row + 1, static_cast<int>(i)) = v[index[i]].y;
      }
      row += 2;
    }
  }
  return {std::move(x), std::move(index)};
}

namespace detail {

inline double kernel_coefficient(double delta, bool inverse) {
  if (delta <= 0.0) throw InvalidInput("gbms bandwidth must be positive");
  // Alg. 1 puts delta^2 in the numerator; the conventional form divides.
  return inverse ? -1.0 / (2.0 * delta * delta) : -delta * delta / 2.0;
}

inline std::vector<double> effective_scales(const std::vector<double>& scales, int dims) {
  if (scales.empty()) return {};
  if (static_cast<int>(scales.size()) != dims)
    throw InvalidInput("channel scale count does not match embedding dimension");
  return scales;
}

struct AllocStats {
  std::size_t bytes = 0;
  void track(std::size_t n) { bytes += n * sizeof(double); }
};

}  // namespace detail

// One Gaussian-blurring mean-shift step: W(i,j) = exp(c * |x_i - x_j|^2),
// D = diag(W * 1), X' = X W D^-1, so output column j is the affinity-weighted
// mean of all columns normalized by D(j,j). Channel scales affect only the
// distance metric, not the averaged values. The arithmetic mirrors the taped
// version expression-for-expression so both paths agree bitwise.
inline EmbeddingMatrix gbms_iterate(const EmbeddingMatrix& x, double delta,
                                    bool inverse_kernel = false,
                                    const std::vector<double>& channel_scales = {},
                                    detail::AllocStats* stats = nullptr) {
  const int d = x.dims, n = x.cols;
  if (n < 1) throw InvalidInput("gbms needs at least one column");
  const double coef = detail::kernel_coefficient(delta, inverse_kernel);
  const std::vector<double> scales = detail::effective_scales(channel_scales, d);

  std::vector<double> xs;
  const std::vector<double>* xsp = &x.data;
  if (!scales.empty()) {
    xs = x.data;
    for (int dd = 0; dd < d; ++dd)
      for (int i = 0; i < n; ++i) xs[static_cast<std::size_t>(dd) * n + i] *= scales[dd];
    xsp = &xs;
    if (stats) stats->track(xs.size());
  }
  const std::vector<double>& sx = *xsp;

  std::vector<double> gram(static_cast<std::size_t>(n) * n, 0.0);
  if (stats) stats->track(gram.size());
  for (int i = 0; i < n; ++i)
    for (int dd = 0; dd < d; ++dd) {
      const double v = sx[static_cast<std::size_t>(dd) * n + i];
      if (v == 0.0) continue;
      const double* row = &sx[static_cast<std::size_t>(dd) * n];
      double* grow = &gram[static_cast<std::size_t>(i) * n];
      for (int j = 0; j < n; ++j) grow[j] += v * row[j];
    }

  std::vector<double> sq(n, 0.0);
  if (stats) stats->track(sq.size());
  for (int dd = 0; dd < d; ++dd)
    for (int i = 0; i < n; ++i) {
      const double v = sx[static_cast<std::size_t>(dd) * n + i];
      sq[i] += v * v;
    }

  std::vector<double> w(static_cast<std::size_t>(n) * n);
  if (stats) stats->track(w.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double dist2 = (sq[j] + sq[i]) + gram[static_cast<std::size_t>(i) * n + j] * -2.0;
      w[static_cast<std::size_t>(i) * n + j] = std::exp(dist2 * coef);
    }

  std::vector<double> rowsum(n, 0.0);
  if (stats) stats->track(rowsum.size());
  for (int i = 0; i < n; ++i) {
    const double* wrow = &w[static_cast<std::size_t>(i) * n];
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += wrow[j];
    rowsum[i] = acc;
  }

  EmbeddingMatrix out(d, n);
  if (stats) stats->track(out.data.size());
  for (int dd = 0; dd < d; ++dd)
    for (int l = 0; l < n; ++l) {
      const double v = x.data[static_cast<std::size_t>(dd) * n + l];
      if (v == 0.0) continue;
      const double* wrow = &w[static_cast<std::size_t>(l) * n];
      double* orow = &out.data[static_cast<std::size_t>(dd) * n];
      for (int j = 0; j < n; ++j) orow[j] += v * wrow[j];
    }
  for (int dd = 0; dd < d; ++dd)
    for (int j = 0; j < n; ++j)
      out.data[static_cast<std::size_t>(dd) * n + j] *= 1.0 / rowsum[j];
  return out;
}

// Taped GBMS step over a D x N matrix Var; same update as gbms_iterate.
inline ad::Var gbms_iterate_on(ad::Tape& t, ad::Var x, int d, int n, double delta,
                               bool inverse_kernel = false,
                               const std::vector<double>& channel_scales = {}) {
  const double coef = detail::kernel_coefficient(delta, inverse_kernel);
  const std::vector<double> scales = detail::effective_scales(channel_scales, d);
  ad::Var xs = x;
  if (!scales.empty()) {
    std::vector<double> rep(static_cast<std::size_t>(d) * n);
    for (int dd = 0; dd < d; ++dd)
      for (int i = 0; i < n; ++i) rep[static_cast<std::size_t>(dd) * n + i] = scales[dd];
    xs = t.mul(x, t.constant(rep, d, n));
  }
  ad::Var gram = t.matmul(t.transpose(xs), xs);                    // N x N
  ad::Var sq = t.matmul(t.ones(1, d), t.mul(xs, xs));              // 1 x N
  ad::Var s_cols = t.matmul(t.ones(n, 1), sq);                     // (i,j) = sq_j
  ad::Var dist2 = t.add(t.add(s_cols, t.transpose(s_cols)), t.scale(gram, -2.0));
  ad::Var w = t.exp(t.scale(dist2, coef));
  ad::Var rowsum = t.matmul(w, t.ones(n, 1));                      // N x 1
  ad::Var dinv = t.reciprocal(rowsum);
  ad::Var bcast = t.matmul(t.ones(d, 1), t.transpose(dinv));       // D x N
  return t.mul(t.matmul(x, w), bcast);
}

// Recurrent grouping: R updates from X^(1), trace keeps every iterate.
inline PggTrace pgg_forward(const EmbeddingMatrix& x0, const PggConfig& cfg) {
  if (cfg.iterations < 1) throw InvalidInput("pgg needs at least one iteration");
  PggTrace trace;
  trace.delta = cfg.delta;
  trace.iterations = cfg.iterations;
  trace.inverse_kernel = cfg.kernel == PggKernel::kInverse;
  trace.channel_scales = cfg.channel_scales;
  trace.iterates.push_back(x0);
  for (int r = 0; r < cfg.iterations; ++r)
    trace.iterates.push_back(
        gbms_iterate(trace.iterates.back(), cfg.delta, trace.inverse_kernel, cfg.channel_scales));
  return trace;
}

inline PggTrace pgg_forward(const EmbeddingMatrix& x0, double delta, int iterations) {
  PggConfig cfg;
  cfg.delta = delta;
  cfg.iterations = iterations;
  return pgg_forward(x0, cfg);
}

namespace detail {

// Per-iterate pull/push over labeled columns. Columns labeled -1 are
// excluded. The per-person reference is the mean of that person's columns;
// pull averages per person then over persons, push follows Eq. 3 with the
// diagonal kept.
inline ad::Var grouping_loss_per_iterate(ad::Tape& t, ad::Var x, int d, int n,
                                         const std::vector<std::vector<int>>& person_cols) {
  const int k_count = static_cast<int>(person_cols.size());
  ad::Var total = t.constant(0.0);
  if (k_count == 0) return total;
  std::vector<ad::Var> refs;
  for (const auto& cols : person_cols) {
    const int nk = static_cast<int>(cols.size());
    std::vector<int> idx;
    idx.reserve(static_cast<std::size_t>(d) * nk);
    for (int dd = 0; dd < d; ++dd)
      for (int i : cols) idx.push_back(dd * n + i);
    ad::Var vals = t.gather(x, idx, d, nk);
    ad::Var ref = t.scale(t.matmul(vals, t.ones(nk, 1)), 1.0 / nk);  // D x 1
    ad::Var rep = t.matmul(ref, t.ones(1, nk));
    ad::Var diff = t.sub(vals, rep);
    total = t.add(total, t.scale(t.sum(t.square(diff)), 1.0 / (static_cast<double>(nk) * k_count)));
    refs.push_back(ref);
  }
  ad::Var push = t.constant(0.0);
  for (int a = 0; a < k_count; ++a)
    for (int b = 0; b < k_count; ++b) {
      ad::Var diff = t.sub(refs[a], refs[b]);
      push = t.add(push, t.exp(t.scale(t.sum(t.square(diff)), -0.5)));
    }
  return t.add(total, t.scale(push, 1.0 / (static_cast<double>(k_count) * k_count)));
}

inline std::vector<std::vector<int>> group_columns(const std::vector<int>& labels) {
  std::set<int> ids;
  for (int l : labels)
    if (l >= 0) ids.insert(l);
  std::vector<std::vector<int>> person_cols;
  for (int id : ids) {
    std::vector<int> cols;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == id) cols.push_back(static_cast<int>(i));
    person_cols.push_back(std::move(cols));
  }
  return person_cols;
}

}  // namespace detail

// Grouping supervision applied to every iterate of the trace, differentiable
// through all mean-shift updates back to X^(1). The graph is rebuilt from the
// trace's initial iterate, so stored and replayed iterates agree bitwise.
inline ad::DualValue pgg_grouping_loss(const PggTrace& trace, const std::vector<int>& labels) {
  if (trace.iterates.empty()) throw InvalidInput("pgg trace is empty");
  const EmbeddingMatrix& x0 = trace.iterates.front();
  if (static_cast<int>(labels.size()) != x0.cols)
    throw InvalidInput("grouping labels must cover every masked column");
  if (static_cast<int>(trace.iterates.size()) != trace.iterations + 1)
    throw InvalidInput("pgg trace length does not match its iteration count");

  auto tape = std::make_shared<ad::Tape>();
  ad::Var leaf = tape->leaf(x0.data, x0.dims, x0.cols);
  const auto person_cols = detail::group_columns(labels);
  ad::Var x = leaf;
  ad::Var total = detail::grouping_loss_per_iterate(*tape, x, x0.dims, x0.cols, person_cols);
  for (int r = 0; r < trace.iterations; ++r) {
    x = gbms_iterate_on(*tape, x, x0.dims, x0.cols, trace.delta, trace.inverse_kernel,
                        trace.channel_scales);
    total = tape->add(total,
                      detail::grouping_loss_per_iterate(*tape, x, x0.dims, x0.cols, person_cols));
  }
  return ad::DualValue(tape, total, {leaf});
}

// Masked-pixel person labels for grouping supervision: the id of the nearest
// ground-truth keypoint within `radius` pixels, else -1 (excluded).
inline std::vector<int> grouping_labels(const MaskIndex& index, GridShape shape,
                                        const std::vector<Pose>& gt, double radius) {
  std::vector<int> labels(index.size(), -1);
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < index.size(); ++i) {
    const int px = index[i] % shape.width;
    const int py = index[i] / shape.width;
    double best = r2;
    for (const Pose& pose : gt) {
      if (!pose.person_id) continue;
      for (const auto& kp : pose.joints)
        if (kp) {
          const double dx = px - kp->position.x;
          const double dy = py - kp->position.y;
          const double d2 = dx * dx + dy * dy;
          if (d2 <= best) {
            best = d2;
            labels[i] = *pose.person_id;
          }
        }
    }
  }
  return labels;
}

// Scatter result: one field per embedding row plus the mask of pixels that
// actually carry a value.
struct ScatteredFields {
  std::vector<ScalarField> rows;
  BinaryMask present;
};

inline ScatteredFields scatter_back(const EmbeddingMatrix& x, const MaskIndex& index,
                                    GridShape shape) {
  if (static_cast<int>(index.size()) != x.cols)
    throw InvalidInput("scatter_back: index length must equal column count");
  ScatteredFields out;
  out.rows.assign(x.dims, ScalarField(shape));
  out.present = BinaryMask(shape);
  for (int i = 0; i < x.cols; ++i) {
    const int p = index[i];
    if (p < 0 || static_cast<std::size_t>(p) >= shape.pixels())
      throw InvalidInput("scatter_back: pixel index out of bounds");
    for (int dd = 0; dd < x.dims; ++dd) out.rows[dd][p] = x.at(dd, i);
    out.present.set(p % shape.width, p / shape.width, true);
  }
  return out;
}

// Element-count ratio of the masked affinity matrix vs the full-image one.
inline double affinity_memory_ratio(const BinaryMask& mask) {
  const double total = static_cast<double>(mask.shape.pixels());
  const double n = static_cast<double>(mask.occupancy);
  return (n / total) * (n / total);
}

// Bytes the plain gbms step allocates for a problem of this size; used by the
// bench to compare the masked path against a hypothetical full-image run
// without actually allocating the latter.
inline std::size_t gbms_peak_bytes(std::size_t n, int d, bool scaled = false) {
  std::size_t doubles = 0;
  if (scaled) doubles += n * d;      // scaled copy
  doubles += n * n;                  // gram
  doubles += n;                      // squared norms
  doubles += n * n;                  // affinity
  doubles += n;                      // row sums
  doubles += n * d;                  // output
  return doubles * sizeof(double);
}

}  // namespace pggtrack
