#include "collabdm/nn.hpp"

#include <algorithm>
#include <cmath>

namespace collabdm::nn {

namespace {

struct ConvDims {
  int n, cin, h, w, cout, k, oh, ow;
};

ConvDims conv_dims(const std::vector<int>& in_shape,
                   const std::vector<int>& w_shape, int stride, int pad) {
  ConvDims d;
  d.n = in_shape[0];
  d.cin = in_shape[1];
  d.h = in_shape[2];
  d.w = in_shape[3];
  d.cout = w_shape[0];
  d.k = w_shape[2];
  if (w_shape[2] != w_shape[3]) {
    throw DimensionError("conv2d: kernel must be square, got " +
                         std::to_string(w_shape[2]) + "x" +
                         std::to_string(w_shape[3]));
  }
  if (d.k % 2 == 0) {
    throw DimensionError("conv2d: kernel size must be odd, got " +
                         std::to_string(d.k));
  }
  if (w_shape[1] != d.cin) {
    throw DimensionError("conv2d: input channels (axis 1) " +
                         std::to_string(d.cin) + " != weight channels " +
                         std::to_string(w_shape[1]));
  }
  if (stride < 1) {
    throw DimensionError("conv2d: stride must be >= 1");
  }
  if (d.h + 2 * pad < d.k || d.w + 2 * pad < d.k) {
    throw DimensionError("conv2d: spatial extents " + std::to_string(d.h) +
                         "x" + std::to_string(d.w) + " too small for kernel " +
                         std::to_string(d.k) + " with pad " +
                         std::to_string(pad));
  }
  d.oh = (d.h + 2 * pad - d.k) / stride + 1;
  d.ow = (d.w + 2 * pad - d.k) / stride + 1;
  return d;
}

// Gathers the patch matrix [cin*k*k, oh*ow] for one sample.
template <typename S>
void im2col(const S* img, const ConvDims& d, int stride, int pad, S* col) {
  const int patch = d.oh * d.ow;
  for (int c = 0; c < d.cin; ++c) {
    const S* plane = img + static_cast<int64_t>(c) * d.h * d.w;
    for (int ki = 0; ki < d.k; ++ki) {
      for (int kj = 0; kj < d.k; ++kj) {
        S* row = col + (static_cast<int64_t>(c) * d.k * d.k + ki * d.k + kj) *
                           patch;
        for (int oi = 0; oi < d.oh; ++oi) {
          const int si = oi * stride + ki - pad;
          for (int oj = 0; oj < d.ow; ++oj) {
            const int sj = oj * stride + kj - pad;
            row[oi * d.ow + oj] =
                (si >= 0 && si < d.h && sj >= 0 && sj < d.w)
                    ? plane[si * d.w + sj]
                    : S(0);
          }
        }
      }
    }
  }
}

// Scatter-adds the patch matrix back into one sample (adjoint of im2col).
template <typename S>
void col2im_accum(const S* col, const ConvDims& d, int stride, int pad,
                  S* img) {
  const int patch = d.oh * d.ow;
  for (int c = 0; c < d.cin; ++c) {
    S* plane = img + static_cast<int64_t>(c) * d.h * d.w;
    for (int ki = 0; ki < d.k; ++ki) {
      for (int kj = 0; kj < d.k; ++kj) {
        const S* row = col + (static_cast<int64_t>(c) * d.k * d.k +
                              ki * d.k + kj) * patch;
        for (int oi = 0; oi < d.oh; ++oi) {
          const int si = oi * stride + ki - pad;
          if (si < 0 || si >= d.h) {
            continue;
          }
          for (int oj = 0; oj < d.ow; ++oj) {
            const int sj = oj * stride + kj - pad;
            if (sj >= 0 && sj < d.w) {
              plane[si * d.w + sj] += row[oi * d.ow + oj];
            }
          }
        }
      }
    }
  }
}

} // namespace

template <typename S>
void matmul_accum(const S* a, const S* b, S* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const S* arow = a + static_cast<int64_t>(i) * k;
    S* crow = c + static_cast<int64_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const S av = arow[p];
      const S* brow = b + static_cast<int64_t>(p) * n;
      for (int j = 0; j < n; ++j) {
        crow[j] += av * brow[j];
      }
    }
  }
}

template <typename S>
BasicTensor<S> conv2d(const BasicTensor<S>& input,
                      const BasicTensor<S>& weights, int stride, int pad) {
  require_rank(input, 4, "conv2d input");
  require_rank(weights, 4, "conv2d weights");
  const ConvDims d = conv_dims(input.shape(), weights.shape(), stride, pad);
  BasicTensor<S> out({d.n, d.cout, d.oh, d.ow});

  const int cols = d.oh * d.ow;
  const int kk = d.cin * d.k * d.k;
  std::vector<S> col(static_cast<size_t>(kk) * cols);
  const int64_t in_stride = static_cast<int64_t>(d.cin) * d.h * d.w;
  const int64_t out_stride = static_cast<int64_t>(d.cout) * cols;
  for (int n = 0; n < d.n; ++n) {
    im2col(input.data() + n * in_stride, d, stride, pad, col.data());
    matmul_accum(weights.data(), col.data(), out.data() + n * out_stride,
                 d.cout, kk, cols);
  }
  return out;
}

template <typename S>
BasicTensor<S> conv2d_input_grad(const BasicTensor<S>& weights,
                                 const BasicTensor<S>& out_grad, int in_h,
                                 int in_w, int stride, int pad) {
  require_rank(weights, 4, "conv2d weights");
  require_rank(out_grad, 4, "conv2d output gradient");
  const int n = out_grad.dim(0);
  const int cin = weights.dim(1);
  const ConvDims d =
      conv_dims({n, cin, in_h, in_w}, weights.shape(), stride, pad);
  if (out_grad.dim(1) != d.cout || out_grad.dim(2) != d.oh ||
      out_grad.dim(3) != d.ow) {
    throw DimensionError("conv2d_input_grad: upstream shape " +
                         out_grad.shape_str() + " does not match expected [" +
                         std::to_string(n) + "," + std::to_string(d.cout) +
                         "," + std::to_string(d.oh) + "," +
                         std::to_string(d.ow) + "]");
  }

  const int cols = d.oh * d.ow;
  const int kk = d.cin * d.k * d.k;
  // Transposed weight matrix [kk, cout].
  std::vector<S> wt(static_cast<size_t>(kk) * d.cout);
  for (int co = 0; co < d.cout; ++co) {
    for (int p = 0; p < kk; ++p) {
      wt[static_cast<size_t>(p) * d.cout + co] =
          weights[static_cast<int64_t>(co) * kk + p];
    }
  }

  BasicTensor<S> grad({n, cin, in_h, in_w});
  std::vector<S> col(static_cast<size_t>(kk) * cols);
  const int64_t in_stride = static_cast<int64_t>(cin) * in_h * in_w;
  const int64_t out_stride = static_cast<int64_t>(d.cout) * cols;
  for (int i = 0; i < n; ++i) {
    std::fill(col.begin(), col.end(), S(0));
    matmul_accum(wt.data(), out_grad.data() + i * out_stride, col.data(), kk,
                 d.cout, cols);
    col2im_accum(col.data(), d, stride, pad, grad.data() + i * in_stride);
  }
  return grad;
}

template <typename S>
BasicTensor<S> conv2d_weight_grad(const BasicTensor<S>& input,
                                  const BasicTensor<S>& out_grad, int kernel,
                                  int stride, int pad) {
  require_rank(input, 4, "conv2d input");
  require_rank(out_grad, 4, "conv2d output gradient");
  const int cout = out_grad.dim(1);
  const ConvDims d = conv_dims(input.shape(),
                               {cout, input.dim(1), kernel, kernel}, stride,
                               pad);
  if (out_grad.dim(0) != d.n || out_grad.dim(2) != d.oh ||
      out_grad.dim(3) != d.ow) {
    throw DimensionError("conv2d_weight_grad: upstream shape " +
                         out_grad.shape_str() + " inconsistent with input " +
                         input.shape_str());
  }

  const int cols = d.oh * d.ow;
  const int kk = d.cin * d.k * d.k;
  BasicTensor<S> grad({cout, d.cin, kernel, kernel});
  std::vector<S> col(static_cast<size_t>(kk) * cols);
  std::vector<S> colt(static_cast<size_t>(cols) * kk);
  const int64_t in_stride = static_cast<int64_t>(d.cin) * d.h * d.w;
  const int64_t out_stride = static_cast<int64_t>(cout) * cols;
  for (int n = 0; n < d.n; ++n) {
    im2col(input.data() + n * in_stride, d, stride, pad, col.data());
    for (int p = 0; p < kk; ++p) {
      for (int j = 0; j < cols; ++j) {
        colt[static_cast<size_t>(j) * kk + p] =
            col[static_cast<size_t>(p) * cols + j];
      }
    }
    matmul_accum(out_grad.data() + n * out_stride, colt.data(), grad.data(),
                 cout, cols, kk);
  }
  return grad;
}

template <typename S>
BasicTensor<S> instance_norm(const BasicTensor<S>& input, double epsilon) {
  require_rank(input, 4, "instance_norm input");
  const int n = input.dim(0), c = input.dim(1);
  const int m = input.dim(2) * input.dim(3);
  if (m < 1) {
    throw DimensionError("instance_norm: empty spatial extent " +
                         input.shape_str());
  }
  BasicTensor<S> out(input.shape());
  for (int64_t s = 0; s < static_cast<int64_t>(n) * c; ++s) {
    const S* x = input.data() + s * m;
    S* y = out.data() + s * m;
    double mean = 0;
    for (int i = 0; i < m; ++i) {
      mean += x[i];
    }
    mean /= m;
    double var = 0;
    for (int i = 0; i < m; ++i) {
      const double d = x[i] - mean;
      var += d * d;
    }
    var /= m;
    const double inv = 1.0 / std::sqrt(var + epsilon);
    for (int i = 0; i < m; ++i) {
      y[i] = static_cast<S>((x[i] - mean) * inv);
    }
  }
  return out;
}

template <typename S>
BasicTensor<S> instance_norm_input_grad(const BasicTensor<S>& input,
                                        const BasicTensor<S>& upstream,
                                        double epsilon) {
  if (!input.same_shape(upstream)) {
    throw DimensionError("instance_norm_input_grad: input " +
                         input.shape_str() + " vs upstream " +
                         upstream.shape_str());
  }
  const int n = input.dim(0), c = input.dim(1);
  const int m = input.dim(2) * input.dim(3);
  BasicTensor<S> out(input.shape());
  for (int64_t s = 0; s < static_cast<int64_t>(n) * c; ++s) {
    const S* x = input.data() + s * m;
    const S* g = upstream.data() + s * m;
    S* y = out.data() + s * m;
    double mean = 0;
    for (int i = 0; i < m; ++i) {
      mean += x[i];
    }
    mean /= m;
    double var = 0;
    for (int i = 0; i < m; ++i) {
      const double d = x[i] - mean;
      var += d * d;
    }
    var /= m;
    const double inv = 1.0 / std::sqrt(var + epsilon);
    double gmean = 0, gxmean = 0;
    for (int i = 0; i < m; ++i) {
      const double xh = (x[i] - mean) * inv;
      gmean += g[i];
      gxmean += g[i] * xh;
    }
    gmean /= m;
    gxmean /= m;
    for (int i = 0; i < m; ++i) {
      const double xh = (x[i] - mean) * inv;
      y[i] = static_cast<S>(inv * (g[i] - gmean - xh * gxmean));
    }
  }
  return out;
}

template <typename S>
BasicTensor<S> relu(const BasicTensor<S>& input) {
  BasicTensor<S> out(input.shape());
  for (int64_t i = 0; i < input.size(); ++i) {
    out[i] = input[i] > S(0) ? input[i] : S(0);
  }
  return out;
}

template <typename S>
BasicTensor<S> relu_input_grad(const BasicTensor<S>& input,
                               const BasicTensor<S>& upstream) {
  if (!input.same_shape(upstream)) {
    throw DimensionError("relu_input_grad: input " + input.shape_str() +
                         " vs upstream " + upstream.shape_str());
  }
  BasicTensor<S> out(input.shape());
  for (int64_t i = 0; i < input.size(); ++i) {
    out[i] = input[i] > S(0) ? upstream[i] : S(0);
  }
  return out;
}

template <typename S>
BasicTensor<S> avg_pool2(const BasicTensor<S>& input) {
  require_rank(input, 4, "avg_pool2 input");
  const int h = input.dim(2), w = input.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw DimensionError("avg_pool2: extents must be even, got " +
                         input.shape_str());
  }
  const int n = input.dim(0), c = input.dim(1);
  BasicTensor<S> out({n, c, h / 2, w / 2});
  for (int64_t s = 0; s < static_cast<int64_t>(n) * c; ++s) {
    const S* x = input.data() + s * h * w;
    S* y = out.data() + s * (h / 2) * (w / 2);
    for (int i = 0; i < h / 2; ++i) {
      for (int j = 0; j < w / 2; ++j) {
        y[i * (w / 2) + j] =
            (x[(2 * i) * w + 2 * j] + x[(2 * i) * w + 2 * j + 1] +
             x[(2 * i + 1) * w + 2 * j] + x[(2 * i + 1) * w + 2 * j + 1]) /
            S(4);
      }
    }
  }
  return out;
}

template <typename S>
BasicTensor<S> avg_pool2_input_grad(int in_h, int in_w,
                                    const BasicTensor<S>& upstream) {
  require_rank(upstream, 4, "avg_pool2 upstream");
  const int n = upstream.dim(0), c = upstream.dim(1);
  if (upstream.dim(2) != in_h / 2 || upstream.dim(3) != in_w / 2) {
    throw DimensionError("avg_pool2_input_grad: upstream " +
                         upstream.shape_str() + " vs input extents " +
                         std::to_string(in_h) + "x" + std::to_string(in_w));
  }
  BasicTensor<S> out({n, c, in_h, in_w});
  for (int64_t s = 0; s < static_cast<int64_t>(n) * c; ++s) {
    const S* g = upstream.data() + s * (in_h / 2) * (in_w / 2);
    S* y = out.data() + s * in_h * in_w;
    for (int i = 0; i < in_h / 2; ++i) {
      for (int j = 0; j < in_w / 2; ++j) {
        const S v = g[i * (in_w / 2) + j] / S(4);
        y[(2 * i) * in_w + 2 * j] = v;
        y[(2 * i) * in_w + 2 * j + 1] = v;
        y[(2 * i + 1) * in_w + 2 * j] = v;
        y[(2 * i + 1) * in_w + 2 * j + 1] = v;
      }
    }
  }
  return out;
}

template <typename S>
BasicTensor<S> linear(const BasicTensor<S>& input,
                      const BasicTensor<S>& weights,
                      const BasicTensor<S>& bias) {
  require_rank(input, 2, "linear input");
  require_rank(weights, 2, "linear weights");
  const int n = input.dim(0), d = input.dim(1), k = weights.dim(0);
  if (weights.dim(1) != d) {
    throw DimensionError("linear: input features " + std::to_string(d) +
                         " != weight features " +
                         std::to_string(weights.dim(1)));
  }
  if (bias.size() != k) {
    throw DimensionError("linear: bias length " +
                         std::to_string(bias.size()) + " != outputs " +
                         std::to_string(k));
  }
  BasicTensor<S> out({n, k});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      out.at(i, j) = bias[j];
    }
  }
  // out += input * weights^T, done row by row to keep weights row-major.
  for (int i = 0; i < n; ++i) {
    const S* x = input.data() + static_cast<int64_t>(i) * d;
    S* y = out.data() + static_cast<int64_t>(i) * k;
    for (int j = 0; j < k; ++j) {
      const S* w = weights.data() + static_cast<int64_t>(j) * d;
      S acc = 0;
      for (int p = 0; p < d; ++p) {
        acc += x[p] * w[p];
      }
      y[j] += acc;
    }
  }
  return out;
}

template <typename S>
BasicTensor<S> linear_input_grad(const BasicTensor<S>& weights,
                                 const BasicTensor<S>& upstream) {
  const int n = upstream.dim(0), k = upstream.dim(1), d = weights.dim(1);
  if (weights.dim(0) != k) {
    throw DimensionError("linear_input_grad: upstream outputs " +
                         std::to_string(k) + " != weight outputs " +
                         std::to_string(weights.dim(0)));
  }
  BasicTensor<S> out({n, d});
  matmul_accum(upstream.data(), weights.data(), out.data(), n, k, d);
  return out;
}

template <typename S>
BasicTensor<S> linear_weight_grad(const BasicTensor<S>& input,
                                  const BasicTensor<S>& upstream) {
  const int n = input.dim(0), d = input.dim(1), k = upstream.dim(1);
  if (upstream.dim(0) != n) {
    throw DimensionError("linear_weight_grad: batch mismatch " +
                         input.shape_str() + " vs " + upstream.shape_str());
  }
  BasicTensor<S> out({k, d});
  for (int i = 0; i < n; ++i) {
    const S* x = input.data() + static_cast<int64_t>(i) * d;
    const S* g = upstream.data() + static_cast<int64_t>(i) * k;
    for (int j = 0; j < k; ++j) {
      S* w = out.data() + static_cast<int64_t>(j) * d;
      const S gv = g[j];
      for (int p = 0; p < d; ++p) {
        w[p] += gv * x[p];
      }
    }
  }
  return out;
}

template <typename S>
BasicTensor<S> linear_bias_grad(const BasicTensor<S>& upstream) {
  const int n = upstream.dim(0), k = upstream.dim(1);
  BasicTensor<S> out({k});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      out[j] += upstream.at(i, j);
    }
  }
  return out;
}

namespace {

struct Lerp {
  int lo, hi;
  double w_hi; // weight of hi, weight of lo is 1 - w_hi
};

// align_corners = false sampling position, clamped.
Lerp lerp_coord(int o, int out_n, int in_n) {
  const double scale = static_cast<double>(in_n) / out_n;
  double src = (o + 0.5) * scale - 0.5;
  src = std::max(0.0, std::min(src, static_cast<double>(in_n - 1)));
  Lerp l;
  l.lo = static_cast<int>(src);
  l.hi = std::min(l.lo + 1, in_n - 1);
  l.w_hi = src - l.lo;
  return l;
}

} // namespace

template <typename S>
BasicTensor<S> bilinear_upsample(const BasicTensor<S>& input, int out_h,
                                 int out_w) {
  require_rank(input, 4, "bilinear_upsample input");
  const int n = input.dim(0), c = input.dim(1);
  const int h = input.dim(2), w = input.dim(3);
  if (h < 1 || w < 1 || out_h < 1 || out_w < 1) {
    throw DimensionError("bilinear_upsample: empty extents");
  }
  std::vector<Lerp> li(out_h), lj(out_w);
  for (int i = 0; i < out_h; ++i) {
    li[i] = lerp_coord(i, out_h, h);
  }
  for (int j = 0; j < out_w; ++j) {
    lj[j] = lerp_coord(j, out_w, w);
  }
  BasicTensor<S> out({n, c, out_h, out_w});
  for (int64_t s = 0; s < static_cast<int64_t>(n) * c; ++s) {
    const S* x = input.data() + s * h * w;
    S* y = out.data() + s * out_h * out_w;
    for (int i = 0; i < out_h; ++i) {
      for (int j = 0; j < out_w; ++j) {
        const Lerp& a = li[i];
        const Lerp& b = lj[j];
        const double v =
            (1 - a.w_hi) * ((1 - b.w_hi) * x[a.lo * w + b.lo] +
                            b.w_hi * x[a.lo * w + b.hi]) +
            a.w_hi * ((1 - b.w_hi) * x[a.hi * w + b.lo] +
                      b.w_hi * x[a.hi * w + b.hi]);
        y[i * out_w + j] = static_cast<S>(v);
      }
    }
  }
  return out;
}

template <typename S>
BasicTensor<S> bilinear_upsample_input_grad(int in_h, int in_w,
                                            const BasicTensor<S>& upstream) {
  require_rank(upstream, 4, "bilinear_upsample upstream");
  const int n = upstream.dim(0), c = upstream.dim(1);
  const int out_h = upstream.dim(2), out_w = upstream.dim(3);
  std::vector<Lerp> li(out_h), lj(out_w);
  for (int i = 0; i < out_h; ++i) {
    li[i] = lerp_coord(i, out_h, in_h);
  }
  for (int j = 0; j < out_w; ++j) {
    lj[j] = lerp_coord(j, out_w, in_w);
  }
  BasicTensor<S> out({n, c, in_h, in_w});
  for (int64_t s = 0; s < static_cast<int64_t>(n) * c; ++s) {
    const S* g = upstream.data() + s * out_h * out_w;
    S* y = out.data() + s * in_h * in_w;
    for (int i = 0; i < out_h; ++i) {
      for (int j = 0; j < out_w; ++j) {
        const Lerp& a = li[i];
        const Lerp& b = lj[j];
        const double gv = g[i * out_w + j];
        y[a.lo * in_w + b.lo] += static_cast<S>((1 - a.w_hi) * (1 - b.w_hi) * gv);
        y[a.lo * in_w + b.hi] += static_cast<S>((1 - a.w_hi) * b.w_hi * gv);
        y[a.hi * in_w + b.lo] += static_cast<S>(a.w_hi * (1 - b.w_hi) * gv);
        y[a.hi * in_w + b.hi] += static_cast<S>(a.w_hi * b.w_hi * gv);
      }
    }
  }
  return out;
}

template <typename S>
std::pair<double, BasicTensor<S>>
softmax_cross_entropy(const BasicTensor<S>& logits,
                      const std::vector<int>& labels) {
  require_rank(logits, 2, "softmax_cross_entropy logits");
  const int n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(labels.size()) != n) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(n) +
                         " rows vs " + std::to_string(labels.size()) +
                         " labels");
  }
  BasicTensor<S> grad({n, k});
  double loss = 0;
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= k) {
      throw InputError("softmax_cross_entropy: label " +
                       std::to_string(labels[i]) + " out of range [0," +
                       std::to_string(k) + ") at row " + std::to_string(i));
    }
    const S* x = logits.data() + static_cast<int64_t>(i) * k;
    S* g = grad.data() + static_cast<int64_t>(i) * k;
    double mx = x[0];
    for (int j = 1; j < k; ++j) {
      mx = std::max(mx, static_cast<double>(x[j]));
    }
    double sum = 0;
    for (int j = 0; j < k; ++j) {
      sum += std::exp(x[j] - mx);
    }
    const double log_sum = std::log(sum);
    loss += log_sum - (x[labels[i]] - mx);
    for (int j = 0; j < k; ++j) {
      const double p = std::exp(x[j] - mx) / sum;
      g[j] = static_cast<S>((p - (j == labels[i] ? 1.0 : 0.0)) / n);
    }
  }
  return {loss / n, std::move(grad)};
}

#define COLLABDM_INSTANTIATE_NN(S)                                            \
  template void matmul_accum<S>(const S*, const S*, S*, int, int, int);       \
  template BasicTensor<S> conv2d<S>(const BasicTensor<S>&,                    \
                                    const BasicTensor<S>&, int, int);         \
  template BasicTensor<S> conv2d_input_grad<S>(                               \
      const BasicTensor<S>&, const BasicTensor<S>&, int, int, int, int);      \
  template BasicTensor<S> conv2d_weight_grad<S>(                              \
      const BasicTensor<S>&, const BasicTensor<S>&, int, int, int);           \
  template BasicTensor<S> instance_norm<S>(const BasicTensor<S>&, double);    \
  template BasicTensor<S> instance_norm_input_grad<S>(                        \
      const BasicTensor<S>&, const BasicTensor<S>&, double);                  \
  template BasicTensor<S> relu<S>(const BasicTensor<S>&);                     \
  template BasicTensor<S> relu_input_grad<S>(const BasicTensor<S>&,           \
                                             const BasicTensor<S>&);          \
  template BasicTensor<S> avg_pool2<S>(const BasicTensor<S>&);                \
  template BasicTensor<S> avg_pool2_input_grad<S>(int, int,                   \
                                                  const BasicTensor<S>&);     \
  template BasicTensor<S> linear<S>(const BasicTensor<S>&,                    \
                                    const BasicTensor<S>&,                    \
                                    const BasicTensor<S>&);                   \
  template BasicTensor<S> linear_input_grad<S>(const BasicTensor<S>&,         \
                                               const BasicTensor<S>&);        \
  template BasicTensor<S> linear_weight_grad<S>(const BasicTensor<S>&,        \
                                                const BasicTensor<S>&);       \
  template BasicTensor<S> linear_bias_grad<S>(const BasicTensor<S>&);         \
  template BasicTensor<S> bilinear_upsample<S>(const BasicTensor<S>&, int,    \
                                               int);                          \
  template BasicTensor<S> bilinear_upsample_input_grad<S>(                    \
      int, int, const BasicTensor<S>&);                                       \
  template std::pair<double, BasicTensor<S>> softmax_cross_entropy<S>(        \
      const BasicTensor<S>&, const std::vector<int>&);

COLLABDM_INSTANTIATE_NN(float)
COLLABDM_INSTANTIATE_NN(double)

#undef COLLABDM_INSTANTIATE_NN

} // namespace collabdm::nn
