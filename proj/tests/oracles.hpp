// Independent reference implementations used to check the library. These
// deliberately avoid the library's kernels (nested loops instead of
// im2col, separate gamma/shuffle code) so that agreement is meaningful.
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "collabdm/rng.hpp"
#include "collabdm/tensor.hpp"

namespace oracles {

using collabdm::BasicTensor;
using collabdm::DTensor;
using collabdm::RngStream;
using collabdm::Tensor;

/// Direct nested-loop cross-correlation.
template <typename S>
BasicTensor<S> conv2d_loops(const BasicTensor<S>& input,
                            const BasicTensor<S>& weights, int stride,
                            int pad) {
  const int n = input.dim(0), cin = input.dim(1);
  const int h = input.dim(2), w = input.dim(3);
  const int cout = weights.dim(0), k = weights.dim(2);
  const int oh = (h + 2 * pad - k) / stride + 1;
  const int ow = (w + 2 * pad - k) / stride + 1;
  BasicTensor<S> out({n, cout, oh, ow});
  for (int b = 0; b < n; ++b)
    for (int co = 0; co < cout; ++co)
      for (int oi = 0; oi < oh; ++oi)
        for (int oj = 0; oj < ow; ++oj) {
          double acc = 0;
          for (int ci = 0; ci < cin; ++ci)
            for (int ki = 0; ki < k; ++ki)
              for (int kj = 0; kj < k; ++kj) {
                const int si = oi * stride + ki - pad;
                const int sj = oj * stride + kj - pad;
                if (si >= 0 && si < h && sj >= 0 && sj < w)
                  acc += static_cast<double>(input.at(b, ci, si, sj)) *
                         weights.at(co, ci, ki, kj);
              }
          out.at(b, co, oi, oj) = static_cast<S>(acc);
        }
  return out;
}

/// Central finite differences of a scalar function of a tensor,
/// one derivative per input coordinate.
DTensor finite_diff(const std::function<double(const DTensor&)>& f,
                    const DTensor& x, double h = 1e-3);

/// Relative L2 error with an absolute floor for near-zero gradients.
double rel_error(const DTensor& analytic, const DTensor& numeric);

/// Checks backward() against finite differences of <forward(x), u> for a
/// random fixed upstream u. Returns the relative error.
double check_adjoint(
    const std::function<DTensor(const DTensor&)>& forward,
    const std::function<DTensor(const DTensor&, const DTensor&)>& backward,
    const DTensor& x, RngStream& rng, double h = 1e-3);

DTensor random_tensor(std::vector<int> shape, RngStream& rng,
                      double scale = 1.0);

/// Marsaglia-Tsang gamma; a from-scratch twin of the library sampler
/// driven by the same stream semantics.
double gamma_oracle(RngStream& rng, double alpha);
std::vector<double> dirichlet_oracle(RngStream& rng, double beta, int k);
std::vector<int> largest_remainder_oracle(const std::vector<double>& p,
                                          int total);

/// Seeded Fisher-Yates prefix, reimplemented.
std::vector<int> fisher_yates_prefix_oracle(RngStream rng, int n, int take);

/// Nearest-template classification rate: predicts the class whose template
/// has the smallest squared distance to the image.
double nearest_template_accuracy(const std::vector<Tensor>& templates,
                                 const Tensor& images,
                                 const std::vector<int>& labels);

/// Per-class templates estimated as per-class pixel means of a dataset.
std::vector<Tensor> class_mean_templates(const Tensor& images,
                                         const std::vector<int>& labels,
                                         int num_classes);

} // namespace oracles
