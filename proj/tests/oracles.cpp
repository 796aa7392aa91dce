#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oracles {

DTensor finite_diff(const std::function<double(const DTensor&)>& f,
                    const DTensor& x, double h) {
  DTensor grad(x.shape());
  DTensor probe = x;
  for (int64_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    probe[i] = v + h;
    const double up = f(probe);
    probe[i] = v - h;
    const double down = f(probe);
    probe[i] = v;
    grad[i] = (up - down) / (2 * h);
  }
  return grad;
}

double rel_error(const DTensor& analytic, const DTensor& numeric) {
  double diff = 0, ref = 0;
  for (int64_t i = 0; i < analytic.size(); ++i) {
    const double d = analytic[i] - numeric[i];
    diff += d * d;
    ref += numeric[i] * numeric[i];
  }
  diff = std::sqrt(diff);
  ref = std::sqrt(ref);
  if (ref < 1e-10) {
    return diff; // both (near) zero: report the absolute residual
  }
  return diff / ref;
}

double check_adjoint(
    const std::function<DTensor(const DTensor&)>& forward,
    const std::function<DTensor(const DTensor&, const DTensor&)>& backward,
    const DTensor& x, RngStream& rng, double h) {
  const DTensor y0 = forward(x);
  DTensor upstream(y0.shape());
  for (int64_t i = 0; i < upstream.size(); ++i) {
    upstream[i] = rng.next_gaussian();
  }
  const DTensor analytic = backward(x, upstream);
  const auto scalar = [&](const DTensor& probe) {
    const DTensor y = forward(probe);
    double acc = 0;
    for (int64_t i = 0; i < y.size(); ++i) {
      acc += y[i] * upstream[i];
    }
    return acc;
  };
  const DTensor numeric = finite_diff(scalar, x, h);
  return rel_error(analytic, numeric);
}

DTensor random_tensor(std::vector<int> shape, RngStream& rng, double scale) {
  DTensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) {
    t[i] = rng.next_gaussian() * scale;
  }
  return t;
}

double gamma_oracle(RngStream& rng, double alpha) {
  if (alpha < 1.0) {
    const double u = 1.0 - rng.next_double();
    return gamma_oracle(rng, alpha + 1.0) * std::pow(u, 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.next_gaussian();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = 1.0 - rng.next_double();
    if (u < 1.0 - 0.0331 * x * x * x * x) {
      return d * v;
    }
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
      return d * v;
    }
  }
}

std::vector<double> dirichlet_oracle(RngStream& rng, double beta, int k) {
  std::vector<double> p(static_cast<size_t>(k));
  double sum = 0;
  for (auto& v : p) {
    v = gamma_oracle(rng, beta);
    sum += v;
  }
  if (sum <= 0) {
    const size_t j =
        static_cast<size_t>(rng.next_below(static_cast<uint64_t>(k)));
    std::fill(p.begin(), p.end(), 0.0);
    p[j] = 1.0;
    return p;
  }
  for (auto& v : p) {
    v /= sum;
  }
  return p;
}

std::vector<int> largest_remainder_oracle(const std::vector<double>& p,
                                          int total) {
  const size_t k = p.size();
  std::vector<int> counts(k);
  std::vector<std::pair<double, size_t>> rem(k);
  int assigned = 0;
  for (size_t i = 0; i < k; ++i) {
    const double exact = p[i] * total;
    counts[i] = static_cast<int>(std::floor(exact));
    rem[i] = {exact - counts[i], i};
    assigned += counts[i];
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) {
                     return a.first > b.first;
                   });
  for (int i = 0; i < total - assigned; ++i) {
    ++counts[rem[static_cast<size_t>(i)].second];
  }
  return counts;
}

std::vector<int> fisher_yates_prefix_oracle(RngStream rng, int n, int take) {
  std::vector<int> ids(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    ids[static_cast<size_t>(i)] = i;
  }
  for (int i = 0; i < take; ++i) {
    const int j =
        i + static_cast<int>(rng.next_below(static_cast<uint64_t>(n - i)));
    std::swap(ids[static_cast<size_t>(i)], ids[static_cast<size_t>(j)]);
  }
  ids.resize(static_cast<size_t>(take));
  std::sort(ids.begin(), ids.end());
  return ids;
}

double nearest_template_accuracy(const std::vector<Tensor>& templates,
                                 const Tensor& images,
                                 const std::vector<int>& labels) {
  const int n = images.dim(0);
  const int64_t stride = images.size() / std::max(n, 1);
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (size_t y = 0; y < templates.size(); ++y) {
      double dist = 0;
      for (int64_t j = 0; j < stride; ++j) {
        const double d = images[i * stride + j] - templates[y][j];
        dist += d * d;
      }
      if (dist < best_dist) {
        best_dist = dist;
        best = static_cast<int>(y);
      }
    }
    if (best == labels[static_cast<size_t>(i)]) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / std::max(n, 1);
}

std::vector<Tensor> class_mean_templates(const Tensor& images,
                                         const std::vector<int>& labels,
                                         int num_classes) {
  const int n = images.dim(0);
  const int64_t stride = images.size() / std::max(n, 1);
  std::vector<std::vector<double>> acc(
      static_cast<size_t>(num_classes),
      std::vector<double>(static_cast<size_t>(stride), 0.0));
  std::vector<int> counts(static_cast<size_t>(num_classes), 0);
  for (int i = 0; i < n; ++i) {
    const auto y = static_cast<size_t>(labels[static_cast<size_t>(i)]);
    ++counts[y];
    for (int64_t j = 0; j < stride; ++j) {
      acc[y][static_cast<size_t>(j)] += images[i * stride + j];
    }
  }
  std::vector<Tensor> templates;
  for (size_t y = 0; y < acc.size(); ++y) {
    Tensor t({1, images.dim(1), images.dim(2), images.dim(3)});
    for (int64_t j = 0; j < stride; ++j) {
      t[j] = static_cast<float>(acc[y][static_cast<size_t>(j)] /
                                std::max(counts[y], 1));
    }
    templates.push_back(std::move(t));
  }
  return templates;
}

} // namespace oracles
