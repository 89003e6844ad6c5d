#include "muwarm/metrics.hpp"

#include <stdexcept>

namespace muwarm {

std::vector<double> gaussian_kernel(double sigma) {
  if (sigma < 0.0) throw std::invalid_argument("gaussian_kernel: sigma must be non-negative");
  if (sigma == 0.0) return {1.0};
  const auto radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = w;
    total += w;
  }
  for (double& w : k) w /= total;
  return k;
}

namespace {

// Half-sample symmetric reflection: ... b a | a b c | c b ...
std::size_t reflect(long i, long n) {
  const long period = 2 * n;
  long r = i % period;
  if (r < 0) r += period;
  return static_cast<std::size_t>(r < n ? r : period - 1 - r);
}

}  // namespace

SmoothedSeries gaussian_smooth(std::vector<double> steps, std::vector<double> values, double sigma) {
  if (steps.size() != values.size()) throw std::invalid_argument("gaussian_smooth: steps and values differ in length");
  SmoothedSeries s{std::move(steps), std::move(values), sigma, gaussian_kernel(sigma), {}};
  const long n = static_cast<long>(s.raw.size());
  const long radius = static_cast<long>(s.kernel.size() / 2);
  s.smoothed.assign(s.raw.size(), 0.0);
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    for (long k = -radius; k <= radius; ++k) acc += s.kernel[static_cast<std::size_t>(k + radius)] * s.raw[reflect(i + k, n)];
    s.smoothed[static_cast<std::size_t>(i)] = acc;
  }
  return s;
}

double default_smoothing_sigma(std::size_t n) { return 0.02 * static_cast<double>(n); }

double fit_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_slope: need at least two paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_slope: x values are all equal");
  return sxy / sxx;
}

}  // namespace muwarm
