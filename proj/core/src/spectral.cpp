#include "hypermml/spectral.hpp"

#include "hypermml/errors.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <unordered_map>

namespace hypermml::spectral {

namespace {

using cd = std::complex<double>;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Precomputed tables for one transform length.
struct FftPlan {
  std::size_t n = 0;
  // radix-2 path
  std::vector<std::size_t> bitrev;
  std::vector<cd> twiddle;  // exp(-2*pi*i*k/n), k < n/2
  // Bluestein path
  std::size_t m = 0;
  std::vector<cd> chirp;            // exp(-pi*i*k^2/n)
  std::vector<cd> kernel_spectrum;  // FFT_m of conj(chirp), wrapped
  std::shared_ptr<const FftPlan> inner;
};

void radix2(std::vector<cd>& a, const FftPlan& plan, bool inverse) {
  const std::size_t n = plan.n;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < plan.bitrev[i]) std::swap(a[i], a[plan.bitrev[i]]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        cd w = plan.twiddle[k * stride];
        if (inverse) w = std::conj(w);
        const cd u = a[i + k];
        const cd v = a[i + k + half] * w;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

std::shared_ptr<const FftPlan> make_plan(std::size_t n);

std::shared_ptr<const FftPlan> get_plan(std::size_t n) {
  thread_local std::unordered_map<std::size_t, std::shared_ptr<const FftPlan>> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  auto plan = make_plan(n);
  cache.emplace(n, plan);
  return plan;
}

void execute(std::vector<cd>& a, const FftPlan& plan, bool inverse) {
  const std::size_t n = plan.n;
  if (n <= 1) return;
  if (!plan.bitrev.empty()) {
    radix2(a, plan, inverse);
    return;
  }
  // Bluestein: X_k = c_k * sum_j (x_j c_j) conj(c_{k-j}). The inverse is
  // conj(forward(conj(x))).
  std::vector<cd> buf(plan.m, cd{0.0, 0.0});
  for (std::size_t j = 0; j < n; ++j) {
    const cd x = inverse ? std::conj(a[j]) : a[j];
    buf[j] = x * plan.chirp[j];
  }
  radix2(buf, *plan.inner, false);
  for (std::size_t k = 0; k < plan.m; ++k) buf[k] *= plan.kernel_spectrum[k];
  radix2(buf, *plan.inner, true);
  const double inv_m = 1.0 / static_cast<double>(plan.m);
  for (std::size_t k = 0; k < n; ++k) {
    const cd y = buf[k] * inv_m * plan.chirp[k];
    a[k] = inverse ? std::conj(y) : y;
  }
}

std::shared_ptr<const FftPlan> make_plan(std::size_t n) {
  auto plan = std::make_shared<FftPlan>();
  plan->n = n;
  if (n <= 1) return plan;
  if (is_pow2(n)) {
    plan->bitrev.resize(n);
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b) {
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      }
      plan->bitrev[i] = r;
    }
    plan->twiddle.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      plan->twiddle[k] = cd{std::cos(ang), std::sin(ang)};
    }
    return plan;
  }
  plan->m = next_pow2(2 * n - 1);
  plan->inner = get_plan(plan->m);
  plan->chirp.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle small for long transforms.
    const std::size_t k2 = (k * k) % (2 * n);
    const double ang = -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
    plan->chirp[k] = cd{std::cos(ang), std::sin(ang)};
  }
  std::vector<cd> kernel(plan->m, cd{0.0, 0.0});
  kernel[0] = std::conj(plan->chirp[0]);
  for (std::size_t k = 1; k < n; ++k) {
    kernel[k] = std::conj(plan->chirp[k]);
    kernel[plan->m - k] = std::conj(plan->chirp[k]);
  }
  radix2(kernel, *plan->inner, false);
  plan->kernel_spectrum = std::move(kernel);
  return plan;
}

void check_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite input");
}

}  // namespace

std::string_view band_name(Band b) {
  switch (b) {
    case Band::delta: return "delta";
    case Band::theta: return "theta";
    case Band::alpha: return "alpha";
    case Band::beta: return "beta";
    case Band::gamma: return "gamma";
  }
  return "unknown";
}

BandEdges default_band_edges() {
  return {BandEdge{0.5, 4.0}, BandEdge{4.0, 8.0}, BandEdge{8.0, 13.0}, BandEdge{13.0, 30.0},
          BandEdge{30.0, 50.0}};
}

void fft_inplace(std::vector<std::complex<double>>& data, bool inverse) {
  auto plan = get_plan(data.size());
  execute(data, *plan, inverse);
}

std::vector<double> frequency_axis(Eigen::Index source_len, double rate_hz) {
  const Eigen::Index F = source_len / 2 + 1;
  std::vector<double> axis(static_cast<std::size_t>(F));
  for (Eigen::Index k = 0; k < F; ++k) {
    axis[static_cast<std::size_t>(k)] = static_cast<double>(k) * rate_hz / static_cast<double>(source_len);
  }
  return axis;
}

CMat rfft_rows(const Mat& signal) {
  const Eigen::Index C = signal.rows();
  const Eigen::Index L = signal.cols();
  const Eigen::Index F = L / 2 + 1;
  CMat out(C, F);
  const auto plan = get_plan(static_cast<std::size_t>(L));
  std::vector<cd> buf(static_cast<std::size_t>(L));
  // Two real rows share one complex transform: z = x + i*y.
  for (Eigen::Index c = 0; c < C; c += 2) {
    const bool pair = c + 1 < C;
    for (Eigen::Index t = 0; t < L; ++t) {
      buf[static_cast<std::size_t>(t)] = cd{signal(c, t), pair ? signal(c + 1, t) : 0.0};
    }
    execute(buf, *plan, false);
    for (Eigen::Index k = 0; k < F; ++k) {
      const cd zk = buf[static_cast<std::size_t>(k)];
      const cd znk = std::conj(buf[static_cast<std::size_t>((L - k) % L)]);
      out(c, k) = 0.5 * (zk + znk);
      if (pair) out(c + 1, k) = cd{0.0, -0.5} * (zk - znk);
    }
  }
  return out;
}

Mat irfft_rows(const CMat& coeffs, Eigen::Index source_len) {
  const Eigen::Index C = coeffs.rows();
  const Eigen::Index L = source_len;
  const Eigen::Index F = L / 2 + 1;
  if (coeffs.cols() != F) {
    throw ShapeError("inverse_fft: " + std::to_string(coeffs.cols()) + " bins inconsistent with length " +
                     std::to_string(L));
  }
  Mat out(C, L);
  const auto plan = get_plan(static_cast<std::size_t>(L));
  std::vector<cd> buf(static_cast<std::size_t>(L));
  const double inv_l = 1.0 / static_cast<double>(L);
  auto hermitian = [&](Eigen::Index c, Eigen::Index k) -> cd {
    // Full-length spectrum value at bin k from the one-sided half.
    if (k < F) {
      cd v = coeffs(c, k);
      if (k == 0 || (L % 2 == 0 && k == L / 2)) v = cd{v.real(), 0.0};
      return v;
    }
    return std::conj(coeffs(c, L - k));
  };
  for (Eigen::Index c = 0; c < C; c += 2) {
    const bool pair = c + 1 < C;
    for (Eigen::Index k = 0; k < L; ++k) {
      const cd x = hermitian(c, k);
      const cd y = pair ? hermitian(c + 1, k) : cd{0.0, 0.0};
      buf[static_cast<std::size_t>(k)] = x + cd{0.0, 1.0} * y;
    }
    execute(buf, *plan, true);
    for (Eigen::Index t = 0; t < L; ++t) {
      out(c, t) = buf[static_cast<std::size_t>(t)].real() * inv_l;
      if (pair) out(c + 1, t) = buf[static_cast<std::size_t>(t)].imag() * inv_l;
    }
  }
  return out;
}

Spectrum forward_fft(const Mat& signal, double rate_hz) {
  if (signal.cols() < 2) throw ArgumentError("forward_fft: signal length must be >= 2");
  if (!(rate_hz > 0.0)) throw ArgumentError("forward_fft: sampling rate must be positive");
  check_finite(signal, "forward_fft");
  Spectrum s;
  s.coeffs = rfft_rows(signal);
  s.freq_axis = frequency_axis(signal.cols(), rate_hz);
  s.source_len = signal.cols();
  return s;
}

std::vector<Spectrum> forward_fft(std::span<const Mat> batch, double rate_hz) {
  std::vector<Spectrum> out;
  out.reserve(batch.size());
  for (const auto& m : batch) out.push_back(forward_fft(m, rate_hz));
  return out;
}

Mat inverse_fft(const Spectrum& spectrum) {
  if (!spectrum.freq_axis.empty() &&
      static_cast<Eigen::Index>(spectrum.freq_axis.size()) != spectrum.coeffs.cols()) {
    throw ShapeError("inverse_fft: frequency axis length does not match coefficients");
  }
  return irfft_rows(spectrum.coeffs, spectrum.source_len);
}

BandMaskSet band_masks(std::span<const double> freq_axis, const BandEdges& edges) {
  for (const auto& e : edges) {
    if (!(e.low_hz < e.high_hz) || e.low_hz < 0.0) throw ArgumentError("band_masks: invalid band edge");
  }
  std::array<std::size_t, kNumBands> order{};
  for (std::size_t i = 0; i < kNumBands; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return edges[a].low_hz < edges[b].low_hz; });
  for (std::size_t i = 0; i + 1 < kNumBands; ++i) {
    if (edges[order[i]].high_hz > edges[order[i + 1]].low_hz) {
      throw ArgumentError("band_masks: overlapping band edges");
    }
  }
  const std::size_t top = order.back();

  BandMaskSet set;
  set.edges = edges;
  for (std::size_t b = 0; b < kNumBands; ++b) {
    auto& mask = set.masks[b];
    mask.assign(freq_axis.size(), 0.0);
    for (std::size_t k = 0; k < freq_axis.size(); ++k) {
      const double f = freq_axis[k];
      const bool in = f >= edges[b].low_hz && (f < edges[b].high_hz || (b == top && f == edges[b].high_hz));
      if (in) mask[k] = 1.0;
    }
  }
  return set;
}

CMat apply_mask(const CMat& coeffs, std::span<const double> mask) {
  if (static_cast<Eigen::Index>(mask.size()) != coeffs.cols()) throw ShapeError("apply_mask: mask length");
  CMat out = coeffs;
  for (Eigen::Index k = 0; k < out.cols(); ++k) out.col(k) *= mask[static_cast<std::size_t>(k)];
  return out;
}

Vec differential_entropy(const Mat& banded_signal, double eps) {
  const double two_pi_e = 2.0 * std::numbers::pi * std::numbers::e;
  Vec de(banded_signal.rows());
  const double n = static_cast<double>(banded_signal.cols());
  for (Eigen::Index c = 0; c < banded_signal.rows(); ++c) {
    const double mean = banded_signal.row(c).sum() / n;
    const double var = (banded_signal.row(c).array() - mean).square().sum() / n;
    de(c) = 0.5 * std::log(two_pi_e * std::max(var, eps));
  }
  return de;
}

Vec power_spectral_density(const CMat& banded_spectrum) {
  const double F = static_cast<double>(banded_spectrum.cols());
  Vec psd(banded_spectrum.rows());
  for (Eigen::Index c = 0; c < banded_spectrum.rows(); ++c) {
    psd(c) = banded_spectrum.row(c).cwiseAbs2().sum() / F;
  }
  return psd;
}

std::array<BandFeatures, kNumBands> extract_band_features(const Mat& signal, double rate_hz,
                                                          const BandEdges& edges) {
  const Spectrum spec = forward_fft(signal, rate_hz);
  const BandMaskSet masks = band_masks(spec.freq_axis, edges);
  std::array<BandFeatures, kNumBands> out;
  for (std::size_t b = 0; b < kNumBands; ++b) {
    BandFeatures& f = out[b];
    f.band = kBands[b];
    f.banded_spectrum = apply_mask(spec.coeffs, masks.masks[b]);
    f.psd = power_spectral_density(f.banded_spectrum);
    f.de = differential_entropy(irfft_rows(f.banded_spectrum, spec.source_len));
  }
  return out;
}

}  // namespace hypermml::spectral

namespace hypermml::ag {

namespace {

Mat filter_rows(const Mat& x, std::span<const double> mask) {
  return spectral::irfft_rows(spectral::apply_mask(spectral::rfft_rows(x), mask), x.cols());
}

void check_mask(const Var& x, std::span<const double> mask, const char* op) {
  if (static_cast<Eigen::Index>(mask.size()) != x.cols() / 2 + 1) {
    throw ShapeError(std::string(op) + ": mask length does not match signal length");
  }
}

}  // namespace

Var band_filter(const Var& x, std::span<const double> mask) {
  check_mask(x, mask, "band_filter");
  std::vector<double> m(mask.begin(), mask.end());
  Mat out = filter_rows(x.value(), m);
  return make_op(std::move(out), {x}, [m = std::move(m)](Node& o) {
    o.parents[0]->accumulate(filter_rows(o.grad, m));
  });
}

Var band_psd(const Var& x, std::span<const double> mask) {
  check_mask(x, mask, "band_psd");
  std::vector<double> m(mask.begin(), mask.end());
  CMat coeffs = spectral::apply_mask(spectral::rfft_rows(x.value()), m);
  Mat out = spectral::power_spectral_density(coeffs);
  return make_op(std::move(out), {x}, [coeffs = std::move(coeffs)](Node& o) {
    // d/dx_t of sum_f |X_f|^2 is Re sum_f 2 X_f e^{+2 pi i f t / L}: the
    // adjoint of the one-sided transform applied to 2 X_f.
    const Eigen::Index L = o.parents[0]->value.cols();
    const Eigen::Index F = coeffs.cols();
    const double scale = 2.0 / static_cast<double>(F);
    Mat g(coeffs.rows(), L);
    std::vector<std::complex<double>> buf(static_cast<std::size_t>(L));
    for (Eigen::Index c = 0; c < coeffs.rows(); ++c) {
      std::fill(buf.begin(), buf.end(), std::complex<double>{0.0, 0.0});
      for (Eigen::Index k = 0; k < F; ++k) buf[static_cast<std::size_t>(k)] = coeffs(c, k) * (scale * o.grad(c, 0));
      spectral::fft_inplace(buf, true);
      for (Eigen::Index t = 0; t < L; ++t) g(c, t) = buf[static_cast<std::size_t>(t)].real();
    }
    o.parents[0]->accumulate(g);
  });
}

Var differential_entropy(const Var& x, double eps) {
  const Mat& v = x.value();
  const double n = static_cast<double>(v.cols());
  const double two_pi_e = 2.0 * std::numbers::pi * std::numbers::e;
  Mat out(v.rows(), 1);
  Vec var(v.rows());
  Vec mean(v.rows());
  for (Eigen::Index c = 0; c < v.rows(); ++c) {
    mean(c) = v.row(c).sum() / n;
    var(c) = (v.row(c).array() - mean(c)).square().sum() / n;
    out(c, 0) = 0.5 * std::log(two_pi_e * std::max(var(c), eps));
  }
  return make_op(std::move(out), {x}, [var, mean, eps, n](Node& o) {
    const Mat& xv = o.parents[0]->value;
    Mat g = Mat::Zero(xv.rows(), xv.cols());
    for (Eigen::Index c = 0; c < xv.rows(); ++c) {
      if (var(c) <= eps) continue;
      // dDE/dvar = 1/(2 var); dvar/dx_t = 2 (x_t - mean) / n
      const double k = o.grad(c, 0) / (var(c) * n);
      g.row(c) = ((xv.row(c).array() - mean(c)) * k).matrix();
    }
    o.parents[0]->accumulate(g);
  });
}

}  // namespace hypermml::ag
