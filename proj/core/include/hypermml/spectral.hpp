#pragma once

// Frequency-domain toolkit: one-sided real FFT and its inverse, EEG band
// masks, differential entropy and power spectral density. The ag:: overloads
// at the bottom are the differentiable versions used inside the encoder.

#include "hypermml/autograd.hpp"
#include "hypermml/tensor.hpp"

#include <array>
#include <complex>
#include <span>
#include <string_view>
#include <vector>

namespace hypermml::spectral {

enum class Band { delta = 0, theta, alpha, beta, gamma };
inline constexpr std::size_t kNumBands = 5;
inline constexpr std::array<Band, kNumBands> kBands = {Band::delta, Band::theta, Band::alpha, Band::beta,
                                                        Band::gamma};
std::string_view band_name(Band b);

struct BandEdge {
  double low_hz;
  double high_hz;
};
using BandEdges = std::array<BandEdge, kNumBands>;

// delta 0.5-4, theta 4-8, alpha 8-13, beta 13-30, gamma 30-50 Hz.
BandEdges default_band_edges();

inline constexpr double kVarianceFloor = 1e-8;

// Unnormalized complex DFT in place: sign -1 forward, +1 for inverse.
void fft_inplace(std::vector<std::complex<double>>& data, bool inverse);

// F = floor(L/2)+1 bin centres k*rate/L.
std::vector<double> frequency_axis(Eigen::Index source_len, double rate_hz);

struct Spectrum {
  CMat coeffs;                    // C x F
  std::vector<double> freq_axis;  // F, Hz
  Eigen::Index source_len = 0;    // L
};

// One-sided transform of every row of a C x L signal.
Spectrum forward_fft(const Mat& signal, double rate_hz);
std::vector<Spectrum> forward_fft(std::span<const Mat> batch, double rate_hz);

// Real reconstruction of length source_len from one-sided coefficients.
Mat inverse_fft(const Spectrum& spectrum);

// Low-level row transforms used by the ops below.
CMat rfft_rows(const Mat& signal);
Mat irfft_rows(const CMat& coeffs, Eigen::Index source_len);

struct BandMaskSet {
  std::array<std::vector<double>, kNumBands> masks;  // 0/1 per bin
  BandEdges edges;

  const std::vector<double>& operator[](Band b) const { return masks[static_cast<std::size_t>(b)]; }
};

// [low, high) per band; the highest band is closed at its upper edge.
// Throws ArgumentError on inverted or overlapping edges.
BandMaskSet band_masks(std::span<const double> freq_axis, const BandEdges& edges = default_band_edges());

CMat apply_mask(const CMat& coeffs, std::span<const double> mask);

// 0.5 * ln(2*pi*e*max(var, eps)) per row, population variance over time.
Vec differential_entropy(const Mat& banded_signal, double eps = kVarianceFloor);

// (1/F) * sum_f |coeffs(c, f)|^2 per row.
Vec power_spectral_density(const CMat& banded_spectrum);

struct BandFeatures {
  Band band;
  Vec de;
  Vec psd;
  CMat banded_spectrum;
};

// DE from the band-limited time signal (inverse transform of the masked
// spectrum); PSD from the masked spectrum.
std::array<BandFeatures, kNumBands> extract_band_features(const Mat& signal, double rate_hz,
                                                          const BandEdges& edges = default_band_edges());

}  // namespace hypermml::spectral

namespace hypermml::ag {

// irfft(mask * rfft(x)) per row. Self-adjoint, so the backward pass reuses it.
Var band_filter(const Var& x, std::span<const double> mask);

// (1/F) * sum_f mask_f |rfft(x)_f|^2 per row; returns rows x 1.
Var band_psd(const Var& x, std::span<const double> mask);

// Differential entropy per row of a time-domain signal; returns rows x 1.
Var differential_entropy(const Var& x, double eps = spectral::kVarianceFloor);

}  // namespace hypermml::ag
