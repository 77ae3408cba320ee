#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace usee {

using cplx = std::complex<double>;

namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// iterative radix-2 Cooley-Tukey, in place
inline void fft_inplace(std::vector<cplx>& a, bool inverse) {
  const std::size_t n = a.size();
  if (!is_pow2(n)) throw std::invalid_argument("fft: size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double pi = 3.14159265358979323846264338327950288;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    cplx wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        cplx u = a[i + k];
        cplx v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    double inv = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv;
  }
}

}  // namespace detail

inline std::vector<cplx> fft(std::vector<cplx> a) {
  detail::fft_inplace(a, false);
  return a;
}

inline std::vector<cplx> ifft(std::vector<cplx> a) {
  detail::fft_inplace(a, true);
  return a;
}

// real input, returns the n/2+1 non-redundant bins
inline std::vector<cplx> rfft(const std::vector<double>& x, std::size_t n) {
  std::vector<cplx> a(n, cplx{});
  const std::size_t m = std::min(x.size(), n);
  for (std::size_t i = 0; i < m; ++i) a[i] = cplx(x[i], 0.0);
  detail::fft_inplace(a, false);
  a.resize(n / 2 + 1);
  return a;
}

// inverse of rfft, reconstructs the length-n real signal
inline std::vector<double> irfft(const std::vector<cplx>& bins, std::size_t n) {
  if (bins.size() != n / 2 + 1) throw std::invalid_argument("irfft: bin count mismatch");
  std::vector<cplx> a(n);
  for (std::size_t k = 0; k <= n / 2; ++k) a[k] = bins[k];
  for (std::size_t k = n / 2 + 1; k < n; ++k) a[k] = std::conj(bins[n - k]);
  detail::fft_inplace(a, true);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i].real();
  return out;
}

// linear convolution via zero-padded FFT, length a+b-1
inline std::vector<double> fft_convolve(const std::vector<double>& a,
                                        const std::vector<double>& b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t out_len = a.size() + b.size() - 1;
  std::size_t n = 1;
  while (n < out_len) n <<= 1;
  auto fa = rfft(a, n);
  auto fb = rfft(b, n);
  for (std::size_t i = 0; i < fa.size(); ++i) fa[i] *= fb[i];
  auto full = irfft(fa, n);
  full.resize(out_len);
  return full;
}

}  // namespace usee
