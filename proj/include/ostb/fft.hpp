#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace ostb {

using cdouble = std::complex<double>;

// In-place iterative radix-2 FFT. x.size() must be a power of two.
void fft_inplace(std::vector<cdouble>& x, bool inverse);

std::vector<cdouble> fft(std::vector<cdouble> x);

// Inverse transform scaled by 1/N.
std::vector<cdouble> ifft(std::vector<cdouble> x);

// O(n^2) reference DFT for arbitrary lengths; used by oracles and by the
// STFT when the window is not a power of two.
std::vector<cdouble> dft_naive(const std::vector<cdouble>& x, bool inverse);

std::size_t next_pow2(std::size_t n);
bool is_pow2(std::size_t n);

}  // namespace ostb
