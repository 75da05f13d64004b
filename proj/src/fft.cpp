#include "ostb/fft.hpp"

#include <cmath>

#include "ostb/errors.hpp"

namespace ostb {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

void fft_inplace(std::vector<cdouble>& x, bool inverse) {
    const std::size_t n = x.size();
    if (!is_pow2(n)) throw DataError("fft: length must be a power of two, got " + std::to_string(n));
    if (n == 1) return;

    // Bit-reversal permutation.
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
        const cdouble wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cdouble w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cdouble u = x[i + k];
                const cdouble v = x[i + k + len / 2] * w;
                x[i + k] = u + v;
                x[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }

    if (inverse) {
        const double inv_n = 1.0 / static_cast<double>(n);
        for (auto& v : x) v *= inv_n;
    }
}

std::vector<cdouble> fft(std::vector<cdouble> x) {
    fft_inplace(x, false);
    return x;
}

std::vector<cdouble> ifft(std::vector<cdouble> x) {
    fft_inplace(x, true);
    return x;
}

std::vector<cdouble> dft_naive(const std::vector<cdouble>& x, bool inverse) {
    const std::size_t n = x.size();
    std::vector<cdouble> out(n);
    const double sign = inverse ? 2.0 : -2.0;
    for (std::size_t k = 0; k < n; ++k) {
        cdouble acc(0.0, 0.0);
        for (std::size_t m = 0; m < n; ++m) {
            const double ang = sign * M_PI * static_cast<double>(k) * static_cast<double>(m) / static_cast<double>(n);
            acc += x[m] * cdouble(std::cos(ang), std::sin(ang));
        }
        out[k] = inverse ? acc / static_cast<double>(n) : acc;
    }
    return out;
}

}  // namespace ostb
