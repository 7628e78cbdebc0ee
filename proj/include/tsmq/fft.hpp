#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace tsmq {

/// One-sided DFT of a real frame: n real samples in, n/2+1 complex bins out.
std::vector<std::complex<double>> rfft(const std::vector<double>& frame);

/// Inverse of rfft. Expects n/2+1 bins for an n-point transform; output is
/// the real time frame of length n (1/n normalization applied here).
std::vector<double> irfft(const std::vector<std::complex<double>>& bins, std::size_t n);

} // namespace tsmq
