#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace projlab::detail {

// Unnormalized in-place 3D DFT of an n³ array; sign −1 forward, +1 backward.
void fft3_inplace(std::vector<std::complex<double>>& data, std::size_t n, int sign);

}  // namespace projlab::detail
