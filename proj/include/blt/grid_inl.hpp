#pragma once

namespace blt {

template <class Fn>
std::vector<cplx> apply_multiplier(const std::vector<cplx>& f, const SpectralGrid& g, Fn&& m) {
  auto fh = fft_forward(f);
  for (int k = 0; k < g.N; ++k) {
    cplx mk = m(g.xi(k));
    if (g.is_nyquist(k)) mk = mk.real();
    fh[k] *= mk;
  }
  return fft_backward(fh);
}

}  // namespace blt
