#pragma once

// Serial reference kernels, written as plainly as possible and kept
// independent of the parallel implementations in kernels.hpp. Used by unit
// tests as ground truth and by the benchmark as the comparison baseline.

#include <cstdint>

#include "odom/kernels.hpp"

namespace odom::nn::reference {

// Direct convolution, six nested loops, zero padding handled per element.
template <class T>
void conv2d_forward(const T* x, int C, int H, int W, const ConvDims& cd,
                    const T* w, const T* b, T* y) {
    const int OH = conv_out_dim(H, cd.kh, cd.sh, cd.ph);
    const int OW = conv_out_dim(W, cd.kw, cd.sw, cd.pw);
    for (int oc = 0; oc < cd.out_c; ++oc) {
        for (int oh = 0; oh < OH; ++oh) {
            for (int ow = 0; ow < OW; ++ow) {
                T acc = b[oc];
                for (int ic = 0; ic < C; ++ic) {
                    for (int kh = 0; kh < cd.kh; ++kh) {
                        for (int kw = 0; kw < cd.kw; ++kw) {
                            const int ih = oh * cd.sh - cd.ph + kh;
                            const int iw = ow * cd.sw - cd.pw + kw;
                            if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                            acc += w[((static_cast<size_t>(oc) * C + ic) * cd.kh + kh) * cd.kw + kw] *
                                   x[(static_cast<size_t>(ic) * H + ih) * W + iw];
                        }
                    }
                }
                y[(static_cast<size_t>(oc) * OH + oh) * OW + ow] = acc;
            }
        }
    }
}

// Scatter-form backward: walks output positions and pushes contributions to
// weights and input, the opposite scheme of the production gather kernels.
template <class T>
void conv2d_backward(const T* x, int C, int H, int W, const ConvDims& cd,
                     const T* w, const T* gy, T* gw, T* gb, T* gx) {
    const int OH = conv_out_dim(H, cd.kh, cd.sh, cd.ph);
    const int OW = conv_out_dim(W, cd.kw, cd.sw, cd.pw);
    for (int oc = 0; oc < cd.out_c; ++oc) {
        for (int oh = 0; oh < OH; ++oh) {
            for (int ow = 0; ow < OW; ++ow) {
                const T g = gy[(static_cast<size_t>(oc) * OH + oh) * OW + ow];
                gb[oc] += g;
                for (int ic = 0; ic < C; ++ic) {
                    for (int kh = 0; kh < cd.kh; ++kh) {
                        for (int kw = 0; kw < cd.kw; ++kw) {
                            const int ih = oh * cd.sh - cd.ph + kh;
                            const int iw = ow * cd.sw - cd.pw + kw;
                            if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                            const size_t wi = ((static_cast<size_t>(oc) * C + ic) * cd.kh + kh) * cd.kw + kw;
                            const size_t xi = (static_cast<size_t>(ic) * H + ih) * W + iw;
                            gw[wi] += g * x[xi];
                            gx[xi] += g * w[wi];
                        }
                    }
                }
            }
        }
    }
}

template <class T>
void maxpool_forward(const T* x, int C, int H, int W, T* y) {
    const int OH = (H - 2) / 2 + 1;
    const int OW = (W - 2) / 2 + 1;
    for (int c = 0; c < C; ++c) {
        for (int oh = 0; oh < OH; ++oh) {
            for (int ow = 0; ow < OW; ++ow) {
                T best = x[(static_cast<size_t>(c) * H + oh * 2) * W + ow * 2];
                for (int kh = 0; kh < 2; ++kh) {
                    for (int kw = 0; kw < 2; ++kw) {
                        const T v = x[(static_cast<size_t>(c) * H + oh * 2 + kh) * W + ow * 2 + kw];
                        if (v > best) best = v;
                    }
                }
                y[(static_cast<size_t>(c) * OH + oh) * OW + ow] = best;
            }
        }
    }
}

template <class T>
void fc_forward(const T* x, int in, int out, const T* w, const T* b, T* y) {
    for (int o = 0; o < out; ++o) {
        T acc = b[o];
        for (int i = 0; i < in; ++i) acc += w[static_cast<size_t>(o) * in + i] * x[i];
        y[o] = acc;
    }
}

}  // namespace odom::nn::reference
