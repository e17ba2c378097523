#pragma once

// Data-parallel layer kernels. Every output element is produced by exactly
// one loop iteration with a fixed serial accumulation order, so results are
// identical for any thread count. Gradient kernels accumulate (+=) into the
// caller's buffers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace odom::nn {

inline int hardware_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

struct ConvDims {
    int in_c = 0, out_c = 0;
    int kh = 1, kw = 1;
    int sh = 1, sw = 1;
    int ph = 0, pw = 0;
};

inline int conv_out_dim(int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }

template <class T>
void conv2d_forward(const T* x, int C, int H, int W, const ConvDims& cd,
                    const T* w, const T* b, T* y) {
    const int OH = conv_out_dim(H, cd.kh, cd.sh, cd.ph);
    const int OW = conv_out_dim(W, cd.kw, cd.sw, cd.pw);
    const long long work = static_cast<long long>(cd.out_c) * OH * OW * C * cd.kh * cd.kw;
    if (cd.sw == 1) {
#pragma omp parallel for collapse(2) schedule(static) if (work > 65536)
        for (int oc = 0; oc < cd.out_c; ++oc) {
            for (int oh = 0; oh < OH; ++oh) {
                T* yrow = y + (static_cast<size_t>(oc) * OH + oh) * OW;
                for (int ow = 0; ow < OW; ++ow) yrow[ow] = b[oc];
                for (int ic = 0; ic < C; ++ic) {
                    for (int kh = 0; kh < cd.kh; ++kh) {
                        const int ih = oh * cd.sh - cd.ph + kh;
                        if (ih < 0 || ih >= H) continue;
                        const T* xrow = x + (static_cast<size_t>(ic) * H + ih) * W;
                        const T* wrow = w + ((static_cast<size_t>(oc) * C + ic) * cd.kh + kh) * cd.kw;
                        for (int kw = 0; kw < cd.kw; ++kw) {
                            const T wv = wrow[kw];
                            const int iw0 = kw - cd.pw;
                            const int lo = std::max(0, -iw0);
                            const int hi = std::min(OW, W - iw0);
                            const T* xs = xrow + iw0;
                            for (int ow = lo; ow < hi; ++ow) yrow[ow] += wv * xs[ow];
                        }
                    }
                }
            }
        }
        return;
    }
    // Strided path: gather each input row into sw contiguous phase arrays so
    // every kernel tap becomes a contiguous multiply-add over the output row.
    const int shifts = (cd.kw - 1) / cd.sw;
    const int phase_len = OW + shifts + 1;
#pragma omp parallel for schedule(static) if (work > 65536)
    for (int oh = 0; oh < OH; ++oh) {
        std::vector<T> phases(static_cast<size_t>(cd.sw) * phase_len);
        for (int oc = 0; oc < cd.out_c; ++oc) {
            T* yrow = y + (static_cast<size_t>(oc) * OH + oh) * OW;
            for (int ow = 0; ow < OW; ++ow) yrow[ow] = b[oc];
        }
        for (int ic = 0; ic < C; ++ic) {
            for (int kh = 0; kh < cd.kh; ++kh) {
                const int ih = oh * cd.sh - cd.ph + kh;
                if (ih < 0 || ih >= H) continue;
                const T* xrow = x + (static_cast<size_t>(ic) * H + ih) * W;
                for (int ph = 0; ph < cd.sw; ++ph) {
                    T* s = phases.data() + static_cast<size_t>(ph) * phase_len;
                    for (int m = 0; m < phase_len; ++m) {
                        const int iw = m * cd.sw + ph - cd.pw;
                        s[m] = (iw >= 0 && iw < W) ? xrow[iw] : T(0);
                    }
                }
                for (int oc = 0; oc < cd.out_c; ++oc) {
                    const T* wrow = w + ((static_cast<size_t>(oc) * C + ic) * cd.kh + kh) * cd.kw;
                    T* yrow = y + (static_cast<size_t>(oc) * OH + oh) * OW;
                    for (int kw = 0; kw < cd.kw; ++kw) {
                        const T wv = wrow[kw];
                        const T* s = phases.data() + static_cast<size_t>(kw % cd.sw) * phase_len +
                                     kw / cd.sw;
                        for (int ow = 0; ow < OW; ++ow) yrow[ow] += wv * s[ow];
                    }
                }
            }
        }
    }
}

template <class T>
void conv2d_backward_params(const T* x, int C, int H, int W, const ConvDims& cd,
                            const T* gy, T* gw, T* gb) {
    const int OH = conv_out_dim(H, cd.kh, cd.sh, cd.ph);
    const int OW = conv_out_dim(W, cd.kw, cd.sw, cd.pw);
#pragma omp parallel for schedule(static) if (cd.out_c > 1)
    for (int oc = 0; oc < cd.out_c; ++oc) {
        const T* gybase = gy + static_cast<size_t>(oc) * OH * OW;
        T bacc = 0;
        for (long long i = 0; i < static_cast<long long>(OH) * OW; ++i) bacc += gybase[i];
        gb[oc] += bacc;
        for (int ic = 0; ic < C; ++ic) {
            for (int kh = 0; kh < cd.kh; ++kh) {
                for (int kw = 0; kw < cd.kw; ++kw) {
                    T acc = 0;
                    for (int oh = 0; oh < OH; ++oh) {
                        const int ih = oh * cd.sh - cd.ph + kh;
                        if (ih < 0 || ih >= H) continue;
                        const T* xrow = x + (static_cast<size_t>(ic) * H + ih) * W;
                        const T* gyrow = gybase + static_cast<size_t>(oh) * OW;
                        if (cd.sw == 1) {
                            const int iw0 = kw - cd.pw;
                            const int lo = std::max(0, -iw0);
                            const int hi = std::min(OW, W - iw0);
                            const T* xs = xrow + iw0;
                            for (int ow = lo; ow < hi; ++ow) acc += gyrow[ow] * xs[ow];
                        } else {
                            const int num_hi = W - 1 + cd.pw - kw;
                            if (num_hi < 0) continue;
                            const int ow_lo = std::max(0, (cd.pw - kw + cd.sw - 1) / cd.sw);
                            const int ow_hi = std::min(OW, num_hi / cd.sw + 1);
                            const T* xs = xrow - cd.pw + kw;
#pragma omp simd reduction(+ : acc)
                            for (int ow = ow_lo; ow < ow_hi; ++ow) acc += gyrow[ow] * xs[ow * cd.sw];
                        }
                    }
                    gw[((static_cast<size_t>(oc) * C + ic) * cd.kh + kh) * cd.kw + kw] += acc;
                }
            }
        }
    }
}

template <class T>
void conv2d_backward_input(const T* w, const ConvDims& cd, int C, int H, int W,
                           const T* gy, T* gx) {
    const int OH = conv_out_dim(H, cd.kh, cd.sh, cd.ph);
    const int OW = conv_out_dim(W, cd.kw, cd.sw, cd.pw);
    // Gather form: each input row is owned by one iteration, so the
    // accumulation is race-free and its order fixed.
#pragma omp parallel for collapse(2) schedule(static) if (static_cast<long long>(C) * H > 15)
    for (int ic = 0; ic < C; ++ic) {
        for (int ih = 0; ih < H; ++ih) {
            T* gxrow = gx + (static_cast<size_t>(ic) * H + ih) * W;
            for (int oc = 0; oc < cd.out_c; ++oc) {
                for (int kh = 0; kh < cd.kh; ++kh) {
                    const int num = ih + cd.ph - kh;
                    if (num < 0 || num % cd.sh != 0) continue;
                    const int oh = num / cd.sh;
                    if (oh >= OH) continue;
                    const T* gyrow = gy + (static_cast<size_t>(oc) * OH + oh) * OW;
                    const T* wrow = w + ((static_cast<size_t>(oc) * C + ic) * cd.kh + kh) * cd.kw;
                    for (int kw = 0; kw < cd.kw; ++kw) {
                        const T wv = wrow[kw];
                        if (cd.sw == 1) {
                            const int lo = std::max(0, kw - cd.pw);
                            const int hi = std::min(W, OW + kw - cd.pw);
                            const T* gys = gyrow + cd.pw - kw;
                            for (int iw = lo; iw < hi; ++iw) gxrow[iw] += wv * gys[iw];
                        } else {
                            const int num_hi = W - 1 + cd.pw - kw;
                            if (num_hi < 0) continue;
                            const int ow_lo = std::max(0, (cd.pw - kw + cd.sw - 1) / cd.sw);
                            const int ow_hi = std::min(OW, num_hi / cd.sw + 1);
                            T* gxs = gxrow - cd.pw + kw;
                            for (int ow = ow_lo; ow < ow_hi; ++ow) gxs[ow * cd.sw] += wv * gyrow[ow];
                        }
                    }
                }
            }
        }
    }
}

// 2x2 window, stride 2. argmax stores the in-window offset (kh*2+kw) of the
// first maximum in scan order, which keeps gradient routing deterministic.
template <class T>
void maxpool_forward(const T* x, int C, int H, int W, T* y, int32_t* argmax) {
    const int OH = (H - 2) / 2 + 1;
    const int OW = (W - 2) / 2 + 1;
#pragma omp parallel for schedule(static) if (static_cast<long long>(C) * OH * OW > 16384)
    for (int c = 0; c < C; ++c) {
        for (int oh = 0; oh < OH; ++oh) {
            for (int ow = 0; ow < OW; ++ow) {
                const size_t base = (static_cast<size_t>(c) * H + oh * 2) * W + ow * 2;
                T best = x[base];
                int arg = 0;
                for (int kh = 0; kh < 2; ++kh) {
                    for (int kw = 0; kw < 2; ++kw) {
                        const T v = x[base + static_cast<size_t>(kh) * W + kw];
                        if (v > best) {
                            best = v;
                            arg = kh * 2 + kw;
                        }
                    }
                }
                const size_t o = (static_cast<size_t>(c) * OH + oh) * OW + ow;
                y[o] = best;
                argmax[o] = arg;
            }
        }
    }
}

template <class T>
void maxpool_backward(const int32_t* argmax, int C, int H, int W, const T* gy, T* gx) {
    const int OH = (H - 2) / 2 + 1;
    const int OW = (W - 2) / 2 + 1;
#pragma omp parallel for schedule(static) if (static_cast<long long>(C) * OH * OW > 16384)
    for (int c = 0; c < C; ++c) {
        for (int oh = 0; oh < OH; ++oh) {
            for (int ow = 0; ow < OW; ++ow) {
                const size_t o = (static_cast<size_t>(c) * OH + oh) * OW + ow;
                const int arg = argmax[o];
                const size_t i = (static_cast<size_t>(c) * H + oh * 2 + arg / 2) * W + ow * 2 + arg % 2;
                gx[i] += gy[o];
            }
        }
    }
}

template <class T>
void relu_forward(const T* x, long long n, T* y) {
#pragma omp parallel for schedule(static) if (n > 65536)
    for (long long i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <class T>
void relu_backward(const T* x, long long n, const T* gy, T* gx) {
#pragma omp parallel for schedule(static) if (n > 65536)
    for (long long i = 0; i < n; ++i) gx[i] += x[i] > T(0) ? gy[i] : T(0);
}

template <class T>
void fc_forward(const T* x, int in, int out, const T* w, const T* b, T* y) {
#pragma omp parallel for schedule(static) if (static_cast<long long>(in) * out > 65536)
    for (int o = 0; o < out; ++o) {
        const T* wrow = w + static_cast<size_t>(o) * in;
        T acc = b[o];
        for (int i = 0; i < in; ++i) acc += wrow[i] * x[i];
        y[o] = acc;
    }
}

template <class T>
void fc_backward(const T* x, int in, int out, const T* w, const T* gy,
                 T* gw, T* gb, T* gx) {
#pragma omp parallel for schedule(static) if (static_cast<long long>(in) * out > 65536)
    for (int o = 0; o < out; ++o) {
        gb[o] += gy[o];
        T* gwrow = gw + static_cast<size_t>(o) * in;
        const T g = gy[o];
        for (int i = 0; i < in; ++i) gwrow[i] += g * x[i];
    }
#pragma omp parallel for schedule(static) if (static_cast<long long>(in) * out > 65536)
    for (int i = 0; i < in; ++i) {
        T acc = 0;
        for (int o = 0; o < out; ++o) acc += w[static_cast<size_t>(o) * in + i] * gy[o];
        gx[i] += acc;
    }
}

// Numerically stable softmax; outputs are strictly positive and sum to 1.
template <class T>
void softmax_forward(const T* x, int n, T* y) {
    T mx = x[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
    T sum = 0;
    for (int i = 0; i < n; ++i) {
        y[i] = std::exp(x[i] - mx);
        sum += y[i];
    }
    const T inv = T(1) / sum;
    for (int i = 0; i < n; ++i) y[i] *= inv;
}

template <class T>
void softmax_backward(const T* y, int n, const T* gy, T* gx) {
    T dot = 0;
    for (int i = 0; i < n; ++i) dot += gy[i] * y[i];
    for (int i = 0; i < n; ++i) gx[i] += y[i] * (gy[i] - dot);
}

}  // namespace odom::nn
