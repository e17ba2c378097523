// Timing comparison between the serial reference kernels and the OpenMP
// production kernels, plus the end-to-end frozen forward pass.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <vector>

#include "odom/kernels.hpp"
#include "odom/nn.hpp"
#include "odom/reference.hpp"
#include "odom/topology.hpp"

using namespace odom::nn;

namespace {

using Clock = std::chrono::steady_clock;

template <class F>
double time_ms(F&& fn, int reps) {
    fn();  // warm up
    const auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void fill_random(std::vector<float>& v, std::mt19937_64& rng) {
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    for (float& x : v) x = dist(rng);
}

void bench_conv(const char* name, const ConvDims& cd, int h, int w, int reps) {
    std::mt19937_64 rng(7);
    std::vector<float> x(static_cast<size_t>(cd.in_c) * h * w);
    std::vector<float> weights(static_cast<size_t>(cd.out_c) * cd.in_c * cd.kh * cd.kw);
    std::vector<float> bias(cd.out_c);
    fill_random(x, rng);
    fill_random(weights, rng);
    fill_random(bias, rng);
    const int oh = conv_out_dim(h, cd.kh, cd.sh, cd.ph);
    const int ow = conv_out_dim(w, cd.kw, cd.sw, cd.pw);
    std::vector<float> y(static_cast<size_t>(cd.out_c) * oh * ow);
    const double flops = 2.0 * cd.out_c * oh * ow * cd.in_c * cd.kh * cd.kw;

    const double serial = time_ms(
        [&] { reference::conv2d_forward(x.data(), cd.in_c, h, w, cd, weights.data(), bias.data(), y.data()); },
        reps);
    const int threads = hardware_threads();
    set_threads(1);
    const double omp1 = time_ms(
        [&] { conv2d_forward(x.data(), cd.in_c, h, w, cd, weights.data(), bias.data(), y.data()); }, reps);
    set_threads(threads);
    const double ompn = time_ms(
        [&] { conv2d_forward(x.data(), cd.in_c, h, w, cd, weights.data(), bias.data(), y.data()); }, reps);

    std::printf("%-28s %9.3f ms %9.3f ms %9.3f ms   %5.2fx / %5.2fx   %6.2f GF/s\n", name, serial,
                omp1, ompn, serial / omp1, serial / ompn, flops / (ompn * 1e6));

    // Backward pass: reference scatter vs production gather kernels.
    std::vector<float> gy(y.size());
    fill_random(gy, rng);
    std::vector<float> gw(weights.size()), gb(bias.size()), gx(x.size());
    const double bser = time_ms(
        [&] {
            std::fill(gw.begin(), gw.end(), 0.0f);
            std::fill(gb.begin(), gb.end(), 0.0f);
            std::fill(gx.begin(), gx.end(), 0.0f);
            reference::conv2d_backward(x.data(), cd.in_c, h, w, cd, weights.data(), gy.data(),
                                       gw.data(), gb.data(), gx.data());
        },
        reps);
    const double bomp = time_ms(
        [&] {
            std::fill(gw.begin(), gw.end(), 0.0f);
            std::fill(gb.begin(), gb.end(), 0.0f);
            std::fill(gx.begin(), gx.end(), 0.0f);
            conv2d_backward_params(x.data(), cd.in_c, h, w, cd, gy.data(), gw.data(), gb.data());
            conv2d_backward_input(weights.data(), cd, cd.in_c, h, w, gy.data(), gx.data());
        },
        reps);
    std::printf("%-28s %9.3f ms %9s    %9.3f ms   %5.2fx\n", "  backward", bser, "-", bomp,
                bser / bomp);
}

}  // namespace

int main(int argc, char** argv) {
    const int reps = argc > 1 ? std::atoi(argv[1]) : 10;
    std::printf("threads available: %d, reps per measurement: %d\n\n", hardware_threads(), reps);
    std::printf("%-28s %12s %12s %12s   %s\n", "kernel", "serial", "omp(1)", "omp(n)",
                "speedup(1/n)");

    ConvDims reg1;
    reg1.in_c = 6; reg1.out_c = 16; reg1.kh = 3; reg1.kw = 3; reg1.ph = 1; reg1.pw = 1;
    bench_conv("conv 3x3 6->16 64x360", reg1, 64, 360, reps);

    ConvDims reg2;
    reg2.in_c = 16; reg2.out_c = 32; reg2.kh = 3; reg2.kw = 3; reg2.ph = 1; reg2.pw = 1;
    bench_conv("conv 3x3 16->32 32x180", reg2, 32, 180, reps);

    ConvDims wide;
    wide.in_c = 6; wide.out_c = 16; wide.kh = 3; wide.kw = 15; wide.sh = 1; wide.sw = 5;
    wide.ph = 1; wide.pw = 5;
    bench_conv("conv 3x15/s5 6->16 64x1800", wide, 64, 1800, reps);

    // Frozen stock regression forward (one frame pair).
    Graph<float> part(cnn_part_graph(64, 360));
    part.init_params(3);
    std::mt19937_64 rng(11);
    Tensor<float> input({6, 64, 360});
    fill_random(input.data, rng);
    const int threads = hardware_threads();
    set_threads(1);
    const double f1 = time_ms([&] { part.forward({input}); }, reps);
    set_threads(threads);
    const double fn = time_ms([&] { part.forward({input}); }, reps);
    std::printf("\nstock CNN part forward (6x64x360): %.3f ms single-threaded, %.3f ms with %d threads\n",
                f1, fn, threads);
    return 0;
}
