#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lact {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Shape of an argument does not match what the operation expects.
struct dimension_error : error {
    using error::error;
};
// A scalar/config value is outside its admissible range.
struct parameter_error : error {
    using error::error;
};
struct io_error : error {
    using error::error;
};
// An iterative solver produced non-finite values.
struct divergence_error : error {
    using error::error;
};

// Dense H x W image, row-major, double precision.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h, int w, double fill = 0.0)
        : height(h), width(w), data(static_cast<size_t>(h) * w, fill) {}

    double& at(int r, int c) { return data[static_cast<size_t>(r) * width + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * width + c]; }
    size_t size() const { return data.size(); }
    bool same_shape(const Image& o) const { return height == o.height && width == o.width; }
};

// ---- flat-vector kernels shared by the solver and the autodiff tape ----
// Summation order is fixed (sequential) so results are reproducible.

double dot(const std::vector<double>& a, const std::vector<double>& b);
double nrm2(const std::vector<double>& a);
double sum_abs(const std::vector<double>& a);
// out = a*x + y, elementwise
std::vector<double> axpy(double a, const std::vector<double>& x, const std::vector<double>& y);
std::vector<double> add(const std::vector<double>& a, const std::vector<double>& b);
std::vector<double> sub(const std::vector<double>& a, const std::vector<double>& b);
std::vector<double> scale(double a, const std::vector<double>& x);
bool all_finite(const std::vector<double>& a);

// ---- deterministic RNG utilities (self-contained so streams are stable) ----

uint64_t splitmix64(uint64_t& state);
// Derives an independent stream seed from (base, index).
uint64_t mix_seed(uint64_t base, uint64_t index);

struct Rng {
    explicit Rng(uint64_t seed);
    uint64_t next_u64();
    double uniform();                      // [0,1)
    double uniform(double lo, double hi);
    double normal();                       // standard normal, Box-Muller
    int uniform_int(int lo, int hi);       // inclusive bounds
    int64_t poisson(double lambda);        // exact for small lambda, normal approx above 64

  private:
    uint64_t s_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// ---- bounded parallel execution with a caller-fixed chunk count ----
// The chunk partition never depends on the worker count, so any reduction
// over per-chunk buffers in chunk order is bit-reproducible. Worker count
// is capped by the LACT_THREADS environment variable.

int worker_count();
void parallel_chunks(int n_chunks, const std::function<void(int)>& fn);

}  // namespace lact
