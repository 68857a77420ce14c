#include "lact/core.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>

namespace lact {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double nrm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

double sum_abs(const std::vector<double>& a) {
    double s = 0.0;
    for (double x : a) s += std::fabs(x);
    return s;
}

std::vector<double> axpy(double a, const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + y[i];
    return out;
}

std::vector<double> add(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size());
    for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

std::vector<double> sub(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size());
    for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

std::vector<double> scale(double a, const std::vector<double>& x) {
    std::vector<double> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = a * x[i];
    return out;
}

bool all_finite(const std::vector<double>& a) {
    for (double x : a)
        if (!std::isfinite(x)) return false;
    return true;
}

uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t mix_seed(uint64_t base, uint64_t index) {
    uint64_t s = base ^ (0x632be59bd9b4e019ULL * (index + 1));
    uint64_t a = splitmix64(s);
    return splitmix64(s) ^ a;
}

Rng::Rng(uint64_t seed) : s_(seed) {
    // warm up so nearby seeds decorrelate
    splitmix64(s_);
    splitmix64(s_);
}

uint64_t Rng::next_u64() { return splitmix64(s_); }

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

int Rng::uniform_int(int lo, int hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
}

int64_t Rng::poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    if (lambda < 64.0) {
        // Knuth multiplication method
        double l = std::exp(-lambda);
        double p = 1.0;
        int64_t k = 0;
        do {
            ++k;
            p *= uniform();
        } while (p > l);
        return k - 1;
    }
    // normal approximation, adequate for photon-count magnitudes
    double n = lambda + std::sqrt(lambda) * normal();
    return n < 0.0 ? 0 : static_cast<int64_t>(std::llround(n));
}

int worker_count() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    if (const char* env = std::getenv("LACT_THREADS")) {
        int cap = std::atoi(env);
        if (cap >= 1) hw = std::min(hw, cap);
    }
    return hw;
}

void parallel_chunks(int n_chunks, const std::function<void(int)>& fn) {
    if (n_chunks <= 0) return;
    int workers = std::min(worker_count(), n_chunks);
    if (workers <= 1) {
        for (int c = 0; c < n_chunks; ++c) fn(c);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                int c = next.fetch_add(1);
                if (c >= n_chunks) return;
                fn(c);
            }
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace lact
