// Timing comparison of the serial and OpenMP matrix kernels.
#include <chrono>
#include <functional>
#include <cstdio>
#include <string>
#include <vector>

#include "gebc/kernels.hpp"
#include "gebc/rng.hpp"

using Clock = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = Clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

int main() {
  gebc::Rng rng(1234);
  std::printf("%-20s %6s %10s %10s %8s\n", "kernel", "size", "serial_ms",
              "omp_ms", "speedup");
  for (size_t n : {64, 128, 256, 512}) {
    std::vector<float> a(n * n), b(n * n), c(n * n);
    for (auto& v : a) v = float(rng.normal());
    for (auto& v : b) v = float(rng.normal());
    const int reps = n <= 128 ? 50 : 10;

    struct Case {
      const char* name;
      std::function<void()> serial, omp;
    };
    const Case cases[] = {
        {"gemm_nn",
         [&] { gebc::kernels::gemm_nn_serial(c.data(), a.data(), b.data(), n, n, n); },
         [&] { gebc::kernels::gemm_nn_omp(c.data(), a.data(), b.data(), n, n, n); }},
        {"gemm_nt",
         [&] { gebc::kernels::gemm_nt_serial(c.data(), a.data(), b.data(), n, n, n); },
         [&] { gebc::kernels::gemm_nt_omp(c.data(), a.data(), b.data(), n, n, n); }},
        {"gemm_tn",
         [&] { gebc::kernels::gemm_tn_serial(c.data(), a.data(), b.data(), n, n, n); },
         [&] { gebc::kernels::gemm_tn_omp(c.data(), a.data(), b.data(), n, n, n); }},
    };
    for (const auto& k : cases) {
      const double ts = time_ms(k.serial, reps);
      const double tp = time_ms(k.omp, reps);
      std::printf("%-20s %6zu %10.3f %10.3f %7.2fx\n", k.name, n, ts, tp,
                  ts / tp);
    }
  }
  return 0;
}
