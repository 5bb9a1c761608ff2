// Times the serial and OpenMP kernel variants on the same inputs and checks
// that their outputs match bit for bit.
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <random>

#include "mxtts/bench/bench.hpp"
#include "mxtts/seqmix/kernels.hpp"

namespace {

namespace k = mxtts::seqmix::kernels;
using mxtts::Matrix;

Matrix<float> randn(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<float> nd(0.f, 1.f);
  Matrix<float> m(r, c);
  for (auto& v : m.flat()) v = nd(rng);
  return m;
}

template <typename F>
double median_seconds(int repeats, F&& f) {
  std::vector<double> t;
  f();
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return mxtts::bench::median(t);
}

bool same_bits(const Matrix<float>& a, const Matrix<float>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP kernel timing"};
  std::size_t L = 1024, d = 64, N = 16;
  int threads = k::max_threads(), repeats = 5;
  app.add_option("--len", L, "sequence length");
  app.add_option("--dim", d, "channels");
  app.add_option("--state", N, "SSM state size");
  app.add_option("--threads", threads, "OpenMP threads");
  app.add_option("--repeats", repeats, "timed repetitions");
  CLI11_PARSE(app, argc, argv);
  if (!k::openmp_available()) std::printf("openmp=unavailable (omp variants run serially)\n");
  k::set_threads(threads);

  std::mt19937_64 rng(0);
  const auto x = randn(L, d, rng), B = randn(L, N, rng), C = randn(L, N, rng);
  std::vector<float> alpha(L);
  std::uniform_real_distribution<float> u(0.8f, 1.0f);
  for (auto& a : alpha) a = u(rng);
  const auto q = randn(L, d, rng), kk = randn(L, d, rng), v = randn(L, d, rng);

  int failures = 0;
  auto report = [&](const char* name, double ts, double to, bool same) {
    std::printf("kernel=%s len=%zu dim=%zu threads=%d serial_s=%.6f omp_s=%.6f speedup=%.2f identical=%s\n", name, L, d,
                threads, ts, to, ts / to, same ? "true" : "false");
    failures += same ? 0 : 1;
  };
  {
    Matrix<float> ys, yo;
    const double ts = median_seconds(repeats, [&] { ys = k::serial::ssd_scan(x, alpha, B, C); });
    const double to = median_seconds(repeats, [&] { yo = k::omp::ssd_scan(x, alpha, B, C); });
    report("ssd_scan", ts, to, same_bits(ys, yo));
  }
  {
    Matrix<float> ys, yo;
    const double ts = median_seconds(repeats, [&] { ys = k::serial::attention<float>(q, kk, v, 2, false, nullptr); });
    const double to = median_seconds(repeats, [&] { yo = k::omp::attention<float>(q, kk, v, 2, false, nullptr); });
    report("attention", ts, to, same_bits(ys, yo));
  }
  {
    Matrix<float> ys, yo;
    const double ts = median_seconds(repeats, [&] { ys = k::serial::fnet2d(x); });
    const double to = median_seconds(repeats, [&] { yo = k::omp::fnet2d(x); });
    report("fnet2d", ts, to, same_bits(ys, yo));
  }
  return failures ? 1 : 0;
}
