#include <doctest.h>

#include <cmath>

#include "mxtts/seqmix/gradcheck.hpp"
#include "mxtts/seqmix/kernels.hpp"
#include "mxtts/seqmix/mixers.hpp"
#include "support.hpp"

using namespace mxtts;
using namespace mxtts::seqmix;
using testsupport::Gen;

namespace {

AttentionParams<double> random_attention(Gen& g, std::size_t dim, std::size_t heads) {
  AttentionParams<double> p;
  const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
  p.wq = g.matrix(dim, dim, sd);
  p.wk = g.matrix(dim, dim, sd);
  p.wv = g.matrix(dim, dim, sd);
  p.wo = g.matrix(dim, dim, sd);
  p.heads = heads;
  return p;
}

Matrix<double> identity(std::size_t n) {
  Matrix<double> m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1;
  return m;
}

}  // namespace

TEST_SUITE("seqmix") {
  TEST_CASE("parse_mixer accepts the four spellings and rejects others") {
    for (auto k : kAllMixers) CHECK(parse_mixer(to_string(k)) == k);
    CHECK_THROWS_AS(parse_mixer("transformer"), std::invalid_argument);
  }

  TEST_CASE("ssd single step and memoryless cases") {
    auto p = SsdParams<double>::zeros(1, 1, 1, 1);
    p.alpha[0] = 0.7;
    p.B_bar[0](0, 0) = 1;
    p.C[0](0, 0) = 1;
    Matrix<double> x(1, 1, 2.0);
    CHECK(ssd_forward(x, p)(0, 0) == doctest::Approx(2.0));

    Gen g(3);
    auto q = g.ssd(9, 3, 2, 2, 0.0, 0.0);
    const auto xr = g.matrix(9, 2);
    const auto y = ssd_forward(xr, q);
    for (std::size_t t = 0; t < 9; ++t) {
      const auto cb = testsupport::matmul(q.C[t], q.B_bar[t]);
      for (std::size_t o = 0; o < 2; ++o) {
        double s = 0;
        for (std::size_t i = 0; i < 2; ++i) s += cb(o, i) * xr(t, i);
        CHECK(y(t, o) == doctest::Approx(s).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("ssd equals the step recurrence on random instances, every chunk size") {
    testsupport::for_all(60, 11, [](Gen& g, std::uint64_t seed) {
      const std::size_t L = g.index(1, 40), N = g.index(1, 5), in = g.index(1, 4), out = g.index(1, 4);
      const auto p = g.ssd(L, N, in, out, 0.0, 1.0);
      const auto x = g.matrix(L, in);
      const auto ref = testsupport::naive_ssd(x, p);
      for (std::size_t chunk : {1, 3, 16, 64}) {
        INFO("seed " << seed << " chunk " << chunk);
        CHECK(testsupport::rel_error(ssd_forward(x, p, chunk), ref) < 1e-10);
      }
    });
  }

  TEST_CASE("ssd with alpha = 1 is the cumulative-sum linear attention form") {
    testsupport::for_all(30, 12, [](Gen& g, std::uint64_t seed) {
      const std::size_t L = g.index(1, 24);
      auto p = g.ssd(L, 3, 2, 2);
      for (auto& a : p.alpha) a = 1.0;
      const auto x = g.matrix(L, 2);
      INFO("seed " << seed);
      CHECK(testsupport::rel_error(ssd_forward(x, p), testsupport::cumsum_form(x, p)) < 1e-10);
    });
  }

  TEST_CASE("ssd is causal: perturbing x_t leaves earlier outputs bit-identical") {
    testsupport::for_all(30, 13, [](Gen& g, std::uint64_t seed) {
      const std::size_t L = g.index(2, 30);
      const auto p = g.ssd(L, 4, 3, 3);
      auto x = g.matrix(L, 3);
      const auto y0 = ssd_forward(x, p);
      const std::size_t t = g.index(1, L - 1);
      x(t, g.index(0, 2)) += 1.5;
      const auto y1 = ssd_forward(x, p);
      INFO("seed " << seed << " t " << t);
      for (std::size_t s = 0; s < t; ++s)
        for (std::size_t c = 0; c < 3; ++c) CHECK(y0(s, c) == y1(s, c));
    });
  }

  TEST_CASE("ssd validates shapes and alpha") {
    auto p = SsdParams<double>::zeros(4, 2, 1, 1);
    CHECK_THROWS_AS(ssd_forward(Matrix<double>(3, 1), p), ShapeError);
    CHECK_THROWS_AS(ssd_forward(Matrix<double>(4, 2), p), ShapeError);
    p.alpha[1] = -0.1;
    CHECK_THROWS_AS(ssd_forward(Matrix<double>(4, 1), p), ShapeError);
  }

  TEST_CASE("ssd materialized matrix: all-ones cumulative sum at L=3") {
    auto p = SsdParams<double>::zeros(3, 1, 1, 1);
    for (std::size_t t = 0; t < 3; ++t) {
      p.alpha[t] = 1;
      p.B_bar[t](0, 0) = 1;
      p.C[t](0, 0) = 1;
    }
    const auto M = materialize_mixing_matrix(p, 3);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) CHECK(M(i, j) == (j <= i ? 1.0 : 0.0));
  }

  TEST_CASE("ssd materialized entries follow C_t (prod alpha) B_s") {
    Gen g(21);
    const std::size_t L = 7;
    const auto p = g.ssd(L, 3, 1, 1);
    const auto M = materialize_mixing_matrix(p, L);
    for (std::size_t t = 0; t < L; ++t)
      for (std::size_t s = 0; s < L; ++s) {
        double expect = 0;
        if (s <= t) {
          double prod = 1;
          for (std::size_t r = s + 1; r <= t; ++r) prod *= p.alpha[r];
          for (std::size_t n = 0; n < 3; ++n) expect += p.C[t](0, n) * prod * p.B_bar[s](n, 0);
        }
        CHECK(M(t, s) == doctest::Approx(expect).epsilon(1e-12));
      }
  }

  TEST_CASE("hydra degenerate cases") {
    Gen g(31);
    const std::size_t L = 6, dim = 3;
    HydraParams<double> p;
    p.forward_ss = SsdParams<double>::zeros(L, 2, dim, dim);
    p.backward_ss = SsdParams<double>::zeros(L, 2, dim, dim);
    p.D = {0.5, -2.0, 1.25};
    const auto x = g.matrix(L, dim);
    const auto y = hydra_forward(x, p);
    for (std::size_t t = 0; t < L; ++t)
      for (std::size_t c = 0; c < dim; ++c) CHECK(y(t, c) == x(t, c) * p.D[c]);

    const auto q = g.hydra(L, 2, dim);
    CHECK(testsupport::max_abs(hydra_forward(Matrix<double>(L, dim), q)) == 0.0);
  }

  TEST_CASE("hydra equals the decomposition and the materialized operator") {
    testsupport::for_all(40, 32, [](Gen& g, std::uint64_t seed) {
      INFO("seed " << seed);
      const std::size_t L = g.index(1, 20), N = g.index(1, 4), dim = g.index(1, 3);
      const auto p = g.hydra(L, N, dim);
      const auto x = g.matrix(L, dim);
      CHECK(testsupport::rel_error(hydra_forward(x, p), testsupport::naive_hydra(x, p)) < 1e-10);

      const auto ps = g.hydra(L, N, 1);
      const auto M = materialize_mixing_matrix(ps, L);
      CHECK(testsupport::rel_error(M, testsupport::hydra_matrix_by_columns(ps)) < 1e-10);
      for (std::size_t i = 0; i < L; ++i) CHECK(M(i, i) == doctest::Approx(ps.D[0]).epsilon(1e-12));
      const auto xs = g.matrix(L, 1);
      CHECK(testsupport::rel_error(hydra_forward(xs, ps), testsupport::matmul(M, xs)) < 1e-10);
    });
  }

  TEST_CASE("hydra and fnet are not causal") {
    Gen g(33);
    const std::size_t L = 8;
    const auto p = g.hydra(L, 2, 2);
    auto x = g.matrix(L, 2);
    const auto y0 = hydra_forward(x, p);
    const auto f0 = fnet_forward(x);
    x(L - 1, 0) += 1.0;
    CHECK(hydra_forward(x, p)(0, 0) != y0(0, 0));
    CHECK(fnet_forward(x)(0, 0) != f0(0, 0));
  }

  TEST_CASE("fnet: constant grid is a DC spike; linear; matches double-loop DFT") {
    Matrix<double> c(4, 4, 0.75);
    const auto y = fnet_forward(c);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) CHECK(y(i, j) == doctest::Approx(i == 0 && j == 0 ? 12.0 : 0.0));

    testsupport::for_all(40, 41, [](Gen& g, std::uint64_t seed) {
      INFO("seed " << seed);
      const std::size_t L = g.index(1, 24), H = g.index(1, 12);
      const auto x = g.matrix(L, H);
      const auto y = fnet_forward(x);
      CHECK(testsupport::rel_error(y, testsupport::naive_dft2(x)) < 1e-10);
      Matrix<double> x2 = x;
      for (auto& v : x2.flat()) v *= 2;
      const auto y2 = fnet_forward(x2);
      for (std::size_t i = 0; i < y.size(); ++i) CHECK(y2.data()[i] == doctest::Approx(2 * y.data()[i]));
    });
  }

  TEST_CASE("fnet rejects empty and non-finite input") {
    CHECK_THROWS(fnet_forward(Matrix<double>(0, 3)));
    Matrix<double> x(2, 2);
    x(1, 1) = NAN;
    CHECK_THROWS(fnet_forward(x));
  }

  TEST_CASE("attention: single position returns the projected value row") {
    Gen g(51);
    const auto p = random_attention(g, 4, 2);
    const auto x = g.matrix(1, 4);
    const auto expect = testsupport::matmul(testsupport::matmul(x, p.wv), p.wo);
    CHECK(testsupport::max_abs_diff(attention_forward(x, p, false), expect) < 1e-12);
  }

  TEST_CASE("attention: identity projections on a hand instance") {
    // One head, d = 2, x rows e1, e2, e1+e2. Scores are x_i·x_j / √2.
    AttentionParams<double> p{identity(2), identity(2), identity(2), identity(2), 1};
    Matrix<double> x(3, 2, {1, 0, 0, 1, 1, 1});
    const double r = 1 / std::sqrt(2.0);
    // Row 0 scores (1, 0, 1)·r; row 1 (0, 1, 1)·r; row 2 (1, 1, 2)·r.
    const double s[3][3] = {{r, 0, r}, {0, r, r}, {r, r, 2 * r}};
    const auto y = attention_forward(x, p, false);
    for (int i = 0; i < 3; ++i) {
      double z = 0, a = 0, b = 0;
      for (int j = 0; j < 3; ++j) z += std::exp(s[i][j]);
      for (int j = 0; j < 3; ++j) {
        a += std::exp(s[i][j]) / z * x(j, 0);
        b += std::exp(s[i][j]) / z * x(j, 1);
      }
      CHECK(y(i, 0) == doctest::Approx(a).epsilon(1e-12));
      CHECK(y(i, 1) == doctest::Approx(b).epsilon(1e-12));
    }
  }

  TEST_CASE("attention matches the per-head oracle; weights rows sum to one") {
    testsupport::for_all(30, 52, [](Gen& g, std::uint64_t seed) {
      INFO("seed " << seed);
      const std::size_t heads = g.index(1, 3), hd = g.index(1, 4), L = g.index(1, 16);
      const bool causal = g.coin();
      const auto p = random_attention(g, heads * hd, heads);
      const auto x = g.matrix(L, heads * hd);
      kernels::AttentionCache<double> cache;
      const auto y = attention_forward(x, p, causal, &cache);
      const auto q = testsupport::matmul(x, p.wq), k = testsupport::matmul(x, p.wk), v = testsupport::matmul(x, p.wv);
      const auto ref = testsupport::matmul(testsupport::naive_attention(q, k, v, heads, causal), p.wo);
      CHECK(testsupport::rel_error(y, ref) < 1e-10);
      REQUIRE(cache.probs.size() == heads);
      for (const auto& P : cache.probs)
        for (std::size_t i = 0; i < L; ++i) {
          double s = 0;
          for (std::size_t j = 0; j < L; ++j) s += P(i, j);
          CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        }
    });
  }

  TEST_CASE("cross_mix rules") {
    Gen g(61);
    const auto a = g.matrix(5, 3);

    SUBCASE("fnet with empty b equals fnet(a)") {
      CHECK(testsupport::max_abs_diff(cross_mix(a, Matrix<double>(0, 3), MixerKind::kFNet, MixerParams<double>{FNetParams{}}),
                                      fnet_forward(a)) == 0.0);
    }
    SUBCASE("mamba2 prefix is unaffected by appended memory") {
      auto p = g.ssd(9, 3, 3, 3);
      for (auto& v : p.alpha) v = 1.0;
      const auto b = g.matrix(4, 3);
      auto prefix = p;
      prefix.alpha.resize(5);
      prefix.B_bar.resize(5);
      prefix.C.resize(5);
      const auto y = cross_mix(a, b, MixerKind::kMamba2, MixerParams<double>{p});
      CHECK(y.rows() == 5);
      CHECK(testsupport::rel_error(y, ssd_forward(a, prefix)) < 1e-12);
    }
    SUBCASE("attention output rows are convex combinations of projected values") {
      AttentionParams<double> p{identity(3), identity(3), identity(3), identity(3), 1};
      const auto b = g.matrix(4, 3);
      const auto y = cross_mix(a, b, MixerKind::kSelfAttention, MixerParams<double>{p});
      for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t c = 0; c < 3; ++c) {
          double lo = INFINITY, hi = -INFINITY;
          for (std::size_t j = 0; j < 4; ++j) {
            lo = std::min(lo, b(j, c));
            hi = std::max(hi, b(j, c));
          }
          CHECK(y(i, c) >= lo - 1e-12);
          CHECK(y(i, c) <= hi + 1e-12);
        }
    }
    SUBCASE("width mismatch") {
      CHECK_THROWS_AS(cross_mix(a, g.matrix(2, 4), MixerKind::kFNet, MixerParams<double>{FNetParams{}}), ShapeError);
    }
  }

  TEST_CASE("serial and OpenMP kernels are bit-identical") {
    Gen g(71);
    const std::size_t L = 37, P = 5, N = 4;
    const auto x = g.matrix(L, P), B = g.matrix(L, N), C = g.matrix(L, N), dy = g.matrix(L, P);
    std::vector<double> alpha(L);
    for (auto& a : alpha) a = g.uniform(0.5, 1.0);
    auto same = [](const Matrix<double>& a, const Matrix<double>& b) { return testsupport::max_abs_diff(a, b) == 0.0; };
    CHECK(same(kernels::serial::ssd_scan(x, alpha, B, C), kernels::omp::ssd_scan(x, alpha, B, C)));
    const auto gs = kernels::serial::ssd_scan_backward(x, alpha, B, C, dy);
    const auto go = kernels::omp::ssd_scan_backward(x, alpha, B, C, dy);
    CHECK(same(gs.dx, go.dx));
    CHECK(same(gs.dB, go.dB));
    CHECK(same(gs.dC, go.dC));
    CHECK(gs.dalpha == go.dalpha);
    const auto q = g.matrix(L, 6), k = g.matrix(L, 6), v = g.matrix(L, 6);
    CHECK(same(kernels::serial::attention<double>(q, k, v, 2, true, nullptr),
               kernels::omp::attention<double>(q, k, v, 2, true, nullptr)));
    CHECK(same(kernels::serial::fnet2d(x), kernels::omp::fnet2d(x)));
  }

  TEST_CASE("backward_check: fnet is exact, scan and attention within tolerance") {
    Gen g(81);
    GradCheckOptions opt;
    opt.seed = 5;
    const auto rf = backward_check([](const auto& in) { return ad::fnet(in[0]); }, {g.matrix(6, 5)}, opt);
    CHECK(rf.max_rel_error < 1e-9);

    const std::size_t L = 7;
    Matrix<double> alpha(L, 1);
    for (auto& a : alpha.flat()) a = g.uniform(0.4, 0.95);
    const auto rs = backward_check([](const auto& in) { return ad::ssd_scan(in[0], in[1], in[2], in[3]); },
                                   {g.matrix(L, 3), alpha, g.matrix(L, 2), g.matrix(L, 2)}, opt);
    INFO(rs.worst);
    CHECK(rs.max_rel_error < 1e-5);

    const auto ra = backward_check(
        [](const auto& in) { return ad::attention(in[0], in[1], in[2], 2, false); },
        {g.matrix(5, 4), g.matrix(6, 4), g.matrix(6, 4)}, opt);
    INFO(ra.worst);
    CHECK(ra.max_rel_error < 1e-5);
  }
}
