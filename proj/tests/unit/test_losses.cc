#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "groundhog/errors.h"
#include "groundhog/losses.h"

namespace groundhog {
namespace {

SoftMask soft(int h, int w, std::vector<double> p) { return SoftMask(h, w, std::move(p)); }

BinaryMask bin(int h, int w, const std::vector<int>& bits) {
  BinaryMask m(h, w);
  for (int i = 0; i < h * w; ++i) m.set(i / w, i % w, bits[i] != 0);
  return m;
}

}  // namespace

TEST_CASE("dice_loss") {
  const BinaryMask gt = bin(1, 4, {1, 0, 0, 0});
  CHECK(dice_loss(soft(1, 4, {1, 0, 0, 0}), gt).value == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(dice_loss(soft(1, 4, {1, 1, 0, 0}), gt).value == doctest::Approx(1.0 / 3.0));
  CHECK(dice_loss(soft(1, 4, {0, 1, 1, 0}), gt).value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS(dice_loss(soft(1, 3, {0, 0, 0}), gt), DimensionError);
}

TEST_CASE("bce_loss") {
  const BinaryMask gt = bin(1, 4, {1, 0, 1, 0});
  CHECK(bce_loss(soft(1, 4, {1, 0, 1, 0}), gt).value <= 1e-6);
  CHECK(bce_loss(soft(1, 4, {0.5, 0.5, 0.5, 0.5}), gt).value == doctest::Approx(std::log(2.0)));
  double prev = 1e9;
  for (double t = 0.0; t <= 1.0; t += 0.1) {
    const double v = bce_loss(soft(1, 4, {0.5 + 0.5 * t, 0.5 - 0.5 * t, 0.5 + 0.4 * t, 0.5 - 0.4 * t}), gt).value;
    CHECK(v < prev);
    prev = v;
  }
  // Clamp bound.
  CHECK(bce_loss(soft(1, 4, {0, 1, 0, 1}), gt).value <= -std::log(kBceClamp) + 1e-9);
}

TEST_CASE("projection_loss") {
  SoftMask filled(4, 4);
  {
    std::vector<double> p(16, 0.0);
    for (int r = 1; r < 3; ++r)
      for (int c = 0; c < 2; ++c) p[r * 4 + c] = 1.0;
    filled = soft(4, 4, p);
  }
  CHECK(projection_loss(filled, Box(0, 1, 2, 3)).value == doctest::Approx(0.0).epsilon(1e-6));
  const SoftMask full = soft(4, 4, std::vector<double>(16, 1.0));
  CHECK(projection_loss(full, Box(0, 0, 2, 4)).value == doctest::Approx(1.0 / 6.0));
  std::vector<double> corner(16, 0.0);
  corner[15] = 1.0;
  CHECK(projection_loss(soft(4, 4, corner), Box(0, 0, 2, 2)).value ==
        doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS(projection_loss(full, Box(0, 0, 5, 2)), InvalidArgument);
}

TEST_CASE("total_loss") {
  const LossBundle lm_only = total_loss(2.5, {});
  CHECK(lm_only.total == 2.5);
  std::vector<PhraseLoss> phrases(2);
  phrases[0].dice = 0.4;
  phrases[0].bce = 0.2;
  phrases[1].proj = 0.3;
  const LossBundle b = total_loss(1.0, phrases);
  CHECK(b.dice == doctest::Approx(0.4));
  CHECK(b.proj == doctest::Approx(0.3));
  CHECK(b.total == doctest::Approx(1.0 + 0.4 + 0.1 * 0.2 + 0.3));
  phrases[0].dice = 0.8;
  CHECK(total_loss(1.0, phrases).total - b.total == doctest::Approx(0.4));
  std::vector<PhraseLoss> both(1);
  both[0].dice = 0.1;
  both[0].bce = 0.1;
  both[0].proj = 0.1;
  CHECK_THROWS_AS(total_loss(1.0, both), InvalidArgument);
}

TEST_CASE("loss gradients match finite differences") {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> u(0.02, 0.98);
  std::bernoulli_distribution bit(0.4);
  constexpr double kStep = 1e-4;
  int worst_count = 0, skipped = 0, total = 0;
  for (int t = 0; t < 40; ++t) {
    const int h = 5, w = 6;
    std::vector<double> p(h * w);
    for (double& v : p) v = u(gen);
    BinaryMask gt(h, w);
    for (int i = 0; i < h * w; ++i) gt.set(i / w, i % w, bit(gen));
    if (gt.empty()) gt.set(2, 2);
    const Box box(1, 1, 4, 4);
    auto check = [&](const char* name, auto&& fn) {
      const LossValue base = fn(soft(h, w, p));
      for (int i = 0; i < h * w; ++i) {
        std::vector<double> hi = p, lo = p;
        hi[i] += kStep;
        lo[i] -= kStep;
        const double f0 = base.value;
        const double f_hi = fn(soft(h, w, hi)).value;
        const double f_lo = fn(soft(h, w, lo)).value;
        ++total;
        // Skip points where a max switches inside the stencil.
        if (std::abs((f_hi - f0) - (f0 - f_lo)) > 1e-6) {
          ++skipped;
          continue;
        }
        const double fd = (f_hi - f_lo) / (2 * kStep);
        const double a = base.grad[i];
        const double denom = std::max({std::abs(a), std::abs(fd), 1e-8});
        if (std::abs(a - fd) / denom >= 1e-4 && std::abs(a - fd) >= 1e-10) {
          MESSAGE(std::string(name));
          ++worst_count;
        }
      }
    };
    check("dice", [&](const SoftMask& s) { return dice_loss(s, gt); });
    check("bce", [&](const SoftMask& s) { return bce_loss(s, gt); });
    check("proj", [&](const SoftMask& s) { return projection_loss(s, box); });
  }
  CHECK(worst_count == 0);
  CHECK(skipped * 50 < total);
}

}  // namespace groundhog
