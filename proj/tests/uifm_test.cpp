// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "dgd/rng.hpp"
#include "dgd/uifm.hpp"

namespace dgd {
namespace {

ImageTensor random_image(Rng& rng, std::size_t h, std::size_t w, double lo = 0.0, double hi = 1.0) {
  ImageTensor img = make_image(h, w);
  for (double& v : img.data()) v = lo + (hi - lo) * rng.uniform();
  return img;
}

void expect_all_near(const Planar& p, double value, double tol) {
  for (double v : p.data()) EXPECT_NEAR(v, value, tol);
}

TEST(ComposeUnderwater, UnitTransmissionReturnsScene) {
  Rng rng(1);
  const auto j = random_image(rng, 5, 7);
  const auto out = compose_underwater(j, TransmissionMap::uniform(5, 7, 1.0), VeilingLightField::uniform(5, 7, {0.3, 0.6, 0.9}));
  EXPECT_EQ(out, j);
}

TEST(ComposeUnderwater, FloorTransmissionApproachesVeilingLight) {
  Rng rng(2);
  const auto j = random_image(rng, 4, 4);
  const Rgb a{0.2, 0.5, 0.7};
  const auto out = compose_underwater(j, TransmissionMap::uniform(4, 4, 0.0), VeilingLightField::uniform(4, 4, a));
  for (std::size_t i = 0; i < out.pixels(); ++i)
    for (std::size_t c = 0; c < 3; ++c)
      EXPECT_LE(std::abs(out[3 * i + c] - a[c]), kTransmissionFloor * std::abs(j[3 * i + c] - a[c]) + 1e-15);
}

TEST(ComposeUnderwater, ScalarArithmetic) {
  const auto out = compose_underwater(make_image(2, 3, 0.8), TransmissionMap::uniform(2, 3, 0.5),
                                      VeilingLightField::uniform(2, 3, {0.2, 0.2, 0.2}));
  expect_all_near(out, 0.5, 1e-15);
}

TEST(ComposeUnderwater, ShapeMismatchRejected) {
  EXPECT_THROW(compose_underwater(make_image(2, 2), TransmissionMap::uniform(2, 3, 1.0), VeilingLightField::uniform(2, 2, {})),
               InvalidInput);
}

TEST(ComposeUnderwater, ClampCountReported) {
  ImageTensor j = make_image(1, 2, 0.5);
  j[0] = 1.5;  // out-of-range input forces a clamp
  ClampStats stats;
  const auto out = compose_underwater(j, TransmissionMap::uniform(1, 2, 1.0), VeilingLightField::uniform(1, 2, {}), &stats);
  EXPECT_EQ(stats.clamped, 1u);
  EXPECT_EQ(stats.total, 6u);
  EXPECT_DOUBLE_EQ(out[0], 1.0);
}

TEST(ComposeUnderwater, ConvexCombinationStaysInRange) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto j = random_image(rng, 3, 3);
    Planar t = random_image(rng, 3, 3);
    const Rgb a{rng.uniform(), rng.uniform(), rng.uniform()};
    const auto raw = compose_underwater_raw(j, TransmissionMap::from_values(t), VeilingLightField::uniform(3, 3, a));
    for (double v : raw.data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(TransmissionFromDepth, ZeroDepthGivesUnitTransmission) {
  expect_all_near(transmission_from_depth(DepthMap::uniform(3, 3, 0.0), {5.0, 1.0, 0.2}).data, 1.0, 0.0);
}

TEST(TransmissionFromDepth, LnTwoHalves) {
  const double ln2 = std::log(2.0);
  expect_all_near(transmission_from_depth(DepthMap::uniform(2, 2, 1.0), {ln2, ln2, ln2}).data, 0.5, 1e-15);
}

TEST(TransmissionFromDepth, PerChannelValues) {
  const auto t = transmission_from_depth(DepthMap::uniform(1, 1, 2.0), {0.6, 0.1, 0.0});
  EXPECT_NEAR(t.data[0], 0.3012, 5e-5);
  EXPECT_NEAR(t.data[1], 0.8187, 5e-5);
  EXPECT_NEAR(t.data[0], 0.30119421191220214, 1e-15);
  EXPECT_NEAR(t.data[1], 0.8187307530779818, 1e-15);
  EXPECT_EQ(t.data[2], 1.0);
}

TEST(TransmissionFromDepth, StrictlyDecreasingInDepth) {
  double prev = 2.0;
  for (double d = 0.0; d < 5.0; d += 0.25) {
    const double t = transmission_from_depth(DepthMap::uniform(1, 1, d), {0.7, 0.7, 0.7}).data[0];
    EXPECT_LT(t, prev);
    prev = t;
  }
}

TEST(TransmissionFromDepth, FloorApplied) {
  expect_all_near(transmission_from_depth(DepthMap::uniform(1, 1, 1.0), {50, 50, 50}).data, kTransmissionFloor, 0.0);
}

TEST(TransmissionFromDepth, NegativeInputsRejected) {
  EXPECT_THROW(transmission_from_depth(DepthMap::uniform(1, 1, 1.0), {-0.1, 0, 0}), InvalidInput);
  EXPECT_THROW(transmission_from_depth(DepthMap::uniform(1, 1, -1.0), {0.1, 0, 0}), InvalidInput);
}

DuntleyParams params(double alpha, double k, double r, double theta, double n) {
  return DuntleyParams{{alpha, alpha, alpha}, {k, k, k}, r, theta, {n, n, n}};
}

TEST(Duntley, ZeroRangeIsIdentity) {
  Rng rng(4);
  const auto j = random_image(rng, 3, 4);
  EXPECT_EQ(duntley_radiance(j, params(0.7, 0.2, 0.0, 0.3, 0.5)), j);
}

TEST(Duntley, ClosedFormExample) {
  const auto out = duntley_radiance_raw(make_image(1, 1, 0.9), params(0.5, 0.1, 2.0, 0.0, 0.3));
  expect_all_near(out, 0.5328688336741412, 1e-15);
}

TEST(Duntley, ZeroDiffuseReducesToSimplifiedModel) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto j = random_image(rng, 2, 3);
    const Rgb alpha{2 * rng.uniform(), 2 * rng.uniform(), 2 * rng.uniform()};
    const Rgb n{rng.uniform(), rng.uniform(), rng.uniform()};
    const double r = 5 * rng.uniform();
    const DuntleyParams p{alpha, {0, 0, 0}, r, std::numbers::pi * rng.uniform(), n};
    const auto lhs = duntley_radiance_raw(j, p);
    Planar t(2, 3, 3);
    for (std::size_t i = 0; i < t.pixels(); ++i)
      for (std::size_t c = 0; c < 3; ++c) t[3 * i + c] = std::exp(-alpha[c] * r);
    const auto rhs = compose_underwater_raw(j, TransmissionMap{t}, VeilingLightField::uniform(2, 3, n));
    for (std::size_t k = 0; k < lhs.size(); ++k) EXPECT_NEAR(lhs[k], rhs[k], 1e-9);
  }
}

TEST(Duntley, InvalidParametersRejected) {
  const auto j = make_image(1, 1, 0.5);
  EXPECT_THROW(duntley_radiance(j, params(-0.1, 0, 1, 0, 0.5)), InvalidInput);
  EXPECT_THROW(duntley_radiance(j, params(0.1, 0, -1, 0, 0.5)), InvalidInput);
  EXPECT_THROW(duntley_radiance(j, params(0.1, 0, 1, 4.0, 0.5)), InvalidInput);
  EXPECT_THROW(duntley_radiance(j, params(0.1, 0.5, 1, 0, 0.5)), InvalidInput);  // alpha r < K r cos
  EXPECT_NO_THROW(duntley_radiance(j, params(0.1, 0.5, 1, std::numbers::pi / 2, 0.5)));
}

TEST(VeilingLight, UniformImage) {
  const auto a = estimate_veiling_light(make_image(4, 4, 0.5));
  EXPECT_TRUE(a.constant);
  expect_all_near(a.data, 0.5, 1e-15);
}

TEST(VeilingLight, HalfBlackHalfWhite) {
  ImageTensor img = make_image(4, 4, 0.0);
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < 4; ++x)
      for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = 1.0;
  expect_all_near(estimate_veiling_light(img).data, 0.5, 1e-15);
}

TEST(VeilingLight, ScalarsScaleChannels) {
  const auto a = estimate_veiling_light(make_image(3, 3, 0.2, 0.4, 0.1), GrayWorldScalars{2, 1, 1});
  const auto v = a.value();
  EXPECT_NEAR(v[0], 0.4, 1e-15);
  EXPECT_NEAR(v[1], 0.4, 1e-15);
  EXPECT_NEAR(v[2], 0.1, 1e-15);
}

TEST(VeilingLight, LinearInScalarsBelowSaturation) {
  Rng rng(6);
  const auto img = random_image(rng, 6, 5, 0.0, 0.5);
  const double base = estimate_veiling_light(img, {0.9, 1, 1}).value()[0];
  EXPECT_NEAR(estimate_veiling_light(img, {1.8, 1, 1}).value()[0], 2 * base, 1e-15);
}

TEST(VeilingLight, RejectsBadInput) {
  EXPECT_THROW(estimate_veiling_light(ImageTensor{}), InvalidInput);
  EXPECT_THROW(estimate_veiling_light(make_image(1, 1), {0, 1, 1}), InvalidInput);
}

TEST(EstimateTransmission, IdenticalImagesGiveOne) {
  const auto img = make_image(3, 3, 0.8);
  expect_all_near(estimate_transmission(img, img, VeilingLightField::uniform(3, 3, {0.2, 0.3, 0.4})).data, 1.0, 1e-15);
}

TEST(EstimateTransmission, ImageEqualToVeilGivesFloor) {
  const auto a = VeilingLightField::uniform(2, 2, {0.2, 0.3, 0.4});
  expect_all_near(estimate_transmission(a.data, make_image(2, 2, 0.9), a).data, kTransmissionFloor, 0.0);
}

TEST(EstimateTransmission, ScalarArithmetic) {
  const auto t = estimate_transmission(make_image(1, 1, 0.5), make_image(1, 1, 0.9), VeilingLightField::uniform(1, 1, {0.1, 0.1, 0.1}));
  expect_all_near(t.data, 0.5, 1e-15);
}

TEST(EstimateTransmission, SmallDenominatorUsesFloor) {
  ClampStats stats;
  const auto t = estimate_transmission(make_image(1, 1, 0.7), make_image(1, 1, 0.5004),
                                       VeilingLightField::uniform(1, 1, {0.5, 0.5, 0.5}), &stats);
  expect_all_near(t.data, kTransmissionFloor, 0.0);
}

TEST(EstimateTransmission, ReportsClamping) {
  ClampStats stats;
  // (0.9 - 0.1) / (0.5 - 0.1) = 2 exceeds 1.
  estimate_transmission(make_image(1, 2, 0.9), make_image(1, 2, 0.5), VeilingLightField::uniform(1, 2, {0.1, 0.1, 0.1}), &stats);
  EXPECT_EQ(stats.clamped, 6u);
  EXPECT_DOUBLE_EQ(stats.fraction(), 1.0);
}

TEST(EstimateTransmission, RoundTripRecoversTransmission) {
  Rng rng(7);
  int checked = 0;
  while (checked < 200) {
    const Rgb a{rng.uniform(), rng.uniform(), rng.uniform()};
    ImageTensor j = make_image(2, 2);
    Planar t(2, 2, 3);
    bool ok = true;
    for (std::size_t k = 0; k < j.size(); ++k) {
      j[k] = rng.uniform();
      t[k] = 0.1 + 0.9 * rng.uniform();
      const double ch = a[k % 3];
      const double comp = j[k] * t[k] + ch * (1 - t[k]);
      ok = ok && std::abs(j[k] - ch) >= 0.05 && comp >= 0.0 && comp <= 1.0;
    }
    if (!ok) continue;
    const auto veil = VeilingLightField::uniform(2, 2, a);
    const auto i = compose_underwater(j, TransmissionMap{t}, veil);
    const auto back = estimate_transmission(i, j, veil);
    for (std::size_t k = 0; k < t.size(); ++k) ASSERT_NEAR(back.data[k], t[k], 1e-6);
    ++checked;
  }
}

TEST(TransmissionMap, RejectsNaN) {
  Planar p(1, 1, 3, 0.5);
  p[1] = std::nan("");
  EXPECT_THROW(TransmissionMap::from_values(p), InvalidInput);
}

}  // namespace
}  // namespace dgd
