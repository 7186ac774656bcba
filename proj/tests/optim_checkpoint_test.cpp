// Copyright 2026 The tabret Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <bit>
#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "tabret/checkpoint.hpp"
#include "tabret/optim.hpp"
#include "test_util.hpp"

namespace tabret {
namespace {

Tensor<double> param(std::vector<double> v) {
  const size_t n = v.size();
  Tensor<double> t({n}, std::move(v));
  t.requires_grad = true;
  t.zero_grad();
  return t;
}

TEST(Adam, ZeroGradientLeavesParameters) {
  auto p = param({1.0, -2.0, 3.5});
  std::vector<Tensor<double>*> ps{&p};
  AdamState<double> state;
  for (int i = 0; i < 5; ++i) adam_step<double>(ps, state, {});
  EXPECT_EQ(p.data, (std::vector<double>{1.0, -2.0, 3.5}));
  EXPECT_EQ(state.step, 5);
}

TEST(Adam, FirstStepIsBiasCorrectedUnitStep) {
  auto p = param({0.0, 4.0});
  p.grad = {1.0, -3.0};
  std::vector<Tensor<double>*> ps{&p};
  AdamState<double> state;
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  adam_step<double>(ps, state, cfg);
  EXPECT_NEAR(p.data[0], -0.1, 1e-7);
  EXPECT_NEAR(p.data[1], 4.1, 1e-7);
}

TEST(Adam, QuadraticDecreasesMonotonically) {
  auto p = param({5.0});
  std::vector<Tensor<double>*> ps{&p};
  AdamState<double> state;
  AdamConfig cfg;
  cfg.learning_rate = 0.08;
  double prev = std::abs(p.data[0]);
  for (int i = 0; i < 100; ++i) {
    p.grad[0] = 2 * p.data[0];
    adam_step<double>(ps, state, cfg);
    EXPECT_LT(std::abs(p.data[0]), prev) << "step " << i;
    prev = std::abs(p.data[0]);
  }
  EXPECT_LT(prev, 1.0);
}

TEST(Adam, Validation) {
  AdamConfig cfg;
  cfg.learning_rate = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.learning_rate = -1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.learning_rate = 1e-3;
  cfg.beta1 = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  auto p = param({1.0});
  EXPECT_THROW(Adam<double>({&p}, AdamConfig{0.0}), std::invalid_argument);
}

TEST(Adam, DeterministicAcrossRuns) {
  auto run = [] {
    auto p = param({0.3, -0.7, 1.1});
    Adam<double> opt({&p}, {});
    for (int i = 0; i < 20; ++i) {
      for (size_t k = 0; k < 3; ++k) p.grad[k] = std::sin(p.data[k] * (i + 1));
      opt.step();
      opt.zero_grad();
    }
    return p.data;
  };
  EXPECT_EQ(run(), run());
}

TEST(ClipGradNorm, ScalesJointNorm) {
  auto a = param({0, 0});
  auto b = param({0});
  a.grad = {3.0, 0.0};
  b.grad = {4.0};
  std::vector<Tensor<double>*> ps{&a, &b};
  EXPECT_DOUBLE_EQ(clip_grad_norm<double>(ps, 10.0), 5.0);
  EXPECT_EQ(a.grad[0], 3.0);
  EXPECT_DOUBLE_EQ(clip_grad_norm<double>(ps, 1.0), 5.0);
  EXPECT_NEAR(a.grad[0], 0.6, 1e-12);
  EXPECT_NEAR(b.grad[0], 0.8, 1e-12);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Tensor<float> a({2, 3}, std::vector<float>{1.5f, -0.0f, 3e-38f, 1e30f, -7.25f, 0.1f});
  Tensor<float> b({4}, std::vector<float>{9, 8, 7, 6});
  Tensor<float> empty(Shape{0, 5});
  std::vector<NamedTensorRef> refs{{"layer.a", &a}, {"empty", &empty}, {"b", &b}};
  testing::TempDir dir;
  save_checkpoint(dir / "m.ckpt", refs, {{"kind", "test"}, {"n", 3}});
  Checkpoint ck = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(ck.metadata.at("kind"), "test");
  ASSERT_EQ(ck.tensors.size(), 3u);
  const Tensor<float>* la = ck.find("layer.a");
  ASSERT_NE(la, nullptr);
  EXPECT_EQ(la->shape, a.shape);
  for (size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(std::bit_cast<uint32_t>(la->data[i]), std::bit_cast<uint32_t>(a.data[i]));
  EXPECT_EQ(ck.find("b")->data, b.data);
  EXPECT_EQ(ck.find("empty")->shape, empty.shape);
  EXPECT_EQ(ck.find("missing"), nullptr);
}

TEST(Checkpoint, LittleEndianLayout) {
  Tensor<float> a({1}, std::vector<float>{1.0f});
  std::vector<NamedTensorRef> refs{{"a", &a}};
  testing::TempDir dir;
  save_checkpoint(dir / "m.ckpt", refs);
  std::ifstream in(dir / "m.ckpt", std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ASSERT_GE(bytes.size(), 12u);
  uint64_t len = 0;
  for (int i = 7; i >= 0; --i) len = (len << 8) | bytes[static_cast<size_t>(i)];
  ASSERT_EQ(bytes.size(), 8 + len + 4);
  // 1.0f = 0x3f800000, least significant byte first.
  const size_t d = 8 + len;
  EXPECT_EQ(bytes[d], 0x00);
  EXPECT_EQ(bytes[d + 2], 0x80);
  EXPECT_EQ(bytes[d + 3], 0x3f);
  auto header = nlohmann::json::parse(std::string(bytes.begin() + 8, bytes.begin() + 8 + static_cast<long>(len)));
  EXPECT_EQ(header.at("tensors")[0].at("offset"), 0);
}

TEST(Checkpoint, RejectsDamagedFiles) {
  Tensor<float> a({3}, std::vector<float>{1, 2, 3});
  std::vector<NamedTensorRef> refs{{"a", &a}};
  testing::TempDir dir;
  save_checkpoint(dir / "m.ckpt", refs);
  const auto size = std::filesystem::file_size(dir / "m.ckpt");
  std::filesystem::copy_file(dir / "m.ckpt", dir / "short.ckpt");
  std::filesystem::resize_file(dir / "short.ckpt", size - 4);
  EXPECT_THROW(load_checkpoint(dir / "short.ckpt"), DataError);
  std::filesystem::copy_file(dir / "m.ckpt", dir / "long.ckpt");
  std::filesystem::resize_file(dir / "long.ckpt", size + 4);
  EXPECT_THROW(load_checkpoint(dir / "long.ckpt"), DataError);
  std::filesystem::resize_file(dir / "long.ckpt", 5);
  EXPECT_THROW(load_checkpoint(dir / "long.ckpt"), DataError);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), DataError);
}

}  // namespace
}  // namespace tabret
