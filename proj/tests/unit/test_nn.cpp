#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "oracles.hpp"
#include "posecast/errors.hpp"
#include "posecast/nn/adam.hpp"
#include "posecast/nn/checkpoint.hpp"
#include "posecast/nn/layers.hpp"

using namespace posecast;
using namespace posecast::nn;
using posecast::testing::central_difference;
using posecast::testing::masked;
using posecast::testing::screened_central_difference;
using posecast::testing::pick;
using posecast::testing::relative_error;

namespace {

LinearLayer make_linear(Tensor w, Tensor b) {
  LinearLayer l;
  l.weight = Parameter{"w", std::move(w), {}};
  l.bias = Parameter{"b", std::move(b), {}};
  return l;
}

}  // namespace

TEST(Linear, IdentityWeights) {
  auto layer = make_linear(Tensor::from_rows({{1, 0}, {0, 1}}), Tensor({2}, {0, 0}));
  Tape tape;
  Binder bind(tape, true);
  Var y = layer.forward(bind, tape.constant(Tensor({1, 2}, {3, 4})));
  EXPECT_EQ(y.value().vec(), (std::vector<float>{3, 4}));
}

TEST(Linear, ScalarAffine) {
  auto layer = make_linear(Tensor::from_rows({{2}}), Tensor({1}, {1}));
  Tape tape;
  Binder bind(tape, true);
  Var y = layer.forward(bind, tape.constant(Tensor({1, 1}, {3})));
  EXPECT_FLOAT_EQ(y.value().item(), 7.0f);
}

TEST(Linear, MatchesNaiveMatmulOracle) {
  Rng rng(7);
  LinearLayer layer("fc", 13, 11, rng);
  layer.bias.value = rng.normal_tensor({11});
  Tensor x = rng.normal_tensor({5, 13});
  Tape tape;
  Binder bind(tape, true);
  Var y = layer.forward(bind, tape.constant(x));
  auto expected = posecast::testing::naive_linear(x.vec(), 5, 13, layer.weight.value.vec(), layer.bias.value.vec(), 11);
  ASSERT_EQ(y.value().size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(y.value()[i], expected[i], 1e-6 * (1 + std::abs(expected[i])));
}

TEST(Linear, ShapeMismatchNamesBothShapes) {
  Rng rng(1);
  LinearLayer layer("fc", 4, 2, rng);
  Tape tape;
  Binder bind(tape, true);
  try {
    layer.forward(bind, tape.constant(Tensor({3, 5})));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[3, 5]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2, 4]"), std::string::npos) << msg;
  }
}

TEST(LeakyRelu, PiecewiseValues) {
  Tape tape;
  Var y = leaky_relu(tape.constant(Tensor({3}, {-1, 0, 2})), 0.2f);
  EXPECT_FLOAT_EQ(y.value()[0], -0.2f);
  EXPECT_FLOAT_EQ(y.value()[1], 0.0f);
  EXPECT_FLOAT_EQ(y.value()[2], 2.0f);
}

TEST(LeakyRelu, PositiveInputIsIdentity) {
  Tape tape;
  Tensor x({4}, {0.5f, 1, 2, 30});
  EXPECT_EQ(leaky_relu(tape.constant(x), 0.2f).value(), x);
}

TEST(LeakyRelu, GradientIsSlopeOnNegativeSide) {
  for (float at : {-1.0f, -2.0f}) {
    Tape tape;
    Var x = tape.leaf(Tensor::scalar(at));
    auto g = tape.grad(sum_all(leaky_relu(x, 0.2f)), std::vector<Var>{x});
    EXPECT_FLOAT_EQ(g[0].value().item(), 0.2f);
  }
}

TEST(Backward, Square) {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(3));
  auto g = tape.grad(mul(x, x), std::vector<Var>{x});
  EXPECT_FLOAT_EQ(g[0].value().item(), 6.0f);
}

TEST(Backward, NonScalarLossIsContractError) {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, {1, 2}));
  EXPECT_THROW(tape.backward(mul(x, x)), ContractError);
}

TEST(Backward, AccumulatesIntoBoundParameters) {
  Parameter p{"p", Tensor({2}, {1, -2}), {}};
  Tape tape;
  Var v = tape.param(p);
  tape.backward(sum_all(mul(v, v)));
  EXPECT_FLOAT_EQ(p.grad[0], 2.0f);
  EXPECT_FLOAT_EQ(p.grad[1], -4.0f);
}

TEST(Backward, FrozenParametersReceiveNothing) {
  Parameter p{"p", Tensor({2}, {1, -2}), {}};
  Tape tape;
  Binder bind(tape, false);
  Var x = tape.leaf(Tensor({2}, {3, 4}));
  tape.backward(sum_all(mul(bind(p), x)));
  EXPECT_TRUE(p.grad.empty());
}

// Second derivatives: d/dx of ||d f/dx||^2 for f = sum(leaky(W x)^2) against
// central differences of the first-order gradient.
TEST(Backward, CreateGraphGivesSecondDerivatives) {
  Rng rng(3);
  Tensor w = rng.normal_tensor({4, 3});
  Tensor x0 = rng.normal_tensor({1, 3});
  auto grad_norm_sq = [&](const Tensor& xv, Tensor* dx) {
    Tape tape;
    Var x = tape.leaf(xv);
    Var h = leaky_relu(matmul(x, tape.constant(w), false, true), 0.2f);
    Var f = sum_all(mul(h, h));
    Var g = tape.grad(f, std::vector<Var>{x}, true)[0];
    Var n = sum_all(mul(g, g));
    if (dx) *dx = tape.grad(n, std::vector<Var>{x})[0].value();
    return static_cast<double>(n.value().item());
  };
  Tensor analytic;
  grad_norm_sq(x0, &analytic);
  Tensor probe = x0;
  auto fd = central_difference([&] { return grad_norm_sq(probe, nullptr); }, probe, 1e-3);
  EXPECT_LT(relative_error(pick(analytic), fd), 1e-2);
}

TEST(GradientCheck, LayersAgainstCentralDifferences) {
  // Unit-level smoke over a handful of seeds; the acceptance suite runs 100.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    Mlp mlp("mlp", {6, 8, 5}, rng, false);
    ResidualBlock block("res", 5, rng);
    Tensor x = rng.normal_tensor({3, 6});
    std::vector<Parameter*> params;
    mlp.collect(params);
    block.collect(params);
    auto loss = [&] {
      Tape tape;
      Binder bind(tape, true);
      Var y = block.forward(bind, mlp.forward(bind, tape.constant(x)));
      return static_cast<double>(sum_all(mul(y, y)).value().item());
    };
    zero_grads(params);
    {
      Tape tape;
      Binder bind(tape, true);
      Var y = block.forward(bind, mlp.forward(bind, tape.constant(x)));
      tape.backward(sum_all(mul(y, y)));
    }
    for (auto* p : params) {
      auto fd = screened_central_difference(loss, p->value, 1e-3);
      EXPECT_LT(fd.skipped * 4, p->value.size()) << p->name << " seed " << seed;
      EXPECT_LT(relative_error(masked(pick(p->grad), fd.kept), masked(fd.grad, fd.kept)), 1e-2)
          << p->name << " seed " << seed;
    }
  }
}

TEST(ResidualBlock, ZeroSecondLayerIsIdentityPlusBias) {
  Rng rng(5);
  ResidualBlock block("res", 4, rng);
  block.second.weight.value.fill(0.0f);
  block.second.bias.value = Tensor({4}, {1, 2, 3, 4});
  Tensor x = rng.normal_tensor({2, 4});
  Tape tape;
  Binder bind(tape, true);
  Var y = block.forward(bind, tape.constant(x));
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_FLOAT_EQ(y.value().at(r, c), x.at(r, c) + (c + 1.0f));
}

TEST(Adam, FirstStepMagnitudeIsLearningRate) {
  Parameter p{"w", Tensor({3}, {1, -1, 0.5f}), {}};
  Adam adam({&p}, AdamConfig{.lr = 1e-3f});
  p.grad = Tensor({3}, {0.3f, -7.0f, 1e-2f});
  const Tensor before = p.value;
  adam.step();
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(std::abs(p.value[i] - before[i]), 1e-3, 1e-6);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Parameter p{"w", Tensor({2}, {1, 2}), {}};
  Adam adam({&p}, AdamConfig{.lr = 1e-2f});
  p.zero_grad();
  adam.step();
  EXPECT_EQ(p.value, Tensor({2}, {1, 2}));
}

TEST(Adam, ConvergesOnQuadratic) {
  Parameter w{"w", Tensor::scalar(0.0f), {}};
  Adam adam({&w}, AdamConfig{.lr = 0.1f});
  for (int i = 0; i < 200; ++i) {
    adam.zero_grad();
    Tape tape;
    Var v = add_scalar(tape.param(w), -5.0f);
    tape.backward(mul(v, v));
    adam.step();
  }
  EXPECT_LT(std::abs(w.value.item() - 5.0f), 0.1f);
}

TEST(Adam, NanGradientNamesParameter) {
  Parameter p{"decoder.fc0.weight", Tensor({2}, {1, 2}), {}};
  Adam adam({&p}, AdamConfig{});
  p.grad = Tensor({2}, {0.0f, std::nanf("")});
  try {
    adam.step();
    FAIL();
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("decoder.fc0.weight"), std::string::npos);
  }
  EXPECT_EQ(p.value, Tensor({2}, {1, 2}));
}

TEST(Adam, WeightDecayIsCoupledIntoGradient) {
  // With zero loss gradient, decay alone drives the first step: sign(decay*w)*lr.
  Parameter p{"w", Tensor({2}, {2, -3}), {}};
  Adam adam({&p}, AdamConfig{.lr = 1e-2f, .weight_decay = 1e-3f});
  p.zero_grad();
  adam.step();
  EXPECT_NEAR(p.value[0], 2.0f - 1e-2f, 1e-5);
  EXPECT_NEAR(p.value[1], -3.0f + 1e-2f, 1e-5);
}

TEST(Determinism, SameSeedSameParametersAfterSteps) {
  auto run = [] {
    Rng rng(11);
    Mlp mlp("m", {4, 16, 2}, rng, false);
    std::vector<Parameter*> params;
    mlp.collect(params);
    Adam adam(params, AdamConfig{.lr = 1e-2f});
    Rng data = rng.fork(1);
    for (int k = 0; k < 20; ++k) {
      adam.zero_grad();
      Tape tape;
      Binder bind(tape, true);
      Var y = mlp.forward(bind, tape.constant(data.normal_tensor({8, 4})));
      tape.backward(mean_all(mul(y, y)));
      adam.step();
    }
    std::vector<float> flat;
    for (auto* p : params) flat.insert(flat.end(), p->value.data().begin(), p->value.data().end());
    return flat;
  };
  EXPECT_EQ(run(), run());
}

TEST(Checkpoint, RoundTripsParametersAndMetadata) {
  Rng rng(2);
  Mlp mlp("m", {3, 5, 2}, rng, false);
  std::vector<Parameter*> params;
  mlp.collect(params);
  const auto path = (std::filesystem::temp_directory_path() / "posecast_ckpt_test.cpf").string();
  save_parameters(path, R"({"kind":"test"})", params);
  auto data = read_checkpoint(path);
  EXPECT_EQ(data.metadata, R"({"kind":"test"})");
  Rng other(99);
  Mlp fresh("m", {3, 5, 2}, other, false);
  std::vector<Parameter*> fresh_params;
  fresh.collect(fresh_params);
  assign_parameters(data, fresh_params);
  for (std::size_t i = 0; i < params.size(); ++i) EXPECT_EQ(params[i]->value, fresh_params[i]->value);

  Mlp wrong("m", {3, 6, 2}, other, false);
  std::vector<Parameter*> wrong_params;
  wrong.collect(wrong_params);
  EXPECT_THROW(assign_parameters(data, wrong_params), VersionError);
  std::filesystem::remove(path);
}

TEST(Checkpoint, HeaderIsLittleEndianCpf1) {
  const auto path = (std::filesystem::temp_directory_path() / "posecast_header.cpf").string();
  write_checkpoint(path, "{}", {{"a", Tensor({2}, {1.0f, 2.0f})}});
  std::FILE* f = std::fopen(path.c_str(), "rb");
  unsigned char buf[16];
  ASSERT_EQ(std::fread(buf, 1, 16, f), 16u);
  std::fclose(f);
  EXPECT_EQ(std::string(reinterpret_cast<char*>(buf), 4), "CPF1");
  EXPECT_EQ(buf[4], 1);  // version
  EXPECT_EQ(buf[8], 1);  // one record
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsGarbage) {
  const auto path = (std::filesystem::temp_directory_path() / "posecast_garbage.cpf").string();
  std::FILE* f = std::fopen(path.c_str(), "wb");
  std::fputs("nope", f);
  std::fclose(f);
  EXPECT_THROW(read_checkpoint(path), FormatError);
  std::filesystem::remove(path);
}
