#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "tgmc/checkpoint.hpp"
#include "tgmc/gradcheck.hpp"
#include "tgmc/optim.hpp"
#include "tgmc/rng.hpp"
#include "tgmc/tensor.hpp"

using namespace tgmc;

namespace {

MatrixD random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  MatrixD m(r, c);
  for (auto& v : m.flat()) v = rng.uniform(-1.0, 1.0);
  return m;
}

}  // namespace

TEST(Kernels, IdentityMatmul) {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix i{{1, 0}, {0, 1}};
  EXPECT_EQ(matmul(a, i), a);
}

TEST(Kernels, Distributivity) {
  Rng rng(1);
  const auto a = random_matrix(rng, 3, 3).cast<float>();
  const auto b = random_matrix(rng, 3, 3).cast<float>();
  const auto c = random_matrix(rng, 3, 3).cast<float>();
  EXPECT_LT(max_abs_diff(matmul(a, add(b, c)), add(matmul(a, b), matmul(a, c))), 1e-5f);
}

TEST(Kernels, MatmulMatchesNaiveLoops) {
  Rng rng(2);
  const auto a = random_matrix(rng, 4, 5);
  const auto b = random_matrix(rng, 5, 2);
  const auto p = matmul(a, b);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 5; ++k) acc += a(i, k) * b(k, j);
      EXPECT_EQ(p(i, j), acc);
    }
  EXPECT_LT(max_abs_diff(matmul_nt(a, transpose(b)), p), 1e-12);
  EXPECT_LT(max_abs_diff(matmul_tn(transpose(a), b), p), 1e-12);
}

TEST(Kernels, ShapeMismatchThrows) {
  EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
  EXPECT_THROW(add(Matrix(2, 3), Matrix(3, 2)), ShapeError);
  EXPECT_THROW(hadamard(Matrix(1, 3), Matrix(3, 1)), ShapeError);
}

TEST(Kernels, TransposeAndHadamard) {
  const Matrix a{{1, 2, 3}, {4, 5, 6}};
  const auto t = transpose(a);
  EXPECT_EQ(t.rows(), 3u);
  EXPECT_EQ(t(2, 1), 6.0f);
  EXPECT_EQ(hadamard(a, a)(1, 2), 36.0f);
}

TEST(Activations, Values) {
  EXPECT_EQ(relu(-2.0), 0.0);
  EXPECT_EQ(relu(3.0), 3.0);
  EXPECT_EQ(tanh_act(0.0), 0.0);
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(-800.0), 0.0, 1e-300);
  EXPECT_EQ(sigmoid(800.0), 1.0);
}

TEST(Activations, GradientsMatchFiniteDifferences) {
  const double h = 1e-5;
  for (double x : {-1.3, -0.2, 0.7, 2.1}) {
    EXPECT_NEAR(tanh_grad(x), (std::tanh(x + h) - std::tanh(x - h)) / (2 * h), 1e-6);
    EXPECT_NEAR(sigmoid_grad(x), (sigmoid(x + h) - sigmoid(x - h)) / (2 * h), 1e-6);
  }
  EXPECT_EQ(relu_grad(0.5), 1.0);
  EXPECT_EQ(relu_grad(-0.5), 0.0);
}

TEST(Softmax, Examples) {
  const MatrixD zeros(1, 5);
  const auto u = softmax_rowwise(zeros);
  for (double p : u.flat()) EXPECT_DOUBLE_EQ(p, 0.2);
  const MatrixD one{{1, 0, 0, 0, 0}};
  EXPECT_NEAR(softmax_rowwise(one)(0, 0), std::exp(1.0) / (std::exp(1.0) + 4.0), 1e-12);
  EXPECT_NEAR(softmax_rowwise(one)(0, 0), 0.40460, 1e-5);
}

TEST(Softmax, ShiftInvarianceAndStability) {
  const MatrixD x{{0.3, -1.2, 2.5, 0.0, 0.9}};
  MatrixD shifted = x;
  for (auto& v : shifted.flat()) v += 1000.0;
  EXPECT_LT(max_abs_diff(softmax_rowwise(x), softmax_rowwise(shifted)), 1e-12);
  EXPECT_TRUE(softmax_rowwise(shifted).all_finite());
}

TEST(Softmax, RandomRowsSumToOneAndAreMonotone) {
  Rng rng(4);
  Matrix x(1000, 5);
  for (auto& v : x.flat()) v = static_cast<float>(rng.uniform(-20.0, 20.0));
  const auto p = softmax_rowwise(x);
  for (std::size_t r = 0; r < 1000; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 5; ++c) {
      s += p(r, c);
      for (std::size_t k = 0; k < 5; ++k)
        if (x(r, c) > x(r, k)) EXPECT_GE(p(r, c), p(r, k));
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Adam, ZeroGradientLeavesParams) {
  MatrixD w{{1.5, -2.0}};
  MatrixD g(1, 2);
  AdamState<double> st(AdamConfig{0.1});
  adam_step<double>({{"w", &w, &g}}, st);
  EXPECT_EQ(w(0, 0), 1.5);
  EXPECT_EQ(w(0, 1), -2.0);
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  MatrixD w(1, 1);
  MatrixD g(1, 1, 1.0);
  AdamState<double> st(AdamConfig{0.1});
  adam_step<double>({{"w", &w, &g}}, st);
  EXPECT_NEAR(w(0, 0), -0.1, 1e-6);
}

TEST(Adam, MatchesHandRecurrence) {
  MatrixD w(1, 1, 0.5);
  MatrixD g(1, 1);
  AdamState<double> st(AdamConfig{0.01});
  double m = 0, v = 0, x = 0.5;
  for (int t = 1; t <= 20; ++t) {
    const double grad = 2 * x - 0.3 * t;
    g(0, 0) = grad;
    adam_step<double>({{"w", &w, &g}}, st);
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad * grad;
    x -= 0.01 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(w(0, 0), x, 1e-12);
  }
}

TEST(Adam, Deterministic) {
  auto run = [] {
    Rng rng(9);
    Matrix w(3, 3);
    xavier_uniform(w, 3, 3, rng);
    Matrix g(3, 3);
    AdamState<float> st;
    for (int k = 0; k < 50; ++k) {
      for (auto& v : g.flat()) v = static_cast<float>(rng.normal());
      adam_step<float>({{"w", &w, &g}}, st);
    }
    return w;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, RejectsNonFiniteAndShapeErrors) {
  MatrixD w(1, 2, 1.0);
  MatrixD g{{0.5, std::nan("")}};
  AdamState<double> st;
  EXPECT_THROW(adam_step<double>({{"w", &w, &g}}, st), NonFiniteError);
  EXPECT_EQ(w(0, 0), 1.0);
  MatrixD bad(2, 1);
  EXPECT_THROW(adam_step<double>({{"w", &w, &bad}}, st), ShapeError);
}

TEST(Dropout, IdentityCases) {
  Rng rng(5);
  const Matrix x(4, 4, 2.0f);
  EXPECT_EQ(dropout_apply(x, {0.0, Mode::train}, rng), x);
  EXPECT_EQ(dropout_apply(x, {0.3, Mode::eval}, rng), x);
  EXPECT_THROW(dropout_apply(x, {1.0, Mode::train}, rng), ValidationError);
}

TEST(Dropout, ExpectationPreserved) {
  Rng rng(6);
  const MatrixD ones(1, 100000, 1.0);
  const auto y = dropout_apply(ones, {0.3, Mode::train}, rng);
  double sum = 0.0;
  for (double v : y.flat()) {
    EXPECT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.7) < 1e-12);
    sum += v;
  }
  EXPECT_NEAR(sum / 100000.0, 1.0, 0.01);
}

TEST(Init, GlorotRange) {
  Rng rng(7);
  Matrix w(30, 20);
  xavier_uniform(w, 20, 30, rng);
  const float s = std::sqrt(6.0f / 50.0f);
  float lo = 0, hi = 0;
  for (float v : w.flat()) {
    EXPECT_LE(std::abs(v), s);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_LT(lo, -0.8f * s);
  EXPECT_GT(hi, 0.8f * s);
}

TEST(RngTest, StreamsAreReproducibleAndDistinct) {
  Rng a(42), b(42);
  for (int k = 0; k < 10; ++k) EXPECT_EQ(a.next_u64(), b.next_u64());
  Rng s1 = Rng(42).split(1), s2 = Rng(42).split(2);
  EXPECT_NE(s1.next_u64(), s2.next_u64());
  Rng c(1);
  for (int k = 0; k < 1000; ++k) {
    const double u = c.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(c.below(7), 7u);
  }
}

TEST(GradCheck, Square) {
  MatrixD w(1, 1, 3.0), g(1, 1, 6.0);
  const auto r = gradient_check([&] { return w(0, 0) * w(0, 0); }, {{"w", &w, &g}});
  EXPECT_LT(r.max_relative_error, 1e-8);
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(w(0, 0), 3.0);
}

TEST(GradCheck, WrongGradientIsCaught) {
  MatrixD w(1, 1, 3.0), g(1, 1, 12.0);
  const auto r = gradient_check([&] { return w(0, 0) * w(0, 0); }, {{"w", &w, &g}});
  EXPECT_NEAR(r.max_relative_error, 0.5, 1e-6);
  EXPECT_FALSE(r.passed());
  EXPECT_EQ(r.worst_param, "w");
}

TEST(GradCheck, NonFiniteLossThrows) {
  MatrixD w(1, 1, 1.0), g(1, 1);
  EXPECT_THROW(gradient_check([&] { return std::log(-w(0, 0)); }, {{"w", &w, &g}}), NonFiniteError);
}

TEST(CheckpointTest, RoundTripAndLayout) {
  Checkpoint ckpt;
  Matrix a{{1.5f, -2.0f}, {0.25f, 3.0f}};
  Matrix b(1, 3, 7.0f);
  ckpt.put("a", a);
  ckpt.put("b/c", b);
  std::stringstream buf;
  ckpt.write(buf);
  const auto bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 8), "TGMCCKP1");
  // magic + count + 2 table rows + 7 floats
  EXPECT_EQ(bytes.size(), 8u + 4u + (4u + 1u + 8u) + (4u + 3u + 8u) + 7u * 4u);
  const auto back = Checkpoint::read(buf);
  Matrix a2(2, 2), b2(1, 3);
  back.get("a", a2);
  back.get("b/c", b2);
  EXPECT_EQ(a2, a);
  EXPECT_EQ(b2, b);
  Matrix wrong(3, 3);
  EXPECT_THROW(back.get("a", wrong), ShapeError);
  EXPECT_THROW(back.at("missing"), MissingArtifactError);
}

TEST(CheckpointTest, FileWithSidecar) {
  const auto path = std::filesystem::temp_directory_path() / "tgmc_numerics.ckpt";
  Checkpoint ckpt;
  ckpt.put("x", Matrix(2, 2, 1.0f));
  ckpt.save(path, {{"seed", 42}});
  EXPECT_EQ(Checkpoint::load_metadata(path).at("seed"), 42);
  EXPECT_EQ(Checkpoint::load(path).at("x")(1, 1), 1.0f);
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".json");
  EXPECT_THROW(Checkpoint::load(path), MissingArtifactError);
}
