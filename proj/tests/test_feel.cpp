#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/QR>

#include "rsma_iov/errors.hpp"
#include "rsma_iov/feel.hpp"

using namespace rsma_iov;

namespace {

Sample sample(std::initializer_list<double> x, double y) {
  Sample s;
  s.x = Eigen::VectorXd(static_cast<Eigen::Index>(x.size()));
  int i = 0;
  for (double v : x) s.x[i++] = v;
  s.y = y;
  return s;
}

ScaReport schedule(std::vector<double> psi, double delivered) {
  ScaReport r;
  r.final.psi = std::move(psi);
  r.delivered_bits = delivered;
  return r;
}

Dataset concat(const std::vector<Dataset>& shards) {
  Dataset all;
  for (const auto& s : shards) all.insert(all.end(), s.begin(), s.end());
  return all;
}

template <typename F>
void expect_kind(F&& f, ErrorKind kind) {
  try {
    f();
    FAIL("no error thrown");
  } catch (const Error& e) {
    CHECK(e.kind() == kind);
  }
}

}  // namespace

TEST_CASE("least-squares gradient by hand") {
  const Dataset d{sample({1.0}, 0.0)};
  Eigen::VectorXd w(1);
  w << 2.0;
  const auto g = local_gradient(w, d, Loss::kLeastSquares);
  REQUIRE(g.size() == 1);
  CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(local_loss(w, d, Loss::kLeastSquares) == doctest::Approx(2.0));
}

TEST_CASE("gradient vanishes at the exact least-squares solution") {
  Eigen::VectorXd w(2);
  w << 0.5, -1.5;
  Dataset d;
  for (double a : {-1.0, 0.3, 2.0}) {
    auto s = sample({a, 1.0 - a}, 0.0);
    s.y = w.dot(s.x);
    d.push_back(s);
  }
  CHECK(local_gradient(w, d, Loss::kLeastSquares).norm() < 1e-15);
}

TEST_CASE("gradient matches central finite differences") {
  for (Loss loss : {Loss::kLeastSquares, Loss::kLogistic}) {
    const auto shards = synthetic_task(40, 5, 1, loss, 7);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01;
    Eigen::VectorXd w(5);
    for (int i = 0; i < 5; ++i) w[i] = n01(rng);
    const auto g = local_gradient(w, shards[0], loss);
    const double h = 1e-5;
    for (int i = 0; i < 5; ++i) {
      Eigen::VectorXd wp = w, wm = w;
      wp[i] += h;
      wm[i] -= h;
      const double fd =
          (local_loss(wp, shards[0], loss) - local_loss(wm, shards[0], loss)) / (2 * h);
      CHECK(std::abs(fd - g[i]) <= 1e-6 * std::max(1.0, std::abs(g[i])));
    }
  }
}

TEST_CASE("first gradient from a zero model is -(1/n) sum y x") {
  auto shards = synthetic_task(50, 4, 1, Loss::kLeastSquares, 11);
  auto& d = shards[0];
  // center the features
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(4);
  for (const auto& s : d) mean += s.x;
  mean /= static_cast<double>(d.size());
  for (auto& s : d) s.x -= mean;
  Eigen::VectorXd expect = Eigen::VectorXd::Zero(4);
  for (const auto& s : d) expect -= s.y * s.x;
  expect /= static_cast<double>(d.size());
  const auto g = local_gradient(Eigen::VectorXd::Zero(4), d, Loss::kLeastSquares);
  CHECK((g - expect).norm() <= 1e-14 * (1.0 + expect.norm()));
}

TEST_CASE("gradient errors") {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(2);
  expect_kind([&] { local_gradient(w, Dataset{}, Loss::kLeastSquares); }, ErrorKind::kInvalidConfig);
  expect_kind([&] { local_gradient(w, Dataset{sample({1.0}, 1.0)}, Loss::kLeastSquares); },
              ErrorKind::kDimensionMismatch);
}

TEST_CASE("aggregate") {
  Eigen::VectorXd g(3);
  g << 1.0, -2.0, 0.5;
  CHECK(aggregate({g}) == g);
  CHECK(aggregate({g, Eigen::VectorXd(-g)}).norm() == 0.0);
  expect_kind([&] { aggregate({g, Eigen::VectorXd::Zero(2)}); }, ErrorKind::kDimensionMismatch);
  expect_kind([&] { aggregate({}); }, ErrorKind::kDimensionMismatch);

  const auto shards = synthetic_task(90, 6, 3, Loss::kLogistic, 5);
  Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(6, -0.5, 0.5);
  std::vector<Eigen::VectorXd> grads;
  for (const auto& s : shards) grads.push_back(local_gradient(w, s, Loss::kLogistic));
  const auto full = local_gradient(w, concat(shards), Loss::kLogistic);
  CHECK((aggregate(grads) - full).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("weighted aggregate uses shard sizes") {
  Eigen::VectorXd a(1), b(1);
  a << 1.0;
  b << 4.0;
  CHECK(aggregate_weighted({a, b}, {3, 1})[0] == doctest::Approx(1.75));
  CHECK(aggregate({a, b})[0] == doctest::Approx(2.5));
}

TEST_CASE("global update") {
  Eigen::VectorXd w(1), g(1);
  w << 1.0;
  g << 2.0;
  CHECK(global_update(w, g, 0.1)[0] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(global_update(w, g, 0.0) == w);
  CHECK(global_update(w, Eigen::VectorXd::Zero(1), 0.1) == w);
}

TEST_CASE("model bit size") {
  ModelVector m;
  m.parameters = Eigen::VectorXd::Zero(312500);
  CHECK(m.bit_size() == 1e7);
  m.precision_bits = 16;
  CHECK(m.bit_size() == 5e6);
}

TEST_CASE("round latency follows the schedule") {
  std::vector<double> psi(100, 0.0);
  psi[0] = 1.0;
  CHECK(round_latency(psi, 0.05) == doctest::Approx(0.05));
  CHECK(round_latency(std::vector<double>(100, 0.0), 0.05) == 0.0);
  psi[36] = 1.0;
  CHECK(round_latency(psi, 0.05) == doctest::Approx(37 * 0.05));

  const auto shards = synthetic_task(30, 3, 3, Loss::kLeastSquares, 1);
  FeelConfig cfg;
  const Eigen::VectorXd w = Eigen::VectorXd::Zero(3);
  CHECK(feel_round(w, shards, cfg, schedule({1, 0, 0}, 1e7), 0.05, 1e7).latency_s ==
        doctest::Approx(0.05));
  CHECK(feel_round(w, shards, cfg, schedule({0, 0, 0}, 0.0), 0.05, 0.0).latency_s == 0.0);
  expect_kind([&] { feel_round(w, shards, cfg, schedule({1, 1, 0}, 9.9e6), 0.05, 1e7); },
              ErrorKind::kPayloadInfeasible);
}

TEST_CASE("equal shards reproduce centralized gradient descent") {
  for (Loss loss : {Loss::kLeastSquares, Loss::kLogistic}) {
    const auto shards = synthetic_task(300, 8, 3, loss, 21);
    const Dataset all = concat(shards);
    FeelConfig cfg;
    cfg.loss = loss;
    cfg.step_size = 0.5 / smoothness(shards, loss);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(8), c = w;
    const auto sched = schedule({1.0, 0.0}, 1.0);
    for (int r = 0; r < 20; ++r) {
      w = feel_round(w, shards, cfg, sched, 0.05, 1.0).parameters;
      c = c - cfg.step_size * local_gradient(c, all, loss);
      CHECK((w - c).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("step 1/L gives monotone geometric decay") {
  const auto shards = synthetic_task(400, 10, 4, Loss::kLeastSquares, 9);
  FeelConfig cfg;
  cfg.rounds = 30;
  cfg.workers = 4;
  const double L = smoothness(shards, Loss::kLeastSquares);
  cfg.step_size = 1.0 / L;
  const auto curve = run_training(cfg, shards, Eigen::VectorXd::Zero(10),
                                  {schedule({0, 1, 0}, 1e7)}, 0.05, 1e7);
  REQUIRE(curve.size() == 31);
  // Least-squares optimum gives the floor of the excess loss.
  const Dataset all = concat(shards);
  Eigen::MatrixXd X(all.size(), 10);
  Eigen::VectorXd y(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    X.row(i) = all[i].x.transpose();
    y[i] = all[i].y;
  }
  const Eigen::VectorXd w_star = X.colPivHouseholderQr().solve(y);
  const double f_star = global_loss(w_star, shards, Loss::kLeastSquares);
  // Once the excess loss reaches rounding level, only the summation error of
  // the 400-term loss (about n * eps relative) is left.
  const double floor = 400 * 2.2e-16 * f_star;
  for (std::size_t r = 1; r < curve.size(); ++r) {
    CHECK(curve[r].loss <= curve[r - 1].loss + floor);
    CHECK(curve[r].loss - f_star <= (curve[r - 1].loss - f_star) + floor);
    CHECK(curve[r].cumulative_latency_s == doctest::Approx(0.1 * r));
  }
  CHECK(curve.back().loss - f_star < 0.05 * (curve.front().loss - f_star));
}

TEST_CASE("oversized step raises a step-size error") {
  const auto shards = synthetic_task(200, 5, 2, Loss::kLeastSquares, 4);
  FeelConfig cfg;
  cfg.workers = 2;
  cfg.step_size = 5.0 / smoothness(shards, Loss::kLeastSquares);
  expect_kind([&] {
    run_training(cfg, shards, Eigen::VectorXd::Zero(5), {schedule({1}, 1.0)}, 0.05, 1.0);
  }, ErrorKind::kStepSize);
}

TEST_CASE("config and task validation") {
  FeelConfig cfg;
  cfg.step_size = 0.0;
  expect_kind([&] { cfg.validate(); }, ErrorKind::kInvalidConfig);
  CHECK(parse_loss("logistic") == Loss::kLogistic);
  CHECK(std::string(to_string(Loss::kLeastSquares)) == "least-squares");
  expect_kind([&] { parse_loss("hinge"); }, ErrorKind::kInvalidConfig);
  expect_kind([&] { synthetic_task(2, 3, 3, Loss::kLogistic, 1); }, ErrorKind::kInvalidConfig);

  const auto a = synthetic_task(60, 3, 3, Loss::kLogistic, 42);
  const auto b = synthetic_task(60, 3, 3, Loss::kLogistic, 42);
  REQUIRE(a.size() == 3);
  for (int k = 0; k < 3; ++k) {
    REQUIRE(a[k].size() == 20);
    for (int i = 0; i < 20; ++i) {
      CHECK(a[k][i].x == b[k][i].x);
      CHECK(std::abs(a[k][i].y) == 1.0);
    }
  }
}
