#include "aerostitch/imu_integration.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

namespace aerostitch {
namespace {

constexpr double kPi = std::numbers::pi;

struct Signal {
  std::vector<double> t;
  std::vector<Vec3> a;
};

// Uniform grid with `intervals` steps on [t0, t1]; f gives the x-axis value.
template <typename F>
Signal sample(double t0, double t1, std::size_t intervals, F f) {
  Signal s;
  for (std::size_t i = 0; i <= intervals; ++i) {
    const double t = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(intervals);
    s.t.push_back(t);
    s.a.emplace_back(f(t), 0.0, 0.0);
  }
  return s;
}

TEST(IntegrateTrapezoid, ZeroInputStaysAtRest) {
  const auto s = sample(0.0, 2.0, 37, [](double) { return 0.0; });
  const auto track = integrate_trapezoid(s.t, s.a, Vec3::Zero(), Vec3::Zero());
  for (const auto& x : track.position) EXPECT_EQ(x, Vec3::Zero());
}

TEST(IntegrateTrapezoid, ConstantAccelerationIsExact) {
  const auto s = sample(0.0, 1.0, 100, [](double) { return 2.0; });
  const auto track = integrate_trapezoid(s.t, s.a, Vec3::Zero(), Vec3::Zero());
  EXPECT_NEAR(track.velocity.back().x(), 2.0, 1e-12);
  EXPECT_NEAR(track.position.back().x(), 1.0, 1e-12);
  ASSERT_EQ(track.t.size(), s.t.size());
  for (std::size_t i = 0; i < s.t.size(); ++i) {
    EXPECT_NEAR(track.position[i].x(), s.t[i] * s.t[i], 1e-12);
  }
}

TEST(IntegrateTrapezoid, SineMatchesAnalyticAntiderivative) {
  // x(t) = t - sin(t) for a = sin(t), v0 = x0 = 0.
  const auto s = sample(0.0, kPi, static_cast<std::size_t>(std::lround(kPi / 0.001)),
                        [](double t) { return std::sin(t); });
  const auto track = integrate_trapezoid(s.t, s.a, Vec3::Zero(), Vec3::Zero());
  EXPECT_NEAR(track.position.back().x(), kPi, 1e-5);
}

TEST(IntegrateTrapezoid, Preconditions) {
  std::vector<double> one{0.0};
  std::vector<Vec3> a1{Vec3::Zero()};
  try {
    integrate_trapezoid(one, a1, Vec3::Zero(), Vec3::Zero());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientSamples);
  }
  std::vector<double> t{0.0, 0.2, 0.1};
  std::vector<Vec3> a(3, Vec3::Zero());
  try {
    integrate_trapezoid(t, a, Vec3::Zero(), Vec3::Zero());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonMonotoneTime);
  }
}

TEST(IntegrateSimpson, QuadraticAccelerationIsExact) {
  // a = t^2 -> x = t^4 / 12.
  const auto s = sample(0.0, 1.0, 100, [](double t) { return t * t; });
  const auto track = integrate_simpson(s.t, s.a, Vec3::Zero(), Vec3::Zero());
  EXPECT_NEAR(track.position.back().x(), 1.0 / 12.0, 1e-12);
  for (std::size_t i = 0; i < s.t.size(); ++i) {
    const double t = s.t[i];
    EXPECT_NEAR(track.velocity[i].x(), t * t * t / 3.0, 1e-12) << "node " << i;
    EXPECT_NEAR(track.position[i].x(), t * t * t * t / 12.0, 1e-12) << "node " << i;
  }
}

TEST(IntegrateSimpson, ThreeSamplesHandleTheHalfPanel) {
  const auto s = sample(0.0, 1.0, 2, [](double t) { return 3.0 - t; });
  const auto track = integrate_simpson(s.t, s.a, Vec3::Zero(), Vec3::Zero());
  // v = 3t - t^2/2, x = 1.5 t^2 - t^3/6.
  EXPECT_NEAR(track.velocity[1].x(), 1.5 - 0.125, 1e-14);
  EXPECT_NEAR(track.position[2].x(), 1.5 - 1.0 / 6.0, 1e-14);
}

TEST(IntegrateSimpson, ExponentialMatchesAnalyticAntiderivative) {
  // x(t) = e^t - 1 - t.
  const auto s = sample(0.0, 1.0, 1000, [](double t) { return std::exp(t); });
  const auto track = integrate_simpson(s.t, s.a, Vec3::Zero(), Vec3::Zero());
  EXPECT_NEAR(track.position.back().x(), std::exp(1.0) - 2.0, 1e-9);
}

TEST(IntegrateSimpson, Preconditions) {
  const auto even = sample(0.0, 1.0, 3, [](double) { return 0.0; });
  try {
    integrate_simpson(even.t, even.a, Vec3::Zero(), Vec3::Zero());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SimpsonParity);
  }
  std::vector<double> t{0.0, 0.1, 0.25};
  std::vector<Vec3> a(3, Vec3::Zero());
  try {
    integrate_simpson(t, a, Vec3::Zero(), Vec3::Zero());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonUniformGrid);
  }
}

double final_error(IntegrationMethod method, std::size_t intervals, bool use_exp) {
  const double t1 = use_exp ? 1.0 : kPi;
  const auto s = use_exp ? sample(0.0, t1, intervals, [](double t) { return std::exp(t); })
                         : sample(0.0, t1, intervals, [](double t) { return std::sin(t); });
  const auto track = method == IntegrationMethod::simpson
                         ? integrate_simpson(s.t, s.a, Vec3::Zero(), Vec3::Zero())
                         : integrate_trapezoid(s.t, s.a, Vec3::Zero(), Vec3::Zero());
  const double exact = use_exp ? std::exp(1.0) - 2.0 : kPi;
  return std::abs(track.position.back().x() - exact);
}

TEST(Integration, ConvergenceOrders) {
  for (bool use_exp : {false, true}) {
    for (std::size_t n : {16u, 32u, 64u}) {
      const double trap = std::log2(final_error(IntegrationMethod::trapezoid, n, use_exp) /
                                    final_error(IntegrationMethod::trapezoid, 2 * n, use_exp));
      const double simp = std::log2(final_error(IntegrationMethod::simpson, n, use_exp) /
                                    final_error(IntegrationMethod::simpson, 2 * n, use_exp));
      EXPECT_GE(trap, 2.0) << "trapezoid, n=" << n << (use_exp ? " exp" : " sin");
      EXPECT_GE(simp, 4.0) << "simpson, n=" << n << (use_exp ? " exp" : " sin");
    }
  }
}

TEST(Integration, Linearity) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  std::vector<double> t;
  std::vector<Vec3> a, b, combo;
  const double alpha = 1.7, beta = -0.6;
  for (int i = 0; i < 41; ++i) {
    t.push_back(0.05 * i);
    a.emplace_back(g(rng), g(rng), g(rng));
    b.emplace_back(g(rng), g(rng), g(rng));
    combo.push_back(alpha * a.back() + beta * b.back());
  }
  for (auto method : {IntegrationMethod::trapezoid, IntegrationMethod::simpson}) {
    auto run = [&](const std::vector<Vec3>& acc) {
      return method == IntegrationMethod::simpson ? integrate_simpson(t, acc, Vec3::Zero(), Vec3::Zero())
                                                  : integrate_trapezoid(t, acc, Vec3::Zero(), Vec3::Zero());
    };
    const auto ta = run(a), tb = run(b), tc = run(combo);
    for (std::size_t i = 0; i < t.size(); ++i) {
      EXPECT_LT((tc.position[i] - (alpha * ta.position[i] + beta * tb.position[i])).norm(), 1e-10);
    }
  }
}

TEST(Integration, TimeReversalReturnsVelocity) {
  // Integrate a(t) on [0, T], then -a(2T - t) on [T, 2T]: velocity goes back to v0.
  // a(T) = 0 keeps the sampled profile single-valued at the turn.
  const double horizon = 2.0;
  const std::size_t n = 200;
  std::vector<double> t;
  std::vector<Vec3> acc;
  auto a = [&](double s) { return Vec3(std::sin(3 * s), std::cos(s), s * s) * (horizon - s); };
  for (std::size_t i = 0; i <= 2 * n; ++i) {
    const double s = horizon * static_cast<double>(i) / n;
    t.push_back(s);
    acc.push_back(s <= horizon ? a(s) : Vec3(-a(2 * horizon - s)));
  }
  const Vec3 v0(0.3, -0.2, 1.0);
  const auto trap = integrate_trapezoid(t, acc, v0, Vec3::Zero());
  const auto simp = integrate_simpson(t, acc, v0, Vec3::Zero());
  EXPECT_LT((trap.velocity.back() - v0).norm(), 1e-9);
  EXPECT_LT((simp.velocity.back() - v0).norm(), 1e-9);
}

TEST(RotateToWorld, HoverIsEquilibrium) {
  ImuSample s;
  s.accel_body = Vec3(0, 0, 9.81);
  EXPECT_LT(rotate_to_world(s, Vec3(0, 0, 9.81)).norm(), 1e-15);
}

TEST(RotateToWorld, QuarterYawPermutesAxes) {
  ImuSample s;
  s.attitude.yaw = kPi / 2;
  s.accel_body = Vec3(1, 0, 9.81);
  EXPECT_LT((rotate_to_world(s, Vec3(0, 0, 9.81)) - Vec3(0, 1, 0)).norm(), 1e-12);
}

TEST(RotateToWorld, InvertsTheForwardModel) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> angle(-1.2, 1.2), acc(-3.0, 3.0);
  const Vec3 g(0, 0, 9.81);
  for (int i = 0; i < 100; ++i) {
    ImuSample s;
    s.attitude = {angle(rng), angle(rng), 2.5 * angle(rng)};
    const Vec3 truth(acc(rng), acc(rng), acc(rng));
    s.accel_body = body_to_world(s.attitude).transpose() * (g + truth);
    EXPECT_LT((rotate_to_world(s, g) - truth).norm(), 1e-10);
  }
}

TEST(RotateToWorld, RejectsNonFinite) {
  ImuSample s;
  s.attitude.pitch = std::nan("");
  try {
    rotate_to_world(s, Vec3(0, 0, 9.81));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteInput);
  }
}

std::vector<ImuSample> hover_log(double duration, double rate, double altitude) {
  std::vector<ImuSample> log;
  const auto n = static_cast<std::size_t>(duration * rate);
  for (std::size_t i = 0; i <= n; ++i) {
    ImuSample s;
    s.t = static_cast<double>(i) / rate;
    s.accel_body = Vec3(0, 0, 9.81);
    s.altitude = altitude;
    log.push_back(s);
  }
  return log;
}

TEST(PosesAtCaptures, ZeroAccelerationStaysAtOrigin) {
  const auto log = hover_log(2.0, 100.0, 20.0);
  const std::vector<double> captures{0.0, 0.505, 1.0, 2.0};
  const PoseEstimate initial(0.0, Vec3(0, 0, 20), {});
  for (auto method : {IntegrationMethod::trapezoid, IntegrationMethod::simpson}) {
    IntegrationConfig cfg;
    cfg.method = method;
    const auto poses = poses_at_captures(log, captures, initial, cfg);
    ASSERT_EQ(poses.size(), captures.size());
    for (std::size_t i = 0; i < poses.size(); ++i) {
      EXPECT_LT(poses[i].position().head<2>().norm(), 1e-12);
      EXPECT_DOUBLE_EQ(poses[i].altitude(), 20.0);
      EXPECT_DOUBLE_EQ(poses[i].t(), captures[i]);
    }
  }
}

TEST(PosesAtCaptures, QuadraticTrajectoryWithAttitude) {
  // p(t) = (1 + 0.5 t + 0.3 t^2, -2 t + 0.25 t^2, 18 + 0.4 t^2)
  auto p = [](double t) { return Vec3(1 + 0.5 * t + 0.3 * t * t, -2 * t + 0.25 * t * t, 18 + 0.4 * t * t); };
  const Vec3 acc(0.6, 0.5, 0.8);
  const Vec3 g(0, 0, 9.81);
  std::vector<ImuSample> log;
  for (int i = 0; i <= 400; ++i) {
    ImuSample s;
    s.t = i / 200.0;
    s.attitude = {0.05 * std::sin(s.t), 0.1 * s.t, 0.3 + 0.2 * s.t};
    s.accel_body = body_to_world(s.attitude).transpose() * (acc + g);
    s.altitude = p(s.t).z();
    log.push_back(s);
  }
  IntegrationConfig cfg;
  cfg.initial_velocity = Vec3(0.5, -2.0, 0.0);
  const std::vector<double> captures{0.25, 1.0, 1.73, 2.0};
  for (auto method : {IntegrationMethod::trapezoid, IntegrationMethod::simpson}) {
    cfg.method = method;
    const auto poses = poses_at_captures(log, captures, PoseEstimate(0.0, p(0.0), {}), cfg);
    for (std::size_t i = 0; i < captures.size(); ++i) {
      // Linear interpolation between grid points adds O(dt^2) error off-grid.
      EXPECT_LT((poses[i].position().head<2>() - p(captures[i]).head<2>()).norm(), 1e-5);
    }
    EXPECT_LT((poses[1].position() - p(1.0)).norm(), 1e-9);
    EXPECT_NEAR(poses[3].attitude().yaw, 0.7, 1e-12);
  }
}

TEST(PosesAtCaptures, NearestSampleSuppliesAttitudeAndAltitude) {
  auto log = hover_log(1.0, 10.0, 20.0);
  for (auto& s : log) {
    s.attitude.yaw = s.t;
    s.altitude = 20.0 + s.t;
  }
  const auto poses = poses_at_captures(log, std::vector<double>{0.34, 0.36}, PoseEstimate(0, Vec3(0, 0, 20), {}), {});
  EXPECT_NEAR(poses[0].attitude().yaw, 0.3, 1e-12);
  EXPECT_NEAR(poses[1].attitude().yaw, 0.4, 1e-12);
  EXPECT_NEAR(poses[0].altitude(), 20.3, 1e-12);
}

TEST(PosesAtCaptures, CaptureOutsideLogIsOutOfRange) {
  const auto log = hover_log(1.0, 100.0, 20.0);
  for (double c : {-0.01, 1.01}) {
    try {
      poses_at_captures(log, std::vector<double>{c}, PoseEstimate(0, Vec3(0, 0, 20), {}), {});
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::OutOfRange);
    }
  }
}

TEST(IntegrationConfig, GravityMagnitudeGuard) {
  IntegrationConfig cfg;
  cfg.gravity = Vec3(0, 0, -1.62);
  EXPECT_THROW(cfg.validate(), Error);
  cfg.allow_any_gravity = true;
  EXPECT_NO_THROW(cfg.validate());
}

TEST(ImuCsv, ParsesAndNormalizesYaw) {
  std::istringstream in(
      "t,ax,ay,az,roll,pitch,yaw,alt\n"
      "0,0,0,9.81,0,0,0,20\n"
      "0.01,0.1,-0.2,9.8,0.01,0.02,4.0,20.5\n");
  const auto log = read_imu_csv(in);
  ASSERT_EQ(log.size(), 2u);
  EXPECT_NEAR(log[1].attitude.yaw, 4.0 - 2 * kPi, 1e-15);
  EXPECT_DOUBLE_EQ(log[1].altitude, 20.5);
}

TEST(ImuCsv, RejectsMalformedInput) {
  const char* bad[] = {
      "t,ax,ay,az,roll,pitch,yaw\n0,0,0,0,0,0,0\n",
      "t,ax,ay,az,roll,pitch,yaw,alt\n0,0,0,9.81,0,0,0\n",
      "t,ax,ay,az,roll,pitch,yaw,alt\n0,0,0,9.81,0,0,0,20\n0,0,0,9.81,0,0,0,20\n",
      "t,ax,ay,az,roll,pitch,yaw,alt\n0,0,0,9.81,0,0,0,-1\n",
      "t,ax,ay,az,roll,pitch,yaw,alt\n0,0,x,9.81,0,0,0,20\n",
  };
  for (const char* text : bad) {
    std::istringstream in(text);
    try {
      read_imu_csv(in);
      FAIL() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ParseError) << text;
    }
  }
}

TEST(ImuCsv, WriteThenReadIsLossless) {
  std::vector<ImuSample> log;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 20; ++i) {
    ImuSample s;
    s.t = i * 0.005 + 1e-3 * u(rng) * 0.1;
    s.accel_body = Vec3(u(rng), u(rng), 9.81 + u(rng));
    s.attitude = {u(rng), u(rng), 3.0 * u(rng)};
    s.altitude = 20 + u(rng);
    log.push_back(s);
  }
  std::ostringstream out;
  write_imu_csv(out, log);
  std::istringstream in(out.str());
  const auto back = read_imu_csv(in);
  ASSERT_EQ(back.size(), log.size());
  for (std::size_t i = 0; i < log.size(); ++i) {
    EXPECT_EQ(back[i].t, log[i].t);
    EXPECT_EQ(back[i].accel_body, log[i].accel_body);
    EXPECT_EQ(back[i].attitude.yaw, log[i].attitude.yaw);
    EXPECT_EQ(back[i].altitude, log[i].altitude);
  }
}

}  // namespace
}  // namespace aerostitch
