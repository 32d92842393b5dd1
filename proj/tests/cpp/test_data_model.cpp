#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "auxeff/data_model.hpp"
#include "doctest.h"

using namespace auxeff;

namespace {
std::string temp_path(const char* tag) {
  static int counter = 0;
  std::ostringstream ss;
  ss << "dm_test_" << tag << "_" << counter++ << ".csv";
  return ss.str();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

TEST_CASE("stratum pair mapping round-trips") {
  CHECK(stratum_from_pair(0, 0) == Stratum::Immune);
  CHECK(stratum_from_pair(1, 0) == Stratum::TreatPrevented);
  CHECK(stratum_from_pair(0, 1) == Stratum::TreatCaused);
  CHECK(stratum_from_pair(1, 1) == Stratum::Doomed);
  for (int k = 0; k < kNumStrata; ++k) {
    const auto st = static_cast<Stratum>(k);
    const auto [s0, s1] = stratum_to_pair(st);
    CHECK(stratum_from_pair(s0, s1) == st);
    CHECK(stratum_name(st) != nullptr);
  }
}

TEST_CASE("observed dataset accessors and validation") {
  ObservedDataset d;
  d.x_names = {"x1"};
  for (int i = 0; i < 4; ++i) {
    ObservedUnit u;
    u.x = Eigen::VectorXd::Constant(1, static_cast<double>(i));
    u.a = i % 2;
    u.s = i / 2;
    u.y = 1.5 * i;
    d.units.push_back(u);
  }
  CHECK(d.n() == 4);
  CHECK(d.x_matrix()(3, 0) == 3.0);
  CHECK(d.a_vector().sum() == 2.0);
  CHECK(d.s_vector().sum() == 2.0);
  CHECK(d.y_vector()[2] == 3.0);
  d.validate();

  d.units[1].a = 2;
  CHECK_THROWS_AS(d.validate(), ValidationError);
  d.units[1].a = 1;
  d.units[2].x = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(d.validate(), ValidationError);
}

TEST_CASE("observed csv round-trip") {
  ObservedDataset d;
  d.x_names = {"x1", "x2"};
  for (int i = 0; i < 5; ++i) {
    ObservedUnit u;
    u.x = Eigen::VectorXd::Constant(2, 0.25 * i);
    u.x[1] = -1.0 + i;
    u.a = i % 2;
    u.s = (i * 7) % 2;
    u.y = 0.125 * i - 2.0;
    d.units.push_back(u);
  }
  const auto path = temp_path("obs");
  write_observed_csv(d, path);
  const auto back = load_observed_csv(path);
  REQUIRE(back.n() == d.n());
  CHECK(back.x_names == d.x_names);
  for (std::size_t i = 0; i < d.n(); ++i) {
    CHECK(back.units[i].x == d.units[i].x);
    CHECK(back.units[i].a == d.units[i].a);
    CHECK(back.units[i].s == d.units[i].s);
    CHECK(back.units[i].y == d.units[i].y);
  }
  // writing again produces identical bytes
  const auto path2 = temp_path("obs");
  write_observed_csv(back, path2);
  CHECK(slurp(path) == slurp(path2));
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("complete csv round-trip") {
  CompleteDataset d;
  d.x_names = {"x1"};
  for (int i = 0; i < 4; ++i) {
    CompleteUnit u;
    u.x = Eigen::VectorXd::Constant(1, static_cast<double>(i % 2));
    u.s0 = i % 2;
    u.s1 = i / 2;
    u.y0 = 0.5 * i;
    u.y1 = 0.5 * i + 1.0;
    d.units.push_back(u);
  }
  const auto path = temp_path("complete");
  write_complete_csv(d, path);
  const auto back = load_complete_csv(path);
  REQUIRE(back.n() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(back.units[i].s0 == d.units[i].s0);
    CHECK(back.units[i].s1 == d.units[i].s1);
    CHECK(back.units[i].y0 == d.units[i].y0);
    CHECK(back.units[i].y1 == d.units[i].y1);
    CHECK(back.units[i].stratum() == d.units[i].stratum());
  }
  std::remove(path.c_str());
}

TEST_CASE("survival csv round-trip with auxiliary columns") {
  SurvivalDataset d;
  d.x_names = {"x1"};
  d.aux_names = {"s_screen"};
  d.aux_cols.resize(1);
  for (int i = 0; i < 6; ++i) {
    SurvivalUnit u;
    u.x = Eigen::VectorXd::Constant(1, static_cast<double>(i % 2));
    u.a = i % 2;
    u.s = i % 3 == 0 ? 1 : 0;
    u.time = 0.5 + i;
    u.event = static_cast<EventType>(i % 3);
    u.censor_horizon = 10.0;
    d.units.push_back(u);
    d.aux_cols[0].push_back(i % 2);
  }
  const auto path = temp_path("surv");
  write_survival_csv(d, path);
  const auto back = load_survival_csv(path);
  REQUIRE(back.n() == 6);
  CHECK(back.aux_names == d.aux_names);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(back.units[i].time == d.units[i].time);
    CHECK(back.units[i].event == d.units[i].event);
    CHECK(back.units[i].censor_horizon == d.units[i].censor_horizon);
  }
  CHECK(back.aux_column("s_screen") == d.aux_cols[0]);
  // "s" resolves to the primary auxiliary
  const auto primary = back.aux_column("s");
  for (std::size_t i = 0; i < 6; ++i) CHECK(primary[i] == d.units[i].s);
  CHECK_THROWS_AS(back.aux_column("nope"), ValidationError);
  std::remove(path.c_str());
}

TEST_CASE("csv loader reports the offending cell") {
  const auto path = temp_path("bad");
  {
    std::ofstream out(path);
    out << "x1,a,s,y\n0.5,1,0,1.25\n0.5,oops,0,1.5\n";
  }
  try {
    load_observed_csv(path);
    CHECK(false);
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("oops") != std::string::npos);
    CHECK(msg.find("a") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("csv loader rejects ragged rows and missing columns") {
  const auto path = temp_path("ragged");
  {
    std::ofstream out(path);
    out << "x1,a,s,y\n0.5,1,0\n";
  }
  CHECK_THROWS_AS(load_observed_csv(path), ValidationError);
  {
    std::ofstream out(path);
    out << "x1,a,s\n0.5,1,0\n";
  }
  CHECK_THROWS_AS(load_observed_csv(path), ValidationError);
  std::remove(path.c_str());
}
