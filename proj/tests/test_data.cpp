#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "surt/csv.hpp"
#include "surt/data.hpp"
#include "surt/errors.hpp"

using namespace surt;

namespace {

Dataset small_continuous() {
  Dataset ds;
  ds.x_names = {"x1", "grp"};
  ds.x_kinds = {ColumnKind::Continuous, ColumnKind::Categorical};
  ds.x_levels = {0, 3};
  ds.x = {{0.1, 0.7, 0.4, 0.9}, {0, 2, 1, 0}};
  ds.y_names = {"y1", "y2"};
  ds.y = {{1.0, 3.0, 2.0, 5.0}, {-1.0, 0.5, 0.0, 2.0}};
  return ds;
}

std::string temp_path(const char* name) {
  return std::string("/tmp/surt_test_") + name;
}

}  // namespace

TEST_CASE("mode inference") {
  Dataset ds = small_continuous();
  CHECK(infer_mode(ds) == Mode::Continuous);
  ds.y = {{0, 1, 1, 0}, {1, 1, 0, 0}};
  CHECK(infer_mode(ds) == Mode::Probit);
  ds.y = {{0, 1, 1, 0}, {1, 1, 0.5, 0}};
  CHECK(infer_mode(ds) == Mode::Continuous);
}

TEST_CASE("dataset validation catches each defect") {
  {
    Dataset ds = small_continuous();
    validate_dataset(ds, Mode::Continuous);  // baseline passes
  }
  {
    Dataset ds = small_continuous();
    ds.x[0][2] = NAN;
    CHECK_THROWS_WITH_AS(validate_dataset(ds, Mode::Continuous),
                         doctest::Contains("non-finite"), Error);
  }
  {
    Dataset ds = small_continuous();
    ds.x[1][1] = 3;  // outside 0..2
    CHECK_THROWS_AS(validate_dataset(ds, Mode::Continuous), Error);
  }
  {
    Dataset ds = small_continuous();
    ds.x[1][1] = 1.5;  // non-integral code
    CHECK_THROWS_AS(validate_dataset(ds, Mode::Continuous), Error);
  }
  {
    Dataset ds = small_continuous();
    ds.y[0] = {2.0, 2.0, 2.0, 2.0};
    try {
      validate_dataset(ds, Mode::Continuous);
      FAIL("expected ConstantOutcome");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ConstantOutcome);
    }
  }
  {
    Dataset ds = small_continuous();
    try {
      validate_dataset(ds, Mode::Probit);
      FAIL("expected NonBinaryOutcome");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonBinaryOutcome);
    }
  }
  {
    Dataset ds;
    try {
      validate_dataset(ds, Mode::Continuous);
      FAIL("expected EmptyData");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyData);
    }
  }
}

TEST_CASE("prediction covariates checked against training schema") {
  Dataset ds = small_continuous();
  std::vector<std::vector<double>> ok = {{0.2, 0.3}, {1, 2}};
  validate_covariates_against(ds, ok, ds.x_kinds, ds.x_levels);
  std::vector<std::vector<double>> unseen = {{0.2, 0.3}, {1, 5}};
  try {
    validate_covariates_against(ds, unseen, ds.x_kinds, ds.x_levels);
    FAIL("expected UnknownCategoryLevel");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownCategoryLevel);
  }
}

TEST_CASE("outcome scaler maps to [-0.5, 0.5] and round trips") {
  Dataset ds = small_continuous();
  const OutcomeScaler s = OutcomeScaler::fit(ds.y);
  CHECK(s.scale(0, 1.0) == -0.5);
  CHECK(s.scale(0, 5.0) == 0.5);
  CHECK(s.range(0) == 4.0);
  for (int j = 0; j < ds.d(); ++j)
    for (double v : ds.y[j]) {
      const double sc = s.scale(j, v);
      CHECK(sc >= -0.5);
      CHECK(sc <= 0.5);
      CHECK(s.unscale(j, sc) == doctest::Approx(v).epsilon(1e-14));
    }
  CHECK_THROWS_AS(OutcomeScaler::fit({{1.0, 1.0}}), Error);
}

TEST_CASE("config defaults resolve by mode") {
  ModelConfig c;
  c.resolve(Mode::Continuous, 500, 2);
  CHECK(c.n_mcmc == 5000);
  CHECK(c.n_burnin == 1000);

  ModelConfig c2;
  c2.resolve(Mode::Probit, 1000, 2);
  CHECK(c2.n_mcmc == 10000);
  CHECK(c2.n_burnin == 2000);
  CHECK(c2.nu_prop == doctest::Approx(100.0));

  ModelConfig c3;
  c3.resolve(Mode::Probit, 1000, 3);
  CHECK(c3.nu_prop == doctest::Approx(500.0));

  ModelConfig bad;
  bad.m = 0;
  CHECK_THROWS_AS(bad.validate(2), Error);
  ModelConfig bad2;
  bad2.n_mcmc = 100;
  bad2.n_burnin = 100;
  CHECK_THROWS_AS(bad2.validate(2), Error);
}

TEST_CASE("csv io round trip at full precision") {
  const std::string path = temp_path("roundtrip.csv");
  std::vector<std::string> names = {"a", "b"};
  std::vector<std::vector<double>> cols = {
      {1.0 / 3.0, -2.5e-17, 1e300}, {0.0, 42.0, -0.1}};
  write_csv(path, names, cols);
  const CsvTable t = read_csv(path);
  CHECK(t.names == names);
  REQUIRE(t.columns.size() == 2);
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 3; ++i) CHECK(t.columns[c][i] == cols[c][i]);
  std::remove(path.c_str());
}

TEST_CASE("csv parse failures") {
  const std::string path = temp_path("bad.csv");
  {
    std::ofstream out(path);
    out << "a,b\n1,2\n3\n";
  }
  CHECK_THROWS_AS(read_csv(path), Error);
  {
    std::ofstream out(path);
    out << "a,b\n1,x\n";
  }
  CHECK_THROWS_AS(read_csv(path), Error);
  {
    std::ofstream out(path);
    out << "a,a\n1,2\n";
  }
  CHECK_THROWS_AS(read_csv(path), Error);
  {
    std::ofstream out(path);
    out << "a,b\n1,\n";
  }
  CHECK_THROWS_AS(read_csv(path), Error);
  CHECK_THROWS_AS(read_csv("/nonexistent/nope.csv"), Error);
  std::remove(path.c_str());
}
