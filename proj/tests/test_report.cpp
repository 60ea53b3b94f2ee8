// JSON reports against the shipped schemas, CSV writers, and the
// hazard grid export.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "censdr/report.hpp"
#include "support/schema_check.hpp"
#include "support/testutil.hpp"

using censdr::SurvivalDataset;
using censdr::json;

namespace {

json load_schema(const std::string& name) {
  std::vector<std::string> dirs;
  if (const char* env = std::getenv("CENSDR_SCHEMAS")) dirs.push_back(env);
  dirs.push_back("schemas");
  dirs.push_back("../schemas");
  dirs.push_back("../../schemas");
  for (const auto& dir : dirs) {
    std::ifstream in(dir + "/" + name);
    if (in) return json::parse(in);
  }
  FAIL("schema file not found: " << name);
  return {};
}

void expect_valid(const json& value, const std::string& schema_name) {
  const auto errors = schema_check::validate(value, load_schema(schema_name));
  for (const auto& e : errors) UNSCOPED_INFO(e);
  CHECK(errors.empty());
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> lines;
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream in(line);
  std::string f;
  while (std::getline(in, f, ',')) fields.push_back(f);
  return fields;
}

censdr::Analysis toy_analysis(SurvivalDataset& data) {
  data = testutil::toy_data(40, 3, 19, 1.0);
  censdr::AnalysisOptions opt;
  opt.fit.d = 1;
  opt.fit.score_tol = 1e-4;
  opt.fit.n_starts = 3;
  opt.fit.max_iters = 60;
  opt.fit.seed = 6;
  return censdr::analyze(data, opt);
}

}  // namespace

TEST_CASE("non-finite numbers serialize as null") {
  CHECK(censdr::detail::json_num(1.5) == json(1.5));
  CHECK(censdr::detail::json_num(std::numeric_limits<double>::quiet_NaN())
            .is_null());
  CHECK(censdr::detail::json_num(std::numeric_limits<double>::infinity())
            .is_null());
}

TEST_CASE("fit report matches its schema") {
  SurvivalDataset data;
  censdr::Analysis a = toy_analysis(data);
  const json j = censdr::fit_report_json(a, data.n());

  expect_valid(j, "fit_report.schema.json");
  CHECK(j["n"] == 40);
  CHECK(j["p"] == 3);
  CHECK(j["d"] == 1);
  REQUIRE(j["beta_hat"].size() == 3);
  CHECK(j["beta_hat"][0].size() == 1);
  CHECK(j["beta_hat"][0][0] == 1.0);  // identity upper block, original scale
  CHECK(j["bandwidths"]["h"].get<double>() > 0.0);
  CHECK(j["diagnostics"]["event_terms"].get<long>() > 0);

  SECTION("undefined standard errors become nulls, still valid") {
    a.se[0] = std::numeric_limits<double>::quiet_NaN();
    const json k = censdr::fit_report_json(a, data.n());
    CHECK(k["se"][0].is_null());
    CHECK(k["se"][1].is_number());
    expect_valid(k, "fit_report.schema.json");
  }

  SECTION("no-inference report nulls se and ci") {
    censdr::Analysis bare = a;
    bare.se.resize(0);
    const json k = censdr::fit_report_json(bare, data.n());
    CHECK(k["se"].is_null());
    CHECK(k["ci"].is_null());
    CHECK(k["diagnostics"]["information_rank"].is_null());
    expect_valid(k, "fit_report.schema.json");
  }

  SECTION("attached dimension selection validates") {
    censdr::DimSelection sel;
    sel.criterion = {5.0, std::numeric_limits<double>::infinity()};
    sel.loss = {2.0, std::numeric_limits<double>::infinity()};
    sel.penalty = {3.0, 6.0};
    sel.fit_converged = {true, false};
    sel.chosen_d = 1;
    sel.warnings = {"d=2: fit did not converge; using best value"};
    const json k = censdr::fit_report_json(a, data.n(), &sel);
    CHECK(k["vic"]["chosen_d"] == 1);
    CHECK(k["vic"]["criterion"][1].is_null());  // +inf serialized as null
    expect_valid(k, "fit_report.schema.json");
    expect_valid(k["vic"], "dim_selection.schema.json");
  }
}

TEST_CASE("replication summary matches its schema") {
  censdr::StudySpec spec;
  spec.study = censdr::StudyId::s1;
  spec.n = 30;
  spec.seed = 3;
  censdr::FitConfig cfg;
  cfg.score_tol = 1e-3;
  cfg.n_starts = 2;
  cfg.max_iters = 25;

  const censdr::McSummary s = censdr::run_monte_carlo(spec, 2, cfg);
  const json j = censdr::mc_summary_json(s);
  expect_valid(j, "mc_summary.schema.json");
  CHECK(j["study"] == "s1");
  CHECK(j["reps"] == 2);
  CHECK(j["censor_param"].is_null());
  CHECK(j["true_beta_free"].size() == 6);
}

TEST_CASE("replication csv layout") {
  censdr::McSummary s;
  s.true_free = (Eigen::VectorXd(2) << 0.0, -1.0).finished();
  censdr::McRep good;
  good.rep = 1;
  good.ok = true;
  good.converged = true;
  good.beta_free = (Eigen::VectorXd(2) << 1.5, -0.5).finished();
  good.lambda_max = 0.25;
  censdr::McRep bad;
  bad.rep = 2;
  bad.ok = false;
  s.detail = {good, bad};

  std::ostringstream out;
  censdr::write_mc_csv(out, s);
  const auto lines = split_lines(out.str());
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "rep,beta_1,beta_2,lambda_max,converged");
  CHECK(lines[1] == "1,1.5,-0.5,0.25,1");
  const auto fields = split_fields(lines[2]);
  REQUIRE(fields.size() == 5);
  CHECK(fields[0] == "2");
  CHECK(fields[1] == "nan");
  CHECK(fields[3] == "nan");
  CHECK(fields[4] == "0");
}

TEST_CASE("dataset csv round-trips exactly") {
  const SurvivalDataset data = testutil::toy_data(12, 3, 23, 1.0);
  testutil::TempFile tmp;
  {
    std::ofstream out(tmp.path());
    censdr::write_dataset_csv(out, data);
  }
  const SurvivalDataset back = censdr::load_csv(tmp.path());
  CHECK((back.covariates - data.covariates).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.times - data.times).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.events - data.events).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("hazard grid export") {
  const SurvivalDataset data = testutil::toy_data(25, 3, 31, 0.0);
  Eigen::MatrixXd beta(3, 1);
  beta << 1.0, 0.5, -0.25;

  censdr::GridSpec grid;
  grid.t_steps = 5;
  grid.index_steps = 4;

  std::ostringstream out;
  const auto warnings = censdr::write_hazard_grid_csv(out, data, beta, grid);
  CHECK(warnings.empty());

  const auto lines = split_lines(out.str());
  REQUIRE(lines.size() == 1 + 5 * 4);
  CHECK(lines[0] == "t,index_1,cum_hazard,hazard");

  // Within one index block (t ascending) the cumulative hazard cannot
  // decrease, and all values are finite and nonnegative.
  for (std::size_t block = 0; block < 4; ++block) {
    double prev = -1.0;
    for (std::size_t tk = 0; tk < 5; ++tk) {
      const auto f = split_fields(lines[1 + block * 5 + tk]);
      REQUIRE(f.size() == 4);
      const double cum = std::stod(f[2]);
      const double haz = std::stod(f[3]);
      CHECK(cum >= prev);
      CHECK(haz >= 0.0);
      prev = cum;
    }
  }

  SECTION("rows match direct evaluation at the same bandwidths") {
    const Eigen::VectorXd u = data.covariates * beta;
    const double u_mean = u.mean();
    const double u_sd = std::sqrt((u.array() - u_mean).square().sum() / 24.0);
    const double t_mean = data.times.mean();
    const double t_sd =
        std::sqrt((data.times.array() - t_mean).square().sum() / 24.0);
    censdr::Bandwidths bw;
    bw.h = std::pow(25.0, -9.0 / 32.0) * u_sd;
    bw.b = std::pow(25.0, -1.0 / 8.0) * t_sd;
    const censdr::HazardModel model(u, data.times, data.events, bw);

    const auto f = split_fields(lines[1]);  // first point: u_min, t_min
    Eigen::VectorXd v(1);
    v[0] = u.minCoeff();
    const censdr::HazardCurve curve = model.curve(v);
    const double t0 = data.times.minCoeff();
    CHECK(std::stod(f[0]) == t0);
    CHECK(std::stod(f[1]) == v[0]);
    CHECK(std::stod(f[2]) == curve.cum_hazard(t0));
    CHECK(std::stod(f[3]) == curve.hazard(t0));
  }

  SECTION("single-cell grid evaluates at the range midpoint") {
    censdr::GridSpec one;
    one.t_steps = 1;
    one.index_steps = 1;
    std::ostringstream o;
    censdr::write_hazard_grid_csv(o, data, beta, one);
    const auto l = split_lines(o.str());
    REQUIRE(l.size() == 2);
    const auto f = split_fields(l[1]);
    CHECK(std::stod(f[0]) ==
          0.5 * (data.times.minCoeff() + data.times.maxCoeff()));
  }

  SECTION("two-column index lattice") {
    Eigen::MatrixXd beta2(3, 2);
    beta2 << 1.0, 0.0,
             0.0, 1.0,
             0.5, -0.5;
    censdr::GridSpec g2;
    g2.t_steps = 2;
    g2.index_steps = 3;
    std::ostringstream o;
    censdr::write_hazard_grid_csv(o, data, beta2, g2);
    const auto l = split_lines(o.str());
    REQUIRE(l.size() == 1 + 2 * 3 * 3);
    CHECK(l[0] == "t,index_1,index_2,cum_hazard,hazard");
  }

  SECTION("grids outside the observed support warn") {
    censdr::GridSpec wide;
    wide.t_min = -1.0;
    wide.t_max = data.times.maxCoeff();
    wide.index_min = -100.0;
    wide.index_max = 100.0;
    std::ostringstream o;
    const auto w = censdr::write_hazard_grid_csv(o, data, beta, wide);
    REQUIRE(w.size() == 2);
    CHECK(w[0].find("time grid") != std::string::npos);
    CHECK(w[1].find("index grid") != std::string::npos);
  }

  SECTION("bad inputs throw") {
    std::ostringstream o;
    Eigen::MatrixXd wrong(2, 1);
    wrong << 1.0, 0.5;
    CHECK_THROWS_AS(censdr::write_hazard_grid_csv(o, data, wrong, grid),
                    std::invalid_argument);
    censdr::GridSpec zero;
    zero.t_steps = 0;
    CHECK_THROWS_AS(censdr::write_hazard_grid_csv(o, data, beta, zero),
                    std::invalid_argument);
  }
}
