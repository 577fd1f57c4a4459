#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "app.hpp"
#include "config.hpp"
#include "libration/errors.hpp"

namespace fs = std::filesystem;
using libration::ConfigError;
using namespace libration::cli;

namespace {

struct Result {
  int code;
  std::string out, err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("libration_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  static Result call(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
  }

  static nlohmann::json json_of(const Result& r) { return nlohmann::json::parse(r.out); }

  fs::path dir_;
};

const char* kHarmonic = "[problem]\npotential = 0.5*(x^2+y^2)\nE0 = 0\nepsilon0 = 0.5\n";
const char* kHalf = "[problem]\npotential = 0.5*(0.25*x^2+y^2)\nE0 = 0\nepsilon0 = 0.5\n";
const char* kDeformed =
    "[problem]\n"
    "potential = 0.5*y^2 + 0.1*y^3 + 0.7*x^2 + 0.5*x^2*y + 0.1*x^3 + 0.2*x^4 + 0.05*x^3*y\n"
    "deformation = x^2*y + y^3\n"
    "E0 = 0\nepsilon0 = 0.2\n";

}  // namespace

TEST(Config, ParsesSectionsAndTolerances) {
  const auto c = parse_config(
      "; comment\n[problem]\npotential = 0.5*y^2 + x^2\nE0 = 0.1\nepsilon0 = 0.25\n"
      "[formulas]\ndelta_third = literal\n"
      "[tolerances]\noracle.h_qp = 2e-3\nsweep.threads = 2\n"
      "[output]\nformat = text\npath = out.txt\n");
  EXPECT_EQ(c.potential, "0.5*y^2 + x^2");
  EXPECT_DOUBLE_EQ(c.energy0, 0.1);
  EXPECT_DOUBLE_EQ(*c.epsilon0, 0.25);
  EXPECT_EQ(c.formulas.delta_third, libration::RowForm::literal);
  EXPECT_EQ(c.formulas.g3_mixed, libration::RowForm::derived);
  EXPECT_DOUBLE_EQ(c.oracle.h_qp, 2e-3);
  EXPECT_EQ(c.sweep_options.threads, 2u);
  EXPECT_EQ(c.format, OutputFormat::text);
  EXPECT_EQ(c.out_path, "out.txt");
  EXPECT_NO_THROW(validate(c));
}

TEST(Config, Rejections) {
  const std::string base = "[problem]\npotential = 0.5*(x^2+y^2)\n";
  auto bad = [&](const std::string& extra) {
    EXPECT_THROW(validate(parse_config(base + extra)), ConfigError) << extra;
  };
  bad("epsilon0 = 0.5\nsweep_lo = 0.1\nsweep_hi = 1\nsweep_samples = 8\n");
  bad("");  // neither
  bad("sweep_lo = 0.1\nsweep_hi = 1\nsweep_samples = 1\n");
  bad("sweep_lo = 0.1\nsweep_hi = 1\n");
  bad("sweep_lo = 1\nsweep_hi = 0.1\nsweep_samples = 8\n");
  bad("epsilon0 = abc\n");
  bad("epsilon0 = 0.5\nwhatever = 1\n");
  bad("epsilon0 = 0.5\n[tolerances]\ncompare.tol_first = -1e-5\n");
  bad("epsilon0 = 0.5\n[tolerances]\ncompare.tol_first = 0\n");
  bad("epsilon0 = 0.5\n[tolerances]\nno.such_key = 1\n");
  bad("epsilon0 = 0.5\n[tolerances]\noracle.richardson_levels = 2.5\n");
  bad("epsilon0 = 0.5\n[formulas]\ndelta_third = bogus\n");
  bad("epsilon0 = 0.5\n[output]\nformat = xml\n");
  bad("epsilon0 = 0.5\n[extra]\nkey = 1\n");
  EXPECT_THROW(parse_config("potential = x\n[problem]\nepsilon0 = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[problem]\nE0 = 1\nE0 = 2\n"), ConfigError);
}

TEST(Config, Overrides) {
  auto c = parse_config(kHarmonic);
  apply_override(c, "classify.fork=1e-6");
  EXPECT_DOUBLE_EQ(c.classify.fork, 1e-6);
  EXPECT_DOUBLE_EQ(tolerance_value(c, "classify.fork"), 1e-6);
  EXPECT_THROW(apply_override(c, "classify.fork"), ConfigError);
  EXPECT_THROW(apply_override(c, "classify.fork=-1"), ConfigError);
  // defaults are positive, except sweep.threads = 0 for "all cores"
  for (const auto& key : tolerance_keys())
    if (key != "sweep.threads") EXPECT_GT(tolerance_value(c, key), 0.0) << key;
}

TEST_F(Cli, HarmonicIsDegenerateFrame) {
  const auto r = call({"analyze", write("h.ini", kHarmonic)});
  ASSERT_EQ(r.code, exit_ok) << r.err;
  const auto j = json_of(r);
  EXPECT_NEAR(j["bifurcation"]["trace"].get<double>(), 2.0, 1e-9);
  EXPECT_EQ(j["bifurcation"]["verdict"], "degenerate_frame");
  EXPECT_NEAR(j["prerequisites"]["y_max"].get<double>(), 1.0, 1e-9);
  EXPECT_NEAR(j["prerequisites"]["period"].get<double>(), 2 * M_PI, 1e-9);
}

TEST_F(Cli, HalfFrequencyIsRegular) {
  const auto r = call({"analyze", write("h.ini", kHalf)});
  ASSERT_EQ(r.code, exit_ok) << r.err;
  const auto j = json_of(r);
  EXPECT_NEAR(j["bifurcation"]["trace"].get<double>(), 2.0 * std::cos(M_PI), 1e-9);
  EXPECT_EQ(j["bifurcation"]["verdict"], "regular");
}

TEST_F(Cli, AllKeysAlwaysPresent) {
  const auto j = json_of(call({"analyze", write("h.ini", kHarmonic)}));
  ASSERT_EQ(j["derivatives"].size(), libration::kNumDerivatives);
  for (const auto& spec : libration::derivative_specs()) {
    ASSERT_TRUE(j["derivatives"].contains(spec.key)) << spec.key;
    EXPECT_TRUE(j["derivatives"][spec.key].is_number()) << spec.key;
  }
  EXPECT_EQ(j["bifurcation"]["deformation_sensitivities"].size(), 10u);
  for (const char* block : {"meta", "prerequisites", "z_tables", "bifurcation"})
    EXPECT_TRUE(j.contains(block)) << block;
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(call({"analyze", write("both.ini",
                                   std::string(kHarmonic) +
                                       "sweep_lo = 0.1\nsweep_hi = 1\nsweep_samples = 8\n")})
                .code,
            exit_config);
  EXPECT_EQ(call({"sweep", write("one.ini",
                                 "[problem]\npotential = 0.5*(x^2+y^2)\n"
                                 "sweep_lo = 0.1\nsweep_hi = 1\nsweep_samples = 1\n")})
                .code,
            exit_config);
  EXPECT_EQ(call({"analyze", (dir_ / "missing.ini").string()}).code, exit_config);
  EXPECT_EQ(call({"analyze", write("parse.ini", "[problem]\npotential = 0.5*(x^2+\nepsilon0 = 1\n")})
                .code,
            exit_config);
  EXPECT_EQ(call({"analyze", write("h.ini", kHarmonic), "--tol-override", "prereq.rtol=-1"}).code,
            exit_config);
  EXPECT_EQ(call({"frobnicate"}).code, exit_config);
  EXPECT_EQ(call({"--help"}).code, exit_ok);

  // x*y breaks the invariance of x = px = 0
  const auto hyp = call({"analyze", write("hyp.ini",
                                          "[problem]\npotential = 0.5*(x^2+y^2) + 0.1*x*y\n"
                                          "epsilon0 = 0.5\n")});
  EXPECT_EQ(hyp.code, exit_hypothesis);
  EXPECT_NE(hyp.err.find("hypothesis"), std::string::npos) << hyp.err;

  // energy below the minimum of V(0, y): no turning point
  EXPECT_EQ(call({"analyze", write("low.ini",
                                   "[problem]\npotential = 0.5*(x^2+y^2)\nE0 = -1\nepsilon0 = 0.5\n")})
                .code,
            exit_numerical);
}

TEST_F(Cli, VerifyHarmonicPasses) {
  const auto r = call({"verify", write("h.ini", kHarmonic)});
  ASSERT_EQ(r.code, exit_ok) << r.err;
  const auto j = json_of(r);
  EXPECT_EQ(j["verification"]["summary"]["passed"], 38);
  EXPECT_EQ(j["verification"]["entries"].size(), 38u);
  for (const auto& [key, e] : j["verification"]["entries"].items()) {
    EXPECT_TRUE(e.contains("analytic") && e.contains("numeric") && e.contains("estimate"));
    EXPECT_EQ(e["status"], "pass") << key;
  }
}

TEST_F(Cli, VerifyInRandomChart) {
  const auto r = call({"verify", write("d.ini", kDeformed), "--seed", "11"});
  ASSERT_EQ(r.code, exit_ok) << r.err;
  const auto j = json_of(r);
  EXPECT_EQ(j["meta"]["seed"], 11);
  const auto& s = j["verification"]["chart"];
  const double det = s[0][0].get<double>() * s[1][1].get<double>() -
                     s[0][1].get<double>() * s[1][0].get<double>();
  EXPECT_NEAR(det, 1.0, 1e-14);
  EXPECT_NE(s[0][1].get<double>(), 0.0);
  EXPECT_EQ(j["verification"]["summary"]["failed"], 0);
}

TEST_F(Cli, VerifyNamesInjectedFault) {
  const auto r = call({"verify", write("d.ini", std::string(kDeformed) +
                                                    "[formulas]\ndelta_third = literal\n")});
  EXPECT_EQ(r.code, exit_verification);
  EXPECT_NE(r.err.find("P_ppd"), std::string::npos) << r.err;
  // the report is still written
  EXPECT_EQ(json_of(r)["verification"]["entries"]["P_ppd"]["status"], "fail");
}

TEST_F(Cli, LooseStepsAreInconclusiveNotFailed) {
  const auto r = call({"verify", write("d.ini", kDeformed), "--tol-override", "oracle.h_qp=0.05"});
  EXPECT_EQ(r.code, exit_ok) << r.err;
  const auto j = json_of(r);
  EXPECT_GT(j["verification"]["summary"]["inconclusive"].get<int>(), 0);
  EXPECT_EQ(j["verification"]["summary"]["failed"], 0);
}

TEST_F(Cli, SweepIsochronous) {
  const auto r = call({"sweep",
                       write("s.ini",
                             "[problem]\npotential = 0.5*(0.25*x^2+y^2)\nE0 = 0\n"
                             "sweep_lo = 0.1\nsweep_hi = 1\nsweep_samples = 10\n"),
                       "--format", "csv"});
  ASSERT_EQ(r.code, exit_ok) << r.err;
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "epsilon,trace,trace_prime");
  int rows = 0, root_rows = 0;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) {
      if (line.find("roots") == std::string::npos && line.find("epsilon,") == std::string::npos)
        ++root_rows;
      continue;
    }
    ++rows;
    const double trace = std::stod(line.substr(line.find(',') + 1));
    EXPECT_NEAR(trace, -2.0, 1e-9) << line;
  }
  EXPECT_EQ(rows, 10);
  EXPECT_EQ(root_rows, 0);
}

TEST_F(Cli, SweepRootsAreRechecked) {
  const auto out = dir_ / "sweep.json";
  const auto r = call({"sweep",
                       write("s.ini",
                             "[problem]\npotential = 0.5*y^2+0.5*(0.8+y)*x^2\nE0 = 0\n"
                             "sweep_lo = 0.05\nsweep_hi = 3\nsweep_samples = 24\n"
                             "classify_roots = true\n"),
                       "--out", out.string()});
  ASSERT_EQ(r.code, exit_ok) << r.err;
  EXPECT_TRUE(r.out.empty());
  std::ifstream in(out);
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j["samples"].size(), 24u);
  ASSERT_FALSE(j["roots"].empty());
  for (const auto& root : j["roots"]) {
    EXPECT_TRUE(root["verified"].get<bool>());
    EXPECT_LE(std::abs(root["recheck_trace"].get<double>() - 2.0), 1e-9);
    EXPECT_TRUE(root.contains("bifurcation"));
  }
}

TEST_F(Cli, SameConfigSameBytes) {
  const auto cfg = write("d.ini", kDeformed);
  const auto a = call({"analyze", cfg});
  const auto b = call({"analyze", cfg});
  ASSERT_EQ(a.code, exit_ok);
  EXPECT_EQ(a.out, b.out);
  const auto text_a = call({"analyze", cfg, "--format", "text"});
  const auto text_b = call({"analyze", cfg, "--format", "text"});
  EXPECT_EQ(text_a.out, text_b.out);
}
