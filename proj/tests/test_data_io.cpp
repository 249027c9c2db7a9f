#include <gtest/gtest.h>

#include <fstream>
#include <regex>

#include "metsize/data_io.hpp"
#include "metsize/error.hpp"
#include "metsize/pilot_sim.hpp"
#include "metsize/serialization.hpp"
#include "support.hpp"

using namespace metsize;
using testing_support::data_path;
using testing_support::TempDir;

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

Error error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "no error thrown";
  return Error(ErrorKind::Io, "");
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

SampleSizeResult sample_result() {
  SampleSizeResult r;
  r.n_hat = 28;
  r.n1_hat = 14;
  r.n2_hat = 14;
  r.converged = true;
  r.curve = {{20, 10, 10, 0.05, 0.08, 0.11}, {30, 15, 15, 0.02, 0.04, 0.06}};
  r.diagnostics.points_evaluated = 2;
  r.diagnostics.grid_size = 6;
  r.diagnostics.seed = 9;
  r.config.seed = 9;
  return r;
}

}  // namespace

TEST(LoadPilot, ExperimentalFixture) {
  const PilotMatrix pm =
      load_pilot_csv(data_path("pilot_189.csv"), load_schema(data_path("pilot_189.schema")));
  EXPECT_EQ(pm.n(), 18);
  EXPECT_EQ(pm.p(), 189);
  ASSERT_TRUE(pm.covariates.has_value());
  EXPECT_EQ(pm.covariates->cols(), 1);
  EXPECT_EQ(pm.count(1), 9);
  EXPECT_EQ(pm.count(2), 9);
  EXPECT_EQ(pm.provenance, Provenance::Experimental);
  EXPECT_EQ(pm.group[0], 1);  // "control" appears first
}

TEST(LoadPilot, EmptyFileIsAParseError) {
  TempDir dir;
  write_file(dir / "empty.csv", "");
  EXPECT_EQ(error_of([&] { load_pilot_csv(dir / "empty.csv", {}); }).kind(), ErrorKind::Parse);
}

TEST(LoadPilot, LabelsMapByFirstAppearance) {
  TempDir dir;
  write_file(dir / "ab.csv", "group,x,y\nB,1,2\nA,3,4\nB,5,6\nA,7,9\n");
  const PilotMatrix pm = load_pilot_csv(dir / "ab.csv", {});
  EXPECT_EQ(pm.group, (std::vector<int>{1, 2, 1, 2}));
  EXPECT_EQ(pm.data(1, 1), 4.0);
}

TEST(LoadPilot, RaggedRowNamesTheLine) {
  TempDir dir;
  write_file(dir / "r.csv", "group,x,y\nA,1,2\nB,3\nA,1,1\nB,2,2\n");
  const Error e = error_of([&] { load_pilot_csv(dir / "r.csv", {}); });
  EXPECT_EQ(e.kind(), ErrorKind::Parse);
  EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
}

TEST(LoadPilot, NonNumericCellNamesCoordinates) {
  TempDir dir;
  write_file(dir / "n.csv", "group,x,y\nA,1,2\nB,3,4\nA,1,oops\nB,2,2\n");
  const Error e = error_of([&] { load_pilot_csv(dir / "n.csv", {}); });
  EXPECT_EQ(e.kind(), ErrorKind::Parse);
  const std::string msg = e.what();
  EXPECT_NE(msg.find("line 4, column 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("oops"), std::string::npos) << msg;
}

TEST(LoadPilot, ThreeLabelsAreNamed) {
  TempDir dir;
  write_file(dir / "t.csv", "group,x\nA,1\nB,2\nC,3\nA,4\nB,5\n");
  const Error e = error_of([&] { load_pilot_csv(dir / "t.csv", {}); });
  EXPECT_EQ(e.kind(), ErrorKind::Validation);
  const std::string msg = e.what();
  for (const char* l : {"A", "B", "C"}) EXPECT_NE(msg.find(l), std::string::npos) << msg;
}

TEST(LoadPilot, GroupOfOneIsInvalid) {
  TempDir dir;
  write_file(dir / "s.csv", "group,x\nA,1\nB,2\nB,3\n");
  EXPECT_EQ(error_of([&] { load_pilot_csv(dir / "s.csv", {}); }).kind(), ErrorKind::Validation);
}

TEST(LoadPilot, MissingColumnIsInvalid) {
  TempDir dir;
  write_file(dir / "m.csv", "label,x\nA,1\nB,2\nA,3\nB,4\n");
  EXPECT_EQ(error_of([&] { load_pilot_csv(dir / "m.csv", {}); }).kind(), ErrorKind::Validation);
}

TEST(LoadPilot, HeaderlessIndexedColumnsAndTabs) {
  TempDir dir;
  write_file(dir / "h.tsv", "1.5\tctl\t2\n2.5\ttrt\t3\n3.5\tctl\t4\n4.5\ttrt\t6\n");
  PilotFileSchema schema;
  schema.has_header = false;
  schema.delimiter = '\t';
  schema.label_column = "1";
  const PilotMatrix pm = load_pilot_csv(dir / "h.tsv", schema);
  EXPECT_EQ(pm.p(), 2);
  EXPECT_EQ(pm.data(3, 1), 6.0);
}

TEST(LoadPilot, WriteThenLoadIsIdentity) {
  RandomStream s(1);
  PilotMatrix pm = simulate_ppcca_pilot(4, 5, 12, {ModelKind::PPCCA, 2, 2}, {}, s);
  TempDir dir;
  PilotFileSchema schema;
  schema.covariate_columns = {"age", "weight"};
  write_pilot_csv(pm, dir / "rt.csv", schema);
  const PilotMatrix back = load_pilot_csv(dir / "rt.csv", schema);
  EXPECT_TRUE(back.data == pm.data);
  EXPECT_TRUE(*back.covariates == *pm.covariates);
  EXPECT_EQ(back.group, pm.group);
}

TEST(LoadPilot, TransposedOrientationGivesTheSameMatrix) {
  TempDir dir;
  write_file(dir / "rows.csv", "id,group,w,b1,b2,b3\ns1,A,60,1,2,3\ns2,B,70,4,5,6\ns3,A,80,7,8,9\ns4,B,90,1,0,2\n");
  write_file(dir / "cols.csv",
             "id,s1,s2,s3,s4\ngroup,A,B,A,B\nw,60,70,80,90\nb1,1,4,7,1\nb2,2,5,8,0\nb3,3,6,9,2\n");
  PilotFileSchema schema;
  schema.covariate_columns = {"w"};
  schema.id_column = "id";
  const PilotMatrix a = load_pilot_csv(dir / "rows.csv", schema);
  schema.orientation = Orientation::SamplesAsColumns;
  const PilotMatrix b = load_pilot_csv(dir / "cols.csv", schema);
  EXPECT_TRUE(a.data == b.data);
  EXPECT_TRUE(*a.covariates == *b.covariates);
  EXPECT_EQ(a.group, b.group);
  EXPECT_EQ(a.p(), 3);
}

TEST(Schema, LabelAmongCovariatesIsInvalid) {
  PilotFileSchema schema;
  schema.covariate_columns = {"group"};
  EXPECT_EQ(error_of([&] { validate(schema); }).kind(), ErrorKind::Validation);
}

TEST(Schema, KeyValueFile) {
  TempDir dir;
  write_file(dir / "s.txt",
             "# pilot layout\nlabel_column = cls\ncovariate_columns = age, weight\n"
             "delimiter = tab\nhas_header = false\norientation = columns\n");
  const PilotFileSchema s = load_schema(dir / "s.txt");
  EXPECT_EQ(s.label_column, "cls");
  EXPECT_EQ(s.covariate_columns, (std::vector<std::string>{"age", "weight"}));
  EXPECT_EQ(s.delimiter, '\t');
  EXPECT_FALSE(s.has_header);
  EXPECT_EQ(s.orientation, Orientation::SamplesAsColumns);
  write_file(dir / "bad.txt", "colour=red\n");
  EXPECT_EQ(error_of([&] { load_schema(dir / "bad.txt"); }).kind(), ErrorKind::Validation);
}

TEST(WriteResult, JsonRoundTripAndCsvShape) {
  TempDir dir;
  const SampleSizeResult r = sample_result();
  write_result(r, dir / "r.json", dir / "c.csv");
  EXPECT_EQ(read_result(dir / "r.json"), r);
  const std::string csv = read_text(dir / "c.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "n,n1,n2,fdr10,fdr50,fdr90");
  EXPECT_EQ(count(csv, "\n"), r.curve.size() + 1);
  const auto j = nlohmann::json::parse(read_text(dir / "r.json"));
  EXPECT_EQ(j.at("schema_version"), 1);
}

TEST(WriteResult, AbsentEstimateIsNullWithReason) {
  SampleSizeResult r = sample_result();
  r.n_hat.reset();
  r.n1_hat = r.n2_hat = 0;
  r.converged = false;
  r.reason = kGridExhausted;
  const nlohmann::json j = to_json(r);
  ASSERT_TRUE(j.contains("n_hat"));
  EXPECT_TRUE(j.at("n_hat").is_null());
  EXPECT_EQ(j.at("reason"), "grid-exhausted");
  EXPECT_EQ(result_from_json(j), r);
}

TEST(WriteResult, FittedSourceRoundTrips) {
  SampleSizeResult r = sample_result();
  FittedModel fit;
  fit.kind = ModelKind::PPCCA;
  fit.q = 1;
  fit.mean = Eigen::VectorXd::LinSpaced(3, 0.1, 0.3);
  fit.loadings = Eigen::MatrixXd::Random(3, 1);
  fit.noise_var = 0.3;
  fit.coeffs = Eigen::MatrixXd::Random(1, 2);
  fit.covariates = Eigen::MatrixXd::Random(4, 1);
  r.config.p = 3;
  r.config.model = {ModelKind::PPCCA, 1, 1};
  r.config.source = FittedPilot{fit};
  EXPECT_EQ(result_from_json(nlohmann::json::parse(dump(to_json(r)))), r);
}

TEST(WriteResult, UnwritablePathIsIoError) {
  EXPECT_EQ(error_of([] {
              write_result(sample_result(), "/nonexistent-dir/x/r.json", "/nonexistent-dir/x/c.csv");
            }).kind(),
            ErrorKind::Io);
}

TEST(CurveSvg, ElementContract) {
  const std::string svg = curve_svg(sample_result(), 0.05);
  EXPECT_NE(svg.find("viewBox=\"0 0 800 600\""), std::string::npos);
  EXPECT_EQ(count(svg, "<g class=\"series\""), 4u);
  EXPECT_EQ(count(svg, "<g class=\"marker\" id=\"n-hat\""), 1u);
  EXPECT_NE(svg.find("Sample size (n)"), std::string::npos);
  EXPECT_NE(svg.find(">FDR<"), std::string::npos);
  EXPECT_EQ(count(svg, "stroke-dasharray"), 3u);  // fdr10, fdr90, target
}

TEST(CurveSvg, NoMarkerWithoutEstimate) {
  SampleSizeResult r = sample_result();
  r.n_hat.reset();
  EXPECT_EQ(count(curve_svg(r, 0.05), "id=\"n-hat\""), 0u);
}

TEST(CurveSvg, SinglePointCurve) {
  SampleSizeResult r = sample_result();
  r.curve.resize(1);
  const std::string svg = curve_svg(r, 0.05);
  EXPECT_EQ(svg.rfind("</svg>"), svg.size() - 7);
  EXPECT_EQ(svg.find("nan"), std::string::npos);
  EXPECT_EQ(svg.find("inf"), std::string::npos);
}

TEST(CurveSvg, GoldenRender) {
  // PPCA, p = 300, n_min = 10, seed 7.
  EstimationConfig c;
  c.p = 300;
  c.n_min = 10;
  c.seed = 7;
  const SampleSizeResult r = estimate_sample_size(c);
  EXPECT_EQ(curve_svg(r, c.target_fdr), read_text(data_path("golden_curve.svg")));
}

TEST(SweepOutput, CsvAndSvg) {
  std::vector<SweepPoint> sweep = {{0.1, {10, 5, 5, 0.1, 0.2, 0.3}},
                                   {0.2, {10, 5, 5, 0.05, 0.1, 0.2}},
                                   {0.1, {20, 10, 10, 0.01, 0.05, 0.1}},
                                   {0.2, {20, 10, 10, 0.0, 0.02, 0.05}}};
  const std::string csv = sweep_csv(sweep);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "m,n,n1,n2,fdr10,fdr50,fdr90");
  EXPECT_EQ(count(csv, "\n"), 5u);
  const std::string svg = sweep_svg(sweep, 0.05);
  EXPECT_NE(svg.find("viewBox=\"0 0 800 600\""), std::string::npos);
  EXPECT_EQ(svg.find("nan"), std::string::npos);
}

TEST(Serialization, FittedModelRoundTrip) {
  FittedModel fit;
  fit.q = 2;
  fit.mean = Eigen::VectorXd::LinSpaced(4, -1, 1);
  fit.loadings = Eigen::MatrixXd::Random(4, 2);
  fit.noise_var = 0.25;
  const nlohmann::json j = to_json(fit);
  for (const char* key : {"kind", "q", "mean", "loadings", "noise_var", "coeffs"})
    EXPECT_TRUE(j.contains(key)) << key;
  // Row-major loadings.
  EXPECT_EQ(j.at("loadings").at(1).get<double>(), fit.loadings(0, 1));
  EXPECT_EQ(fitted_model_from_json(j), fit);
}

TEST(Serialization, ConfigTypeErrorsNameTheField) {
  nlohmann::json j = to_json(EstimationConfig{});
  j["m"] = "lots";
  const Error e = error_of([&] { config_from_json(j); });
  EXPECT_EQ(e.kind(), ErrorKind::Validation);
  EXPECT_EQ(std::string(e.what()).rfind("m:", 0), 0u) << e.what();
}

TEST(Serialization, ConfigRoundTrip) {
  EstimationConfig c;
  c.model = {ModelKind::PPCCA, 2, 3};
  c.group_ratio = {2, 1};
  c.n_min = 6;
  c.grid_step = 3;
  c.seed = 123456789012345ULL;
  std::get<PriorDraws>(c.source).prior.ig_shape = 4.5;
  EXPECT_EQ(config_from_json(nlohmann::json::parse(dump(to_json(c)))), c);
}
