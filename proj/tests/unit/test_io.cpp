#include <gtest/gtest.h>

#include "cayley_qmc/io.hpp"

using namespace cayley_qmc;
using nlohmann::json;

TEST(Io, ParsePauliShorthand) {
  const auto obs = io::parse_observable(R"({"terms":[{"coeff":[2,0.5],"factors":[{"vertex":"","pauli":"z"},{"vertex":"1.2","pauli":"x"}]}]})");
  ASSERT_EQ(obs.terms().size(), 1u);
  const auto& t = obs.terms()[0];
  EXPECT_EQ(t.coeff, Complex(2.0, 0.5));
  ASSERT_NE(t.factor(TreeCoordinate::root()), nullptr);
  EXPECT_EQ(*t.factor(TreeCoordinate::root()), pauli(Axis::Z));
  EXPECT_EQ(*t.factor(TreeCoordinate{1, 2}), pauli(Axis::X));
  EXPECT_EQ(obs.support_level(), 2);
}

TEST(Io, ParseMatrixAndDefaults) {
  const auto obs = io::parse_observable(
      R"({"terms":[{"factors":[{"vertex":"2","matrix":[[[1,0],[0,-1]],[[0,1],3]]}]},{}]})");
  ASSERT_EQ(obs.terms().size(), 2u);
  EXPECT_EQ(obs.terms()[0].coeff, Complex(1.0));
  const Matrix2& m = *obs.terms()[0].factor(TreeCoordinate{2});
  EXPECT_EQ(m(0, 1), Complex(0.0, -1.0));
  EXPECT_EQ(m(1, 0), Complex(0.0, 1.0));
  EXPECT_EQ(m(1, 1), Complex(3.0));
  EXPECT_TRUE(obs.terms()[1].factors.empty());
}

TEST(Io, RepeatedVertexMultipliesInOrder) {
  const auto obs = io::parse_observable(
      R"({"terms":[{"factors":[{"vertex":"1","pauli":"x"},{"vertex":"1","pauli":"y"}]}]})");
  EXPECT_EQ(*obs.terms()[0].factor(TreeCoordinate{1}), Complex(0, 1) * pauli(Axis::Z));
}

TEST(Io, SyntaxErrorReportsByte) {
  try {
    io::parse_observable(R"({"terms": [ })");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.location().rfind("byte ", 0), 0u);
  }
}

TEST(Io, SchemaErrorsReportPointer) {
  auto location_of = [](const std::string& text) {
    try {
      io::parse_observable(text);
    } catch (const ParseError& e) {
      return e.location();
    }
    return std::string("none");
  };
  EXPECT_EQ(location_of(R"({"nope":1})"), "/");
  EXPECT_EQ(location_of(R"({"terms":[{"factors":[{"vertex":"1","pauli":"w"}]}]})"), "/terms/0/factors/0/pauli");
  EXPECT_EQ(location_of(R"({"terms":[{"factors":[{"vertex":"1.3","pauli":"x"}]}]})"), "/terms/0/factors/0/vertex");
  EXPECT_EQ(location_of(R"({"terms":[{"factors":[{"vertex":"1.a","pauli":"x"}]}]})"), "/terms/0/factors/0/vertex");
  EXPECT_EQ(location_of(R"({"terms":[{},{"factors":[{"vertex":"1"}]}]})"), "/terms/1/factors/0");
  EXPECT_EQ(location_of(R"({"terms":[{"factors":[{"vertex":"1","pauli":"x","matrix":[]}]}]})"), "/terms/0/factors/0");
  EXPECT_EQ(location_of(R"({"terms":[{"coeff":"one"}]})"), "/terms/0/coeff");
  EXPECT_EQ(location_of(R"({"terms":[{"factors":[{"vertex":"","matrix":[[1,2],[3]]}]}]})"),
            "/terms/0/factors/0/matrix/1");
}

TEST(Io, ObservableRoundTrip) {
  ProductObservable obs = ProductObservable::product({{TreeCoordinate{1}, pauli(Axis::Y)}, {TreeCoordinate{2, 1}, pauli(Axis::X)}},
                                                     Complex(0.25, -1.5));
  obs = obs + ProductObservable::identity();
  const auto back = io::observable_from_json(json::parse(io::observable_to_json(obs).dump()));
  ASSERT_EQ(back.terms().size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.terms()[i].coeff, obs.terms()[i].coeff);
    EXPECT_EQ(back.terms()[i].factors, obs.terms()[i].factors);
  }
}

TEST(Io, FormatNumberRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1.7351236, 5.669626950043876, 1e-300, -2.5e10}) {
    EXPECT_EQ(std::stod(io::format_number(v)), v);
  }
  EXPECT_EQ(io::format_number(0.5), "0.5");
}

TEST(Io, ResultRecordShape) {
  const io::ResultRecord r{2, 1.0, 0.5, "transfer", Complex(0.25, 0.0), 1e-16, 2e-15};
  const json j = io::to_json(r);
  EXPECT_EQ(j["n"], 2);
  EXPECT_EQ(j["engine"], "transfer");
  EXPECT_EQ(j["value"][0], 0.25);
  EXPECT_EQ(j["value"][1], 0.0);
  EXPECT_TRUE(j["residuals"].contains("eq1"));
  EXPECT_TRUE(j["residuals"].contains("eq2"));
  EXPECT_TRUE(io::all_finite(j));
  EXPECT_FALSE(io::all_finite(json::array({1.0, std::nan("")})));
}

TEST(Io, OrbitCsv) {
  const auto csv = io::orbit_csv(orbit({1.0, 0.5}, 1.0, 50));
  EXPECT_EQ(csv.rfind("step,x,y,admissible\n0,1,0.5,1\n", 0), 0u);
  EXPECT_NE(csv.find("termination=DomainViolation@1\n"), std::string::npos);
  const auto conv = io::orbit_csv(orbit(fixed_point(1.0), 1.0, 5));
  EXPECT_NE(conv.find("termination=Converged\n"), std::string::npos);
}
