#pragma once

// Text formats shared by the command-line tool and downstream scripts.
//
// Observable file:
//   {"terms": [{"coeff": [re, im],
//               "factors": [{"vertex": "1.2", "matrix": [[[re,im],[re,im]],[[re,im],[re,im]]]},
//                           {"vertex": "", "pauli": "z"}]}]}
// "coeff" defaults to [1, 0]; the empty vertex string is the root.

#include <cmath>
#include <cstdio>
#include <string>

#include "json.hpp"

#include "cayley_qmc/boundary.hpp"
#include "cayley_qmc/state.hpp"

namespace cayley_qmc::io {

using nlohmann::json;

/// 17 significant digits, '.' decimal point; round-trips a double.
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline Complex parse_complex(const json& j, const std::string& where) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ParseError("expected a number or [re, im]", where);
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

inline Axis parse_axis(const json& j, const std::string& where) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "x" || s == "X") return Axis::X;
    if (s == "y" || s == "Y") return Axis::Y;
    if (s == "z" || s == "Z") return Axis::Z;
  }
  throw ParseError("pauli must be one of \"x\", \"y\", \"z\"", where);
}

inline Matrix2 parse_matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw ParseError("matrix must be a 2x2 array", where);
  Matrix2 m;
  for (int r = 0; r < 2; ++r) {
    const auto row_where = where + "/" + std::to_string(r);
    if (!j[r].is_array() || j[r].size() != 2) throw ParseError("matrix row must have two entries", row_where);
    for (int c = 0; c < 2; ++c) m(r, c) = parse_complex(j[r][c], row_where + "/" + std::to_string(c));
  }
  return m;
}

}  // namespace detail

inline ProductObservable observable_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("terms") || !doc["terms"].is_array()) {
    throw ParseError("observable needs a \"terms\" array", "/");
  }
  ProductObservable obs;
  const auto& terms = doc["terms"];
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const std::string where = "/terms/" + std::to_string(i);
    const auto& t = terms[i];
    if (!t.is_object()) throw ParseError("term must be an object", where);
    ProductTerm term;
    if (t.contains("coeff")) term.coeff = detail::parse_complex(t["coeff"], where + "/coeff");
    if (t.contains("factors")) {
      const auto& fs = t["factors"];
      if (!fs.is_array()) throw ParseError("factors must be an array", where + "/factors");
      for (std::size_t k = 0; k < fs.size(); ++k) {
        const std::string fw = where + "/factors/" + std::to_string(k);
        const auto& f = fs[k];
        if (!f.is_object() || !f.contains("vertex") || !f["vertex"].is_string()) {
          throw ParseError("factor needs a \"vertex\" string", fw);
        }
        TreeCoordinate x;
        try {
          x = TreeCoordinate::parse(f["vertex"].get<std::string>());
        } catch (const ParseError& e) {
          throw ParseError(e.what(), fw + "/vertex");
        }
        if (!x.valid_for_order(kBinary)) throw ParseError("vertex digits must be 1 or 2", fw + "/vertex");
        Matrix2 m;
        if (f.contains("pauli") == f.contains("matrix")) {
          throw ParseError("factor needs exactly one of \"pauli\" or \"matrix\"", fw);
        }
        m = f.contains("pauli") ? pauli(detail::parse_axis(f["pauli"], fw + "/pauli"))
                                : detail::parse_matrix(f["matrix"], fw + "/matrix");
        auto [it, fresh] = term.factors.emplace(x, m);
        if (!fresh) it->second = (it->second * m).eval();  // repeated vertex: operator product in file order
      }
    }
    obs.add(std::move(term));
  }
  return obs;
}

inline ProductObservable parse_observable(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("malformed JSON", e.byte);
  }
  return observable_from_json(doc);
}

inline json complex_to_json(Complex z) { return json::array({z.real(), z.imag()}); }

inline json matrix_to_json(const Matrix2& m) {
  json rows = json::array();
  for (int r = 0; r < 2; ++r) rows.push_back(json::array({complex_to_json(m(r, 0)), complex_to_json(m(r, 1))}));
  return rows;
}

inline json observable_to_json(const ProductObservable& obs) {
  json terms = json::array();
  for (const auto& t : obs.terms()) {
    json fs = json::array();
    for (const auto& [x, m] : t.factors) fs.push_back({{"vertex", x.to_string()}, {"matrix", matrix_to_json(m)}});
    terms.push_back({{"coeff", complex_to_json(t.coeff)}, {"factors", fs}});
  }
  return {{"terms", terms}};
}

struct ResultRecord {
  int n = 0;
  double beta = 0.0;
  double alpha = 0.0;
  std::string engine;
  Complex value;
  double eq1_residual = 0.0;
  double eq2_residual = 0.0;
};

inline json to_json(const ResultRecord& r) {
  return {{"n", r.n},
          {"beta", r.beta},
          {"alpha", r.alpha},
          {"engine", r.engine},
          {"value", complex_to_json(r.value)},
          {"residuals", {{"eq1", r.eq1_residual}, {"eq2", r.eq2_residual}}}};
}

inline json to_json(const PeriodicSearchReport& r) {
  json hits = json::array();
  for (const auto& h : r.hits) {
    hits.push_back({{"x0", h.start.x}, {"y0", h.start.y}, {"period", h.period}, {"step", h.step}});
  }
  return {{"beta", r.beta}, {"samples", r.samples}, {"k_max", r.k_max}, {"hits", hits}};
}

/// CSV rows "step,x,y,admissible" and a trailer "termination=...".
inline std::string orbit_csv(const OrbitResult& orb) {
  std::string out = "step,x,y,admissible\n";
  for (std::size_t i = 0; i < orb.points.size(); ++i) {
    out += std::to_string(i) + "," + format_number(orb.points[i].x) + "," + format_number(orb.points[i].y) + "," +
           (orb.admissible(i) ? "1" : "0") + "\n";
  }
  out += "termination=";
  out += to_string(orb.termination);
  if (orb.termination == Termination::DomainViolation) out += "@" + std::to_string(orb.final_step);
  out += "\n";
  return out;
}

/// True if every number in the document is finite.
inline bool all_finite(const json& j) {
  if (j.is_number_float()) return std::isfinite(j.get<double>());
  if (j.is_null()) return false;
  if (j.is_array() || j.is_object()) {
    for (const auto& v : j) {
      if (!all_finite(v)) return false;
    }
  }
  return true;
}

}  // namespace cayley_qmc::io
