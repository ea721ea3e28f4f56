#pragma once

// JSON and CSV emission. Floating-point values are written with 17
// significant digits so every double round-trips exactly.

#include "monolab/equilibrium.hpp"
#include "monolab/limits.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>

namespace monolab {

using Json = nlohmann::ordered_json;

inline std::string format_double(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void dump_json(std::ostream& os, const Json& j, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ",\n";
        first = false;
        os << pad << Json(it.key()).dump() << ": ";
        dump_json(os, it.value(), indent, depth + 1);
      }
      os << '\n' << close_pad << '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_primitive(); });
      os << '[';
      bool first = true;
      for (const Json& e : j) {
        if (!first) os << ',';
        if (flat) {
          if (!first) os << ' ';
        } else {
          os << '\n' << pad;
        }
        first = false;
        dump_json(os, e, indent, depth + 1);
      }
      if (!flat) os << '\n' << close_pad;
      os << ']';
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      if (std::isfinite(v)) {
        os << format_double(v);
      } else {
        os << "null";
      }
      return;
    }
    default:
      os << j.dump();
  }
}

}  // namespace detail

/// Pretty-printed JSON with %.17g floats; non-finite floats become null.
inline std::string to_json_text(const Json& j) {
  std::ostringstream os;
  detail::dump_json(os, j, 2, 0);
  os << '\n';
  return os.str();
}

inline Json to_json(const StateVec& u) {
  Json a = Json::array();
  for (std::size_t i = 0; i < u.size(); ++i) a.push_back(u[i]);
  return a;
}

inline Json to_json(const EquilibriumRecord& r, std::size_t id) {
  Json j;
  j["id"] = id;
  j["stability"] = stability_name(r.stability);
  j["rho"] = r.rho;
  j["horizon"] = r.horizon;
  j["growth_rate"] = r.growth_rate();
  j["residual"] = r.residual;
  j["irreducible"] = r.irreducible;
  j["spectral_converged"] = r.spectral_converged;
  j["sup_norm"] = r.state.sup_norm();
  j["state"] = to_json(r.state);
  j["principal_vector"] = to_json(r.principal_vector);
  return j;
}

inline Json to_json(const EquilibriumDB& db) {
  Json a = Json::array();
  for (std::size_t i = 0; i < db.size(); ++i) a.push_back(to_json(db[i], i));
  return a;
}

inline std::string csv_id(const std::optional<std::size_t>& id) { return id ? std::to_string(*id) : ""; }

/// Header of classification rows.
inline constexpr const char* kClassificationCsvHeader = "index,t_param,tag,equilibrium_id,distance,horizon";

inline void write_classification_row(std::ostream& os, std::size_t index, double t_param, const TrajectoryClass& c) {
  os << index << ',' << format_double(t_param) << ',' << tag_name(c.tag) << ',' << csv_id(c.equilibrium_id) << ','
     << format_double(c.evidence.distance) << ',' << format_double(c.evidence.horizon) << '\n';
}

}  // namespace monolab
