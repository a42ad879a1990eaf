#include "fracconv/io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "fracconv/errors.hpp"

namespace fracconv {

using nlohmann::json;

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || item.key() == a;
    if (!known) throw ConfigError(where + ": unknown key \"" + item.key() + "\"");
  }
}

namespace {

double number(const json& j, const char* key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ConfigError(where + ": \"" + key + "\" must be a number");
  return j.at(key).get<double>();
}

std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : j) {
    if (!x.is_number()) throw ConfigError(where + ": expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

SpectralMeasure measure_from_json(const json& j) {
  reject_unknown_keys(j, {"density", "atoms", "name"}, "measure");
  SpectralMeasure mu;
  if (j.contains("density") && !j.at("density").is_null()) {
    const json& d = j.at("density");
    if (!d.is_object() || !d.contains("kind") || !d.at("kind").is_string())
      throw ConfigError("measure.density: needs a string \"kind\"");
    const std::string kind = d.at("kind").get<std::string>();
    const std::string where = "measure.density(" + kind + ")";
    DensitySpec& s = mu.density;
    if (kind == "zero") {
      reject_unknown_keys(d, {"kind"}, where);
      s.kind = DensityKind::kZero;
    } else if (kind == "constant") {
      reject_unknown_keys(d, {"kind", "value"}, where);
      s.kind = DensityKind::kConstant;
      s.value = number(d, "value", 1.0, where);
    } else if (kind == "gaussian") {
      reject_unknown_keys(d, {"kind", "mass", "sigma"}, where);
      s.kind = DensityKind::kGaussian;
      s.mass = number(d, "mass", 1.0, where);
      s.sigma = number(d, "sigma", 1.0, where);
    } else if (kind == "rational") {
      reject_unknown_keys(d, {"kind", "scale", "power"}, where);
      s.kind = DensityKind::kRational;
      s.scale = number(d, "scale", 1.0, where);
      s.power = number(d, "power", 0.0, where);
    } else if (kind == "box") {
      reject_unknown_keys(d, {"kind", "value", "half_width"}, where);
      s.kind = DensityKind::kBox;
      s.value = number(d, "value", 1.0, where);
      s.half_width = number(d, "half_width", 1.0, where);
    } else if (kind == "table") {
      reject_unknown_keys(d, {"kind", "xi", "values"}, where);
      s.kind = DensityKind::kTable;
      if (!d.contains("xi") || !d.contains("values")) throw ConfigError(where + ": needs xi and values");
      s.table_xi = numbers(d.at("xi"), where + ".xi");
      s.table_values = numbers(d.at("values"), where + ".values");
    } else {
      throw ConfigError("measure.density: unknown kind \"" + kind + "\"");
    }
  }
  if (j.contains("atoms")) {
    if (!j.at("atoms").is_array()) throw ConfigError("measure.atoms: expected an array of [location, mass]");
    for (const auto& a : j.at("atoms")) {
      if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number())
        throw ConfigError("measure.atoms: each atom is [location, mass]");
      mu.atoms.push_back({a[0].get<double>(), a[1].get<double>()});
    }
  }
  try {
    mu.validate();
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  return mu;
}

json measure_to_json(const SpectralMeasure& mu) {
  json d;
  const DensitySpec& s = mu.density;
  switch (s.kind) {
    case DensityKind::kZero:
      d = {{"kind", "zero"}};
      break;
    case DensityKind::kConstant:
      d = {{"kind", "constant"}, {"value", s.value}};
      break;
    case DensityKind::kGaussian:
      d = {{"kind", "gaussian"}, {"mass", s.mass}, {"sigma", s.sigma}};
      break;
    case DensityKind::kRational:
      d = {{"kind", "rational"}, {"scale", s.scale}, {"power", s.power}};
      break;
    case DensityKind::kBox:
      d = {{"kind", "box"}, {"value", s.value}, {"half_width", s.half_width}};
      break;
    case DensityKind::kTable:
      d = {{"kind", "table"}, {"xi", s.table_xi}, {"values", s.table_values}};
      break;
  }
  json atoms = json::array();
  for (const Atom& a : mu.atoms) atoms.push_back({a.location, a.mass});
  return {{"density", d}, {"atoms", atoms}};
}

SpectralMeasure load_measure(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open measure file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("measure file " + path.string() + ": " + e.what());
  }
  return measure_from_json(j);
}

ProcessSpec process_from_json(const json& j, const KernelGrid& grid) {
  reject_unknown_keys(j, {"kind", "profile", "b", "table", "lipschitz", "b_scale"}, "process");
  ProcessSpec spec;
  const std::string kind = j.value("kind", std::string("constant-one"));
  if (kind == "constant-one")
    spec.kind = ProcessKind::kConstantOne;
  else if (kind == "deterministic-profile")
    spec.kind = ProcessKind::kDeterministicProfile;
  else if (kind == "frozen-sample")
    spec.kind = ProcessKind::kFrozenSample;
  else
    throw ConfigError("process: unknown kind \"" + kind + "\"");
  if (j.contains("profile")) {
    const json& p = j.at("profile");
    if (p.is_array()) {
      spec.profile = numbers(p, "process.profile");
    } else {
      reject_unknown_keys(p, {"offset", "amplitude", "shape", "width"}, "process.profile");
      const double offset = number(p, "offset", 1.0, "process.profile");
      const double amplitude = number(p, "amplitude", 0.0, "process.profile");
      const double width = number(p, "width", 1.0, "process.profile");
      const std::string shape = p.value("shape", std::string("constant"));
      spec.profile.resize(grid.size());
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid.node(i);
        double f = 1.0;
        if (shape == "sine")
          f = std::sin(x / width);
        else if (shape == "gaussian")
          f = std::exp(-0.5 * x * x / (width * width));
        else if (shape != "constant")
          throw ConfigError("process.profile: unknown shape \"" + shape + "\"");
        spec.profile[i] = offset + amplitude * f;
      }
    }
  } else if (spec.kind != ProcessKind::kConstantOne) {
    throw ConfigError("process: kind \"" + kind + "\" needs a profile");
  }
  const std::string b = j.value("b", std::string("identity"));
  if (b == "identity")
    spec.b = Coefficient::kIdentity;
  else if (b == "one")
    spec.b = Coefficient::kOne;
  else if (b == "lipschitz-table")
    spec.b = Coefficient::kLipschitzTable;
  else
    throw ConfigError("process: unknown coefficient \"" + b + "\"");
  if (j.contains("table")) {
    reject_unknown_keys(j.at("table"), {"u", "b"}, "process.table");
    spec.table_u = numbers(j.at("table").value("u", json::array()), "process.table.u");
    spec.table_b = numbers(j.at("table").value("b", json::array()), "process.table.b");
  }
  spec.lipschitz = number(j, "lipschitz", 0.0, "process");
  spec.b_scale = number(j, "b_scale", 1.0, "process");
  try {
    spec.validate(grid);
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

json process_to_json(const ProcessSpec& spec) {
  json j;
  j["kind"] = spec.kind == ProcessKind::kConstantOne           ? "constant-one"
              : spec.kind == ProcessKind::kDeterministicProfile ? "deterministic-profile"
                                                                : "frozen-sample";
  if (spec.kind != ProcessKind::kConstantOne) j["profile"] = spec.profile;
  j["b"] = spec.b == Coefficient::kIdentity ? "identity" : spec.b == Coefficient::kOne ? "one" : "lipschitz-table";
  if (spec.b == Coefficient::kLipschitzTable) {
    j["table"] = {{"u", spec.table_u}, {"b", spec.table_b}};
    j["lipschitz"] = spec.lipschitz;
  }
  j["b_scale"] = spec.b_scale;
  return j;
}

}  // namespace fracconv
