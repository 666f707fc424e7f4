#include "covsteer/config.hpp"

#include "covsteer/csv.hpp"
#include "covsteer/errors.hpp"

#include "json.hpp"

#include <set>

namespace covsteer {

using json = nlohmann::ordered_json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

double number(const json& j, const std::string& what) {
  if (!j.is_number()) throw ConfigError(what + " must be a number");
  return j.get<double>();
}

std::vector<double> poly_coeffs(const json& j, const std::string& what) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array() || j.empty()) throw ConfigError(what + " must be a number or a nonempty coefficient array");
  std::vector<double> c;
  for (const auto& x : j) c.push_back(number(x, what));
  return c;
}

MatrixPoly matrix_poly(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty())
    throw ConfigError(what + " must be a nonempty row-major nested array");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  std::vector<std::vector<double>> coeffs;
  for (const auto& row : j) {
    if (!row.is_array() || static_cast<int>(row.size()) != cols) throw ConfigError(what + " has ragged rows");
    for (const auto& e : row) coeffs.push_back(poly_coeffs(e, what));
  }
  return MatrixPoly(rows, cols, std::move(coeffs));
}

Matrix constant_matrix(const json& j, const std::string& what) {
  const MatrixPoly p = matrix_poly(j, what);
  if (!p.is_constant()) throw ConfigError(what + " must be constant");
  return p(0.0);
}

json emit_coeffs(const std::vector<double>& c) {
  if (c.size() == 1) return c[0];
  return json(c);
}

json emit_poly(const MatrixPoly& p) {
  json rows = json::array();
  for (int i = 0; i < p.rows(); ++i) {
    json row = json::array();
    for (int k = 0; k < p.cols(); ++k) row.push_back(emit_coeffs(p.entry(i, k)));
    rows.push_back(row);
  }
  return rows;
}

json emit_matrix(const Matrix& m) { return emit_poly(MatrixPoly::constant(m)); }

NoiseComponent parse_component(const json& j, bool additive, const std::string& where) {
  reject_unknown(j, {"channel", "kind", "rate", "jump_std"}, where);
  NoiseComponent c;
  if (additive) {
    if (!j.contains("channel") || !j["channel"].is_number_integer()) throw ConfigError(where + ".channel must be an integer");
    c.channel = j["channel"].get<int>();
  }
  const std::string kind = j.value("kind", "");
  if (kind == "wiener") {
    c.kind = NoiseKind::wiener;
  } else if (kind == "compound_poisson") {
    c.kind = NoiseKind::compound_poisson;
    if (!j.contains("jump_std")) throw ConfigError(where + " needs jump_std");
    c.jump_std = number(j["jump_std"], where + ".jump_std");
  } else {
    throw ConfigError(where + ".kind must be 'wiener' or 'compound_poisson'");
  }
  if (!j.contains("rate")) throw ConfigError(where + " needs rate");
  c.rate = MatrixPoly::scalar(poly_coeffs(j["rate"], where + ".rate"));
  return c;
}

json emit_component(const NoiseComponent& c, bool additive) {
  json j = json::object();
  if (additive) j["channel"] = c.channel;
  j["kind"] = c.kind == NoiseKind::wiener ? "wiener" : "compound_poisson";
  j["rate"] = emit_coeffs(c.rate.entry(0, 0));
  if (c.kind == NoiseKind::compound_poisson) j["jump_std"] = c.jump_std;
  return j;
}

template <class T>
void read_option(const json& o, const char* key, T& field) {
  if (!o.contains(key)) return;
  const json& v = o[key];
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(std::string("options.") + key + " must be an integer");
  } else {
    if (!v.is_number()) throw ConfigError(std::string("options.") + key + " must be a number");
  }
  field = v.get<T>();
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  reject_unknown(doc, {"system", "noise", "boundary", "options", "output_dir"}, "config");
  if (!doc.contains("system")) throw ConfigError("config needs a 'system' object");

  RunConfig cfg;
  const json& s = doc["system"];
  reject_unknown(s, {"A", "B", "C", "D", "nu", "Q", "R", "channels"}, "system");
  for (const char* key : {"A", "B", "C", "Q", "R"})
    if (!s.contains(key)) throw ConfigError(std::string("system needs ") + key);
  SystemSpec& sys = cfg.system;
  sys.A = matrix_poly(s["A"], "system.A");
  sys.B = matrix_poly(s["B"], "system.B");
  sys.C = matrix_poly(s["C"], "system.C");
  sys.Q = matrix_poly(s["Q"], "system.Q");
  sys.R = matrix_poly(s["R"], "system.R");
  sys.n = sys.A.rows();
  sys.p = sys.B.cols();
  sys.q = sys.C.cols();

  if (doc.contains("noise")) {
    const json& nz = doc["noise"];
    reject_unknown(nz, {"additive", "multiplicative"}, "noise");
    NoiseModel model;
    model.q = sys.q;
    if (nz.contains("additive"))
      for (std::size_t i = 0; i < nz["additive"].size(); ++i)
        model.additive.push_back(parse_component(nz["additive"][i], true, "noise.additive[" + std::to_string(i) + "]"));
    if (nz.contains("multiplicative"))
      for (std::size_t i = 0; i < nz["multiplicative"].size(); ++i)
        model.multiplicative.push_back(
            parse_component(nz["multiplicative"][i], false, "noise.multiplicative[" + std::to_string(i) + "]"));
    cfg.noise = std::move(model);
  }

  // D and nu default to the intensities implied by the noise model.
  std::optional<Intensities> derived;
  if (cfg.noise) {
    try {
      derived = derive_intensities(*cfg.noise);
    } catch (const Error& e) {
      throw ConfigError(std::string("noise: ") + e.what());
    }
  }
  if (s.contains("D")) {
    sys.D = matrix_poly(s["D"], "system.D");
  } else if (derived) {
    sys.D = derived->D;
  } else {
    throw ConfigError("system needs D (or a noise model to derive it)");
  }
  if (s.contains("nu")) {
    sys.nu = MatrixPoly::scalar(poly_coeffs(s["nu"], "system.nu"));
  } else {
    sys.nu = derived ? derived->nu : MatrixPoly::scalar({0.0});
  }
  if (s.contains("channels")) {
    for (std::size_t i = 0; i < s["channels"].size(); ++i) {
      const json& c = s["channels"][i];
      const std::string where = "system.channels[" + std::to_string(i) + "]";
      reject_unknown(c, {"E", "nu"}, where);
      if (!c.contains("E") || !c.contains("nu")) throw ConfigError(where + " needs E and nu");
      sys.channels.push_back({matrix_poly(c["E"], where + ".E"), MatrixPoly::scalar(poly_coeffs(c["nu"], where + ".nu"))});
    }
  }
  try {
    check_dimensions(sys);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  if (doc.contains("boundary")) {
    const json& b = doc["boundary"];
    reject_unknown(b, {"Sigma0", "Sigma1"}, "boundary");
    if (!b.contains("Sigma0") || !b.contains("Sigma1")) throw ConfigError("boundary needs Sigma0 and Sigma1");
    BoundaryData bd{constant_matrix(b["Sigma0"], "boundary.Sigma0"), constant_matrix(b["Sigma1"], "boundary.Sigma1")};
    if (bd.Sigma0.rows() != sys.n || bd.Sigma0.cols() != sys.n || bd.Sigma1.rows() != sys.n || bd.Sigma1.cols() != sys.n)
      throw ConfigError("boundary covariances must be n x n");
    cfg.boundary = std::move(bd);
  }

  if (doc.contains("options")) {
    const json& o = doc["options"];
    reject_unknown(o,
                   {"grid_size", "residual_tol", "max_iterations", "ode_rtol", "ode_atol", "num_paths", "step_size",
                    "seed", "retain_paths", "checkpoint_stride", "threads", "certify_tol", "classify_grid",
                    "classify_probes", "construct_order"},
                   "options");
    RunOptions& r = cfg.options;
    read_option(o, "grid_size", r.grid_size);
    read_option(o, "residual_tol", r.residual_tol);
    read_option(o, "max_iterations", r.max_iterations);
    read_option(o, "ode_rtol", r.ode_rtol);
    read_option(o, "ode_atol", r.ode_atol);
    read_option(o, "num_paths", r.num_paths);
    read_option(o, "step_size", r.step_size);
    read_option(o, "seed", r.seed);
    read_option(o, "retain_paths", r.retain_paths);
    read_option(o, "checkpoint_stride", r.checkpoint_stride);
    read_option(o, "threads", r.threads);
    read_option(o, "certify_tol", r.certify_tol);
    read_option(o, "classify_grid", r.classify_grid);
    read_option(o, "classify_probes", r.classify_probes);
    read_option(o, "construct_order", r.construct_order);
    if (r.grid_size < 2 || r.classify_grid < 2) throw ConfigError("grid sizes must be >= 2");
    if (r.num_paths < 1) throw ConfigError("num_paths must be >= 1");
  }
  if (doc.contains("output_dir")) {
    if (!doc["output_dir"].is_string()) throw ConfigError("output_dir must be a string");
    cfg.output_dir = doc["output_dir"].get<std::string>();
  }
  return cfg;
}

RunConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

std::string emit_config(const RunConfig& cfg) {
  const SystemSpec& sys = cfg.system;
  json doc = json::object();
  json s = json::object();
  s["A"] = emit_poly(sys.A);
  s["B"] = emit_poly(sys.B);
  s["C"] = emit_poly(sys.C);
  s["D"] = emit_poly(sys.D);
  s["nu"] = emit_coeffs(sys.nu.entry(0, 0));
  s["Q"] = emit_poly(sys.Q);
  s["R"] = emit_poly(sys.R);
  if (!sys.channels.empty()) {
    json ch = json::array();
    for (const auto& c : sys.channels) ch.push_back({{"E", emit_poly(c.E)}, {"nu", emit_coeffs(c.nu.entry(0, 0))}});
    s["channels"] = ch;
  }
  doc["system"] = s;
  if (cfg.noise) {
    json nz = json::object();
    nz["additive"] = json::array();
    for (const auto& c : cfg.noise->additive) nz["additive"].push_back(emit_component(c, true));
    nz["multiplicative"] = json::array();
    for (const auto& c : cfg.noise->multiplicative) nz["multiplicative"].push_back(emit_component(c, false));
    doc["noise"] = nz;
  }
  if (cfg.boundary) doc["boundary"] = {{"Sigma0", emit_matrix(cfg.boundary->Sigma0)}, {"Sigma1", emit_matrix(cfg.boundary->Sigma1)}};
  const RunOptions& r = cfg.options;
  doc["options"] = {{"grid_size", r.grid_size},
                    {"residual_tol", r.residual_tol},
                    {"max_iterations", r.max_iterations},
                    {"ode_rtol", r.ode_rtol},
                    {"ode_atol", r.ode_atol},
                    {"num_paths", r.num_paths},
                    {"step_size", r.step_size},
                    {"seed", r.seed},
                    {"retain_paths", r.retain_paths},
                    {"checkpoint_stride", r.checkpoint_stride},
                    {"threads", r.threads},
                    {"certify_tol", r.certify_tol},
                    {"classify_grid", r.classify_grid},
                    {"classify_probes", r.classify_probes},
                    {"construct_order", r.construct_order}};
  doc["output_dir"] = cfg.output_dir;
  return doc.dump(2) + "\n";
}

SteeringOptions steering_options(const RunOptions& opt) {
  SteeringOptions s;
  s.grid_size = opt.grid_size;
  s.residual_tol = opt.residual_tol;
  s.max_iterations = opt.max_iterations;
  s.tol = {opt.ode_rtol, opt.ode_atol};
  return s;
}

SimulationConfig simulation_config(const RunOptions& opt, const Matrix& sigma0) {
  SimulationConfig c;
  c.num_paths = opt.num_paths;
  c.step_size = opt.step_size;
  c.master_seed = opt.seed;
  c.Sigma0 = sigma0;
  c.retain_paths = opt.retain_paths;
  c.checkpoint_stride = opt.checkpoint_stride;
  c.threads = opt.threads;
  return c;
}

namespace {

bool same_component(const NoiseComponent& a, const NoiseComponent& b) {
  return a.channel == b.channel && a.kind == b.kind && a.rate == b.rate && a.jump_std == b.jump_std;
}

bool same_components(const std::vector<NoiseComponent>& a, const std::vector<NoiseComponent>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!same_component(a[i], b[i])) return false;
  return true;
}

}  // namespace

bool same_config(const RunConfig& a, const RunConfig& b) {
  const SystemSpec &x = a.system, &y = b.system;
  if (x.n != y.n || x.p != y.p || x.q != y.q || !(x.A == y.A) || !(x.B == y.B) || !(x.C == y.C) || !(x.D == y.D) ||
      !(x.nu == y.nu) || !(x.Q == y.Q) || !(x.R == y.R) || x.channels.size() != y.channels.size())
    return false;
  for (std::size_t i = 0; i < x.channels.size(); ++i)
    if (!(x.channels[i].E == y.channels[i].E) || !(x.channels[i].nu == y.channels[i].nu)) return false;
  if (a.noise.has_value() != b.noise.has_value()) return false;
  if (a.noise && (a.noise->q != b.noise->q || !same_components(a.noise->additive, b.noise->additive) ||
                  !same_components(a.noise->multiplicative, b.noise->multiplicative)))
    return false;
  if (a.boundary.has_value() != b.boundary.has_value()) return false;
  if (a.boundary && (a.boundary->Sigma0 != b.boundary->Sigma0 || a.boundary->Sigma1 != b.boundary->Sigma1)) return false;
  return a.options == b.options && a.output_dir == b.output_dir;
}

}  // namespace covsteer
