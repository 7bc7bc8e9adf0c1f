#include "job.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace ope::job {

namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

struct Location {
  int line = 0;
  int value_column = 0;  // 1-based column of the first character of the raw value
  std::string raw;       // value text as written
};

// property_tree does not keep positions, so find the defining line again.
Location locate(const std::string& text, const std::string& section, const std::string& key) {
  std::istringstream in(text);
  std::string line, current;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == ';' || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      current = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || current != section || trim(line.substr(0, eq)) != key) continue;
    std::size_t v = line.find_first_not_of(" \t", eq + 1);
    if (v == std::string::npos) v = line.size();
    return {n, static_cast<int>(v) + 1, line.substr(v)};
  }
  return {};
}

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"job", {"mass", "ops", "points", "target", "order", "method"}},
      {"quad", {"rho_frac", "r_far", "rel_tol", "max_evals", "mc_samples", "inner_samples", "seed", "monte_carlo"}},
      {"output", {"path", "timing"}},
      {"table", {"separations", "masses"}},
  };
  return keys;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (trim(s.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError(what + ": expected a number, got '" + s + "'");
}

std::uint64_t to_unsigned(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    if (!s.empty() && s[0] != '-') {
      const unsigned long long v = std::stoull(s, &used);
      if (trim(s.substr(used)).empty()) return v;
    }
  } catch (const std::exception&) {
  }
  throw UsageError(what + ": expected a non-negative integer, got '" + s + "'");
}

bool to_bool(const std::string& s, const std::string& what) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw UsageError(what + ": expected true or false, got '" + s + "'");
}

bool is_all_target(const std::string& t, int* dim) {
  const std::string prefix = "all<=";
  if (t.rfind(prefix, 0) != 0) return false;
  const std::string rest = trim(t.substr(prefix.size()));
  if (rest.empty() || rest.find_first_not_of("0123456789") != std::string::npos)
    throw UsageError("target '" + t + "': expected all<=D with an integer D");
  if (dim) *dim = std::stoi(rest);
  return true;
}

// ParseError messages start with "line:column: "; drop it when we relocate.
std::string bare_message(const ParseError& e) {
  const std::string w = e.what();
  const std::string prefix = std::to_string(e.line()) + ":" + std::to_string(e.column()) + ": ";
  return w.rfind(prefix, 0) == 0 ? w.substr(prefix.size()) : w;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void render_into(const Document& j, int indent, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (j.type()) {
    case Document::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += inner + Document(it.key()).dump() + ": ";
        render_into(it.value(), indent + 1, out);
      }
      out += "\n" + pad + "}";
      return;
    }
    case Document::value_t::array: {
      bool flat = true;
      for (const auto& e : j) flat = flat && !e.is_structured();
      if (j.empty() || flat) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          render_into(j[i], indent + 1, out);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += inner;
        render_into(j[i], indent + 1, out);
      }
      out += "\n" + pad + "]";
      return;
    }
    case Document::value_t::number_float: {
      const double v = j.get<double>();
      if (std::isfinite(v)) {
        out += fmt17(v);
      } else {
        out += std::isnan(v) ? "\"nan\"" : (v > 0 ? "\"inf\"" : "\"-inf\"");
      }
      return;
    }
    default:
      out += j.dump();
  }
}

Document region_list(const NumericCoeff& n) {
  Document arr = Document::array();
  for (const auto& rc : n.breakdown)
    arr.push_back({{"region", rc.region}, {"value", rc.value}, {"error", rc.abs_error}, {"evals", rc.evals}});
  return arr;
}

Document part_document(const IntegrandPart& p) {
  Document d;
  d["exact"] = to_string(p.symbolic);
  Document scaled = Document::array();
  for (const auto& [c, e] : p.scaled) scaled.push_back({{"factor", c}, {"expression", to_string(e)}});
  d["scaled"] = scaled;
  d["nested"] = to_string(p.nested);
  return d;
}

Document counter_terms(const Integrand& in) {
  Document d;
  d["bracket_order"] = in.order;
  if (in.order == 0) {
    d["main"] = to_string(in.main.symbolic);
    d["uv"] = to_string(in.uv.symbolic);
    d["ir"] = to_string(in.ir.symbolic);
    d["bracket"] = to_string(in.assembled().symbolic);
  } else {
    d["main"] = part_document(in.main);
    d["uv"] = part_document(in.uv);
    d["ir"] = part_document(in.ir);
  }
  d["zero_channels"] = in.audit;
  return d;
}

Document slope_document(const SlopeReport& s) {
  return {{"uv_slopes", s.uv_slope},
          {"uv_bound", -3.9},
          {"uv_ok", s.uv_ok},
          {"ir_slopes", s.ir_slopes},
          {"ir_nonzero_samples", s.ir_nonzero},
          {"ir_bound", -6.0},
          {"ir_ok", s.ir_ok}};
}

Document points_document(const std::vector<Vec4>& pts) {
  Document arr = Document::array();
  for (const auto& p : pts) arr.push_back({p[0], p[1], p[2], p[3]});
  return arr;
}

bool is_zero_result(const CoefficientResult& r) {
  return r.path == "zero" || (r.symbolic && r.symbolic->is_zero());
}

}  // namespace

UsageError::UsageError(const std::string& msg, int line, int column)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg
                                  : msg),
      line_(line),
      column_(column) {}

std::vector<double> parse_numbers(const std::string& text) {
  std::vector<double> out;
  std::string t = text;
  for (char& c : t)
    if (c == ',') c = ' ';
  std::istringstream in(t);
  std::string tok;
  while (in >> tok) out.push_back(to_double(tok, "number list"));
  return out;
}

std::vector<Vec4> parse_points(const std::string& text) {
  std::vector<Vec4> out;
  if (trim(text).empty()) return out;
  for (const auto& chunk : split(text, ';')) {
    const auto v = parse_numbers(chunk);
    if (v.size() != 4)
      throw UsageError("point '" + trim(chunk) + "' must have 4 coordinates, got " + std::to_string(v.size()));
    out.push_back({v[0], v[1], v[2], v[3]});
  }
  return out;
}

JobConfig parse_config(const std::string& text, const std::string& origin) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw UsageError(origin + ": " + e.message(), static_cast<int>(e.line()), 1);
  }
  JobConfig cfg;
  for (const auto& [section, body] : tree) {
    auto sec = known_keys().find(section);
    if (sec == known_keys().end()) {
      if (body.empty()) {
        const Location loc = locate(text, "", section);
        throw UsageError(origin + ": key '" + section + "' must be inside a section", loc.line, 1);
      }
      throw UsageError(origin + ": unknown section [" + section + "]");
    }
    for (const auto& [key, node] : body) {
      const Location loc = locate(text, section, key);
      const std::string where = origin + " [" + section + "] " + key;
      if (!sec->second.count(key)) throw UsageError(origin + ": unknown key '" + key + "' in [" + section + "]", loc.line, 1);
      const std::string value = trim(node.data());
      try {
        if (section == "job") {
          if (key == "mass") cfg.mass = to_double(value, where);
          if (key == "target") cfg.target = value;
          if (key == "order") cfg.order = static_cast<int>(to_unsigned(value, where));
          if (key == "points") cfg.points = parse_points(value);
          if (key == "method") {
            try {
              cfg.method = parse_method(value);
            } catch (const std::invalid_argument& e) {
              throw UsageError(where + ": " + e.what());
            }
          }
          if (key == "ops") {
            cfg.ops.clear();
            // offsets are relative to the raw value so errors point into the file
            std::size_t offset = 0;
            for (const auto& item : split(loc.raw.empty() ? value : loc.raw, ',')) {
              const std::string t = trim(item);
              const std::size_t lead = item.find_first_not_of(" \t");
              if (!t.empty()) {
                try {
                  parse_operator(t, loc.line);
                } catch (const ParseError& e) {
                  const int col = loc.value_column + static_cast<int>(offset + (lead == std::string::npos ? 0 : lead)) +
                                  e.column() - 1;
                  throw UsageError(origin + ": operator '" + t + "': " + bare_message(e), loc.line, col);
                }
                cfg.ops.push_back(t);
              }
              offset += item.size() + 1;
            }
          }
        } else if (section == "quad") {
          if (key == "rho_frac") cfg.rho_frac = to_double(value, where);
          if (key == "r_far") cfg.r_far = to_double(value, where);
          if (key == "rel_tol") cfg.rel_tol = to_double(value, where);
          if (key == "max_evals") cfg.max_evals = to_unsigned(value, where);
          if (key == "mc_samples") cfg.mc_samples = to_unsigned(value, where);
          if (key == "inner_samples") cfg.inner_samples = to_unsigned(value, where);
          if (key == "seed") cfg.seed = to_unsigned(value, where);
          if (key == "monte_carlo") cfg.monte_carlo = to_bool(value, where);
        } else if (section == "output") {
          if (key == "path") cfg.output = value;
          if (key == "timing") cfg.timing = to_bool(value, where);
        } else if (section == "table") {
          if (key == "separations") cfg.separations = parse_numbers(value);
          if (key == "masses") cfg.masses = parse_numbers(value);
        }
      } catch (const UsageError& e) {
        if (e.line() > 0) throw;
        throw UsageError(e.what(), loc.line, loc.value_column);
      }
    }
  }
  return cfg;
}

JobConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::vector<CompositeOp> job_operators(const JobConfig& cfg) {
  std::vector<CompositeOp> ops;
  for (const auto& s : cfg.ops) {
    try {
      ops.push_back(parse_operator(s));
    } catch (const ParseError& e) {
      throw UsageError(std::string("operator '") + s + "': " + e.what(), 0, 0);
    }
  }
  return ops;
}

void validate(const JobConfig& cfg) {
  if (cfg.ops.empty()) throw UsageError("ops: at least one operator is required");
  job_operators(cfg);
  if (!(cfg.mass > 0.0) || !std::isfinite(cfg.mass)) throw UsageError("mass must be positive");
  for (double m : cfg.masses)
    if (!(m > 0.0)) throw UsageError("masses must be positive");
  if (cfg.order < 0 || cfg.order > 2) throw UsageError("order must be 0, 1 or 2");
  if (cfg.points.size() != cfg.ops.size())
    throw UsageError("points count (" + std::to_string(cfg.points.size()) + ") must equal ops count (" +
                     std::to_string(cfg.ops.size()) + ")");
  if (cfg.points.size() > 1 && !(min_pairwise_distance(cfg.points) > 0.0))
    throw UsageError("points must be pairwise distinct");
  if (!is_all_target(cfg.target, nullptr)) {
    try {
      parse_operator(cfg.target);
    } catch (const ParseError& e) {
      throw UsageError(std::string("target: ") + e.what());
    }
  }
  if (cfg.rho_frac && !(*cfg.rho_frac > 0.0 && *cfg.rho_frac < 0.5)) throw UsageError("rho_frac must lie in (0, 0.5)");
  if (cfg.rel_tol && !(*cfg.rel_tol > 0.0)) throw UsageError("rel_tol must be positive");
  if (cfg.r_far && !(*cfg.r_far > 0.0)) throw UsageError("r_far must be positive");
}

std::vector<CompositeOp> job_targets(const JobConfig& cfg, const std::vector<CompositeOp>& ops) {
  int dim = 0;
  if (!is_all_target(cfg.target, &dim)) return {parse_operator(cfg.target)};
  std::vector<CompositeOp> out;
  for (const auto& t : enumerate_operators(dim))
    if (!vanishes_identically(ops, t, cfg.order)) out.push_back(t);
  return out;
}

DeformOptions job_options(const JobConfig& cfg) {
  DeformOptions o;
  if (cfg.rho_frac) o.plan.rho_frac = *cfg.rho_frac;
  if (cfg.r_far) o.plan.r_far = *cfg.r_far;
  if (cfg.rel_tol) o.plan.rel_tol = *cfg.rel_tol;
  if (cfg.max_evals) o.plan.max_evals = *cfg.max_evals;
  if (cfg.mc_samples) o.mc_samples = *cfg.mc_samples;
  if (cfg.inner_samples) o.inner_samples = *cfg.inner_samples;
  if (cfg.seed) o.seed = *cfg.seed;
  o.monte_carlo = cfg.monte_carlo;
  return o;
}

Document run_compute(const JobConfig& cfg) {
  validate(cfg);
  const auto ops = job_operators(cfg);
  const auto targets = job_targets(cfg, ops);
  const DeformOptions opts = job_options(cfg);
  const bool all = is_all_target(cfg.target, nullptr);

  Document doc;
  doc["tool"] = "ope";
  Document job;
  job["mass"] = cfg.mass;
  Document op_list = Document::array();
  for (const auto& o : ops) op_list.push_back(format_operator(o));
  job["ops"] = op_list;
  job["points"] = points_document(cfg.points);
  job["target"] = cfg.target;
  job["order"] = cfg.order;
  job["method"] = to_string(cfg.method);
  job["quad"] = {{"rho_frac", opts.plan.rho_frac},
                 {"r_far", opts.plan.r_far},
                 {"rel_tol", opts.plan.rel_tol},
                 {"max_evals", opts.plan.max_evals},
                 {"mc_samples", opts.mc_samples},
                 {"inner_samples", opts.inner_samples},
                 {"seed", opts.seed},
                 {"monte_carlo", opts.monte_carlo}};
  doc["job"] = job;

  CoeffTable table(PointConfig(cfg.points), cfg.mass);
  Document results = Document::array();
  for (const auto& target : targets) {
    const auto t0 = std::chrono::steady_clock::now();
    const CoefficientResult r = coefficient(ops, target, cfg.order, cfg.method, table, opts);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (all && is_zero_result(r)) continue;
    Document e;
    e["target"] = format_operator(target);
    e["order"] = cfg.order;
    e["path"] = r.path;
    e["experimental"] = r.experimental;
    e["symbolic"] = r.symbolic ? Document(to_string(*r.symbolic)) : Document(nullptr);
    e["value"] = r.value;
    e["error"] = r.abs_error;
    if (r.numeric) {
      e["evals"] = r.numeric->evals;
      e["abs_mass"] = r.numeric->abs_mass;
      e["regions"] = region_list(*r.numeric);
    }
    if (r.integrand) e["counter_terms"] = counter_terms(*r.integrand);
    if (r.slopes) e["slopes"] = slope_document(*r.slopes);
    if (cfg.timing) e["seconds"] = secs;
    results.push_back(e);
  }
  doc["results"] = results;
  return doc;
}

std::string run_table(const JobConfig& cfg_in) {
  JobConfig cfg = cfg_in;
  if (cfg.points.empty() && cfg.ops.size() == 2) cfg.points = {{0, 0, 0, 0}, {1, 0, 0, 0}};
  validate(cfg);
  if (cfg.separations.empty()) throw UsageError("table needs at least one separation");
  for (double s : cfg.separations)
    if (!(s > 0.0)) throw UsageError("separations must be positive");
  const auto ops = job_operators(cfg);
  const auto targets = job_targets(cfg, ops);
  const DeformOptions opts = job_options(cfg);
  const std::vector<double> masses = cfg.masses.empty() ? std::vector<double>{cfg.mass} : cfg.masses;
  if (cfg.points.size() < 2) throw UsageError("table needs at least two points");

  // the configuration is rescaled about the last point so that |x_1 - x_N| equals the separation
  const Vec4 base = cfg.points.back();
  const double ref = norm(cfg.points.front() - base);

  std::string out = "separation,mass,target,order,value,err\n";
  for (double m : masses) {
    for (double s : cfg.separations) {
      std::vector<Vec4> pts;
      for (const auto& p : cfg.points) pts.push_back(base + (s / ref) * (p - base));
      CoeffTable table{PointConfig(pts), m};
      for (const auto& t : targets) {
        const CoefficientResult r = coefficient(ops, t, cfg.order, cfg.method, table, opts);
        out += fmt17(s) + "," + fmt17(m) + "," + format_operator(t) + "," + std::to_string(cfg.order) + "," +
               fmt17(r.value) + "," + fmt17(r.abs_error) + "\n";
      }
    }
  }
  return out;
}

Document verify_document(const std::string& suite, const verify::Report& report) {
  Document doc;
  doc["suite"] = suite;
  doc["ok"] = report.ok();
  Document checks = Document::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"criterion", c.criterion},
                      {"suite", c.suite},
                      {"check", c.name},
                      {"target", c.expected},
                      {"measured", c.measured},
                      {"tolerance", c.tolerance},
                      {"pass", c.pass},
                      {"seconds", c.seconds}});
  }
  doc["checks"] = checks;
  return doc;
}

std::string render(const Document& doc) {
  std::string out;
  render_into(doc, 0, out);
  out += "\n";
  return out;
}

}  // namespace ope::job
