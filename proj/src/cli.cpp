#include "sparseweak/cli.hpp"

#include <unistd.h>

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <variant>
#include <json.hpp>

#include "sparseweak/errors.hpp"
#include "sparseweak/format.hpp"
#include "sparseweak/maximal.hpp"
#include "sparseweak/random.hpp"

namespace sparseweak {
namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"grid", {"d", "L"}},
      {"young", {"spec", "kind", "p", "delta", "table", "tol"}},
      {"sparse", {"file", "seed", "lambda0", "N", "level_gap", "size", "child_fraction", "packing"}},
      {"operator", {"alpha", "nu", "lambda1", "removal", "kind"}},
      {"functions", {"f", "w"}},
      {"run", {"trials", "seed", "threads", "lemma", "levels", "steps", "spikes"}},
      {"output", {"json", "csv", "out", "trend"}},
  };
  return keys;
}

void check_key(const std::string& section, const std::string& key) {
  const auto& keys = known_keys();
  auto it = keys.find(section);
  if (it == keys.end()) throw PreconditionError("config: unknown section [" + section + "]");
  if (!it->second.contains(key)) throw PreconditionError("config: unknown key '" + key + "' in [" + section + "]");
}

// Typed accessors ------------------------------------------------------------

const std::string* lookup(const ConfigValues& v, const std::string& key) {
  auto it = v.find(key);
  return it == v.end() ? nullptr : &it->second;
}

double as_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw PreconditionError(key + ": expected a real number, got '" + text + "'");
  return x;
}

long long as_integer(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  long long x = 0;
  try {
    x = std::stoll(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw PreconditionError(key + ": expected an integer, got '" + text + "'");
  return x;
}

std::uint64_t as_unsigned(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  unsigned long long x = 0;
  try {
    if (!text.empty() && text[0] != '-') x = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw PreconditionError(key + ": expected a nonnegative integer, got '" + text + "'");
  }
  return x;
}

bool as_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw PreconditionError(key + ": expected true or false, got '" + text + "'");
}

void read_real(const ConfigValues& v, const std::string& key, double& out) {
  if (const auto* s = lookup(v, key)) out = as_double(key, *s);
}

void read_int(const ConfigValues& v, const std::string& key, int& out) {
  if (const auto* s = lookup(v, key)) {
    const long long x = as_integer(key, *s);
    if (x < -1000000 || x > 1000000) throw PreconditionError(key + ": value out of range");
    out = static_cast<int>(x);
  }
}

template <class T>
void read_unsigned(const ConfigValues& v, const std::string& key, T& out) {
  if (const auto* s = lookup(v, key)) out = static_cast<T>(as_unsigned(key, *s));
}

Json parse_json(const std::string& key, const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw PreconditionError(key + ": malformed JSON (" + e.what() + ")");
  }
}

YoungKind young_kind(const std::string& name) {
  if (name == "power") return YoungKind::power;
  if (name == "loglog") return YoungKind::loglog;
  if (name == "linear") return YoungKind::linear;
  if (name == "table") return YoungKind::table;
  throw PreconditionError("young.kind: expected power, loglog, linear or table, got '" + name + "'");
}

std::vector<std::pair<double, double>> young_table(const Json& j) {
  std::vector<std::pair<double, double>> table;
  if (!j.is_array()) throw PreconditionError("young.table: expected an array of [t, phi(t)] pairs");
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number()) {
      throw PreconditionError("young.table: every entry must be a pair of numbers");
    }
    table.emplace_back(row[0].get<double>(), row[1].get<double>());
  }
  return table;
}

double json_real(const Json& j, const std::string& key) {
  if (!j.is_number()) throw PreconditionError(key + ": expected a number");
  return j.get<double>();
}

// The blob {"kind": ..., "p": ..., "delta": ..., "table": [...]} is read
// first; the individual keys override its fields.
YoungSpec young_spec(const ConfigValues& v) {
  YoungSpec spec;
  spec.kind = YoungKind::loglog;
  if (const auto* s = lookup(v, "young.spec")) {
    const Json j = parse_json("young.spec", *s);
    if (!j.is_object()) throw PreconditionError("young.spec: expected a JSON object");
    for (const auto& [name, value] : j.items()) {
      if (name == "kind") {
        if (!value.is_string()) throw PreconditionError("young.spec: 'kind' must be a string");
        spec.kind = young_kind(value.get<std::string>());
      } else if (name == "p") {
        spec.p = json_real(value, "young.spec.p");
      } else if (name == "delta") {
        spec.delta = json_real(value, "young.spec.delta");
      } else if (name == "table") {
        spec.table = young_table(value);
      } else {
        throw PreconditionError("young.spec: unknown field '" + name + "'");
      }
    }
  }
  if (const auto* s = lookup(v, "young.kind")) spec.kind = young_kind(*s);
  read_real(v, "young.p", spec.p);
  read_real(v, "young.delta", spec.delta);
  if (const auto* s = lookup(v, "young.table")) spec.table = young_table(parse_json("young.table", *s));
  return spec;
}

GeneratorSpec generator_from_json(const std::string& key, const Json& j) {
  GeneratorSpec g;
  g.seed = 0;
  for (const auto& [name, value] : j.items()) {
    if (name == "generator") {
      if (!value.is_string()) throw PreconditionError(key + ": 'generator' must be a string");
      g.name = value.get<std::string>();
    } else if (name == "seed") {
      if (!value.is_number_unsigned()) throw PreconditionError(key + ": 'seed' must be a nonnegative integer");
      g.seed = value.get<std::uint64_t>();
    } else if (name == "params") {
      if (!value.is_object()) throw PreconditionError(key + ": 'params' must be an object");
      for (const auto& [pname, pvalue] : value.items()) {
        if (!pvalue.is_number()) throw PreconditionError(key + ": parameter '" + pname + "' must be a number");
        g.params[pname] = pvalue.get<double>();
      }
    } else {
      throw PreconditionError(key + ": unknown field '" + name + "'");
    }
  }
  if (g.name != "constant" && g.name != "random-uniform" && g.name != "spike") {
    throw PreconditionError(key + ": unknown generator '" + g.name + "' (constant, random-uniform, spike)");
  }
  return g;
}

GridFunction inline_function(const std::string& key, const Json& j) {
  for (const auto& [name, value] : j.items()) {
    if (name != "d" && name != "L" && name != "values") throw PreconditionError(key + ": unknown field '" + name + "'");
  }
  if (!j.contains("d") || !j["d"].is_number_integer() || !j.contains("L") || !j["L"].is_number_integer() ||
      !j.contains("values") || !j["values"].is_array()) {
    throw PreconditionError(key + ": inline function needs integer d, integer L and a values array");
  }
  std::vector<double> values;
  for (const auto& x : j["values"]) {
    if (!x.is_number()) throw PreconditionError(key + ": values must be numbers");
    values.push_back(x.get<double>());
  }
  try {
    return GridFunction(j["d"].get<int>(), j["L"].get<int>(), std::move(values));
  } catch (const std::domain_error& e) {
    throw PreconditionError(key + ": " + e.what());
  }
}

// A function is given as a grid file path, an inline grid
// {"d": .., "L": .., "values": [..]} or a generator
// {"generator": .., "seed": .., "params": {..}}.
using FunctionSource = std::variant<GeneratorSpec, GridFunction>;

FunctionSource function_source(const std::string& key, const std::string& text) {
  const auto first = text.find_first_not_of(" \t");
  if (first != std::string::npos && text[first] == '{') {
    const Json j = parse_json(key, text);
    if (j.contains("generator")) return generator_from_json(key, j);
    return inline_function(key, j);
  }
  if (!fs::is_regular_file(text)) throw PreconditionError(key + ": file not found: " + text);
  try {
    return read_grid_function(text);
  } catch (const std::exception& e) {
    throw PreconditionError(key + ": " + e.what());
  }
}

void check_output_path(const std::string& key, const std::string& path) {
  if (path.empty()) throw PreconditionError(key + ": empty output path");
  const fs::path p(path);
  if (fs::is_directory(p)) throw PreconditionError(key + ": output path is a directory: " + path);
  const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  if (!fs::is_directory(dir)) throw PreconditionError(key + ": output directory does not exist: " + dir.string());
  if (::access(dir.c_str(), W_OK) != 0) throw PreconditionError(key + ": output directory is not writable: " + dir.string());
  if (fs::exists(p) && ::access(p.c_str(), W_OK) != 0) throw PreconditionError(key + ": output file is not writable: " + path);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PreconditionError("cannot open for writing: " + path);
  out << text;
  out.close();
  if (!out) throw PreconditionError("write failed: " + path);
}

// Deterministic JSON text: ordered keys, 17 significant digits, null for
// non-finite reals.
void dump_json(const Json& j, std::string& out, int indent) {
  const std::string pad(static_cast<std::size_t>(indent + 2), ' ');
  const std::string close(static_cast<std::size_t>(indent), ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) out += ",\n";
        first = false;
        out += pad + Json(key).dump() + ": ";
        dump_json(value, out, indent + 2);
      }
      out += "\n" + close + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        dump_json(j[i], out, indent + 2);
      }
      out += "\n" + close + "]";
      return;
    }
    case Json::value_t::number_float: {
      const double x = j.get<double>();
      out += std::isfinite(x) ? format_real(x) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

std::string to_text(const Json& j) {
  std::string out;
  dump_json(j, out, 0);
  out += "\n";
  return out;
}

Json generator_json(const GeneratorSpec& g) {
  Json j;
  j["generator"] = g.name;
  j["seed"] = g.seed;
  Json params = Json::object();
  for (const auto& [k, v] : g.params) params[k] = v;
  j["params"] = params;
  return j;
}

Json young_json(const YoungSpec& y) {
  Json j;
  j["kind"] = to_string(y.kind);
  if (y.kind == YoungKind::power) j["p"] = y.p;
  if (y.kind == YoungKind::loglog) j["delta"] = y.delta;
  if (y.kind == YoungKind::table) {
    Json rows = Json::array();
    for (const auto& [t, v] : y.table) rows.push_back(Json::array({t, v}));
    j["table"] = rows;
  }
  return j;
}

Json sparse_params_json(const SparseGeneratorParams& p) {
  Json j;
  j["lambda0"] = p.lambda0;
  j["N"] = p.n_regular;
  j["level_gap"] = p.level_gap;
  j["size"] = p.target_size;
  if (p.child_fraction) j["child_fraction"] = *p.child_fraction;
  return j;
}

const char* removal_name(RemovalOperator r) {
  return r == RemovalOperator::fractional_maximal ? "fractional" : "hardy-littlewood";
}

Json settings_json(const ExperimentSettings& st) {
  Json j;
  j["grid"] = Json{{"d", st.dim}, {"L", st.resolution}};
  j["young"] = young_json(st.phi);
  if (st.family) {
    j["sparse"] = Json{{"source", "file"}, {"lambda0", st.family->lambda0}, {"size", st.family->cubes.size()}};
  } else {
    Json s = sparse_params_json(st.sparse);
    s["source"] = "generator";
    j["sparse"] = s;
  }
  j["operator"] = Json{{"alpha", st.alpha}, {"nu", st.nu}, {"lambda1", st.lambda1}, {"removal", removal_name(st.removal)}};
  j["functions"] = Json{{"f", st.f_input ? Json("fixed") : generator_json(st.f_gen)},
                        {"w", st.w_input ? Json("fixed") : generator_json(st.w_gen)}};
  j["run"] = Json{{"trials", st.trials}, {"seed", st.seed}, {"lemma", st.lemma}};
  return j;
}

Json ledger_json(const LemmaEntry& e) {
  Json j;
  j["k"] = e.k;
  j["cubes"] = e.cubes;
  j["layers"] = e.layers;
  j["lhs_k"] = e.lhs;
  j["layer_bound"] = e.layer_bound;
  j["C_k"] = e.c_k;
  j["direct"] = e.direct;
  j["layer_part"] = e.layer_part;
  j["bottom_part"] = e.bottom_part;
  j["conjugate_inverse"] = e.conjugate_inverse;
  j["layer_ok"] = e.layer_ok;
  j["coverage_ok"] = e.coverage_ok;
  j["bottom_checked"] = e.bottom_checked;
  j["bottom_violations"] = e.bottom_violations;
  j["bottom_min_margin"] = e.bottom_min_margin;
  return j;
}

// Command line ---------------------------------------------------------------

struct FlagSpec {
  const char* flag;
  const char* key;
  const char* help;
};

constexpr FlagSpec kFlags[] = {
    {"--d", "grid.d", "dimension d"},
    {"--L", "grid.L", "resolution L (finest cells 2^{L d})"},
    {"--young", "young.spec", "Young function as JSON {\"kind\": ..., \"p\": ..., \"delta\": ..., \"table\": ...}"},
    {"--kind", "young.kind", "Young function: power, loglog, linear, table"},
    {"--p", "young.p", "exponent of the power kind"},
    {"--delta", "young.delta", "log exponent of the loglog kind"},
    {"--table", "young.table", "JSON array of [t, phi(t)] pairs"},
    {"--tol", "young.tol", "relative tolerance of the c_phi series"},
    {"--family", "sparse.file", "sparse family file"},
    {"--sparse-seed", "sparse.seed", "seed of the sparse generator"},
    {"--lambda0", "sparse.lambda0", "sparseness parameter in (0, 1)"},
    {"--N", "sparse.N", "regularity bound N"},
    {"--level-gap", "sparse.level_gap", "levels between a generated cube and its children"},
    {"--size", "sparse.size", "target family size"},
    {"--child-fraction", "sparse.child_fraction", "cap on the children volume fraction"},
    {"--packing", "sparse.packing", "packing reading: carleson or union"},
    {"--alpha", "operator.alpha", "fractional order, 0 <= alpha < d"},
    {"--nu", "operator.nu", "aggregation exponent"},
    {"--lambda1", "operator.lambda1", "level-set base, > 2"},
    {"--removal", "operator.removal", "removal maximal function: fractional or hardy-littlewood"},
    {"--operator", "operator.kind", "maximal operator: fractional, orlicz, iterated"},
    {"--f", "functions.f", "f: grid file, inline JSON grid or JSON generator"},
    {"--w", "functions.w", "w: grid file, inline JSON grid or JSON generator"},
    {"--trials", "run.trials", "number of trials"},
    {"--seed", "run.seed", "master seed"},
    {"--threads", "run.threads", "worker threads (0 = SPARSEWEAK_THREADS or hardware)"},
    {"--lemma", "run.lemma", "compute the per-level ledger (true/false)"},
    {"--levels", "run.levels", "adversarial resolutions, comma separated"},
    {"--steps", "run.steps", "adversarial hill-climbing steps"},
    {"--spikes", "run.spikes", "adversarial spike count"},
    {"--json", "output.json", "JSON report path"},
    {"--csv", "output.csv", "CSV report path"},
    {"--out", "output.out", "output file (stdout when omitted)"},
    {"--trend", "output.trend", "trend table path"},
};

const FlagSpec& flag_for(const std::string& key) {
  for (const auto& f : kFlags) {
    if (key == f.key) return f;
  }
  throw std::logic_error("no flag for key " + key);
}

struct Subcommand {
  const char* name;
  const char* help;
  std::vector<std::string> keys;
};

const std::vector<Subcommand>& subcommands() {
  static const std::vector<Subcommand> subs{
      {"young", "Young function tools: c_phi, phi, psi, psi^{-1}",
       {"young.spec", "young.kind", "young.p", "young.delta", "young.table", "young.tol"}},
      {"build-sparse", "generate a sparse family, or verify one given with --family",
       {"grid.d", "grid.L", "sparse.file", "sparse.seed", "sparse.lambda0", "sparse.N", "sparse.level_gap",
        "sparse.size", "sparse.child_fraction", "sparse.packing", "output.out"}},
      {"apply", "apply the sparse operator to f",
       {"grid.d", "grid.L", "sparse.file", "sparse.seed", "sparse.lambda0", "sparse.N", "sparse.level_gap",
        "sparse.size", "sparse.child_fraction", "operator.alpha", "operator.nu", "functions.f", "run.seed",
        "output.out"}},
      {"maximal", "dyadic fractional, Orlicz or iterated maximal function of f",
       {"grid.d", "grid.L", "young.spec", "young.kind", "young.p", "young.delta", "young.table", "operator.alpha",
        "operator.kind", "functions.f", "run.seed", "output.out"}},
      {"decompose", "level sets, layers and E_Q sets of a family for f",
       {"grid.d", "grid.L", "sparse.file", "sparse.seed", "sparse.lambda0", "sparse.N", "sparse.level_gap",
        "sparse.size", "sparse.child_fraction", "operator.alpha", "operator.lambda1", "functions.f", "run.seed",
        "output.json"}},
      {"weaktype", "seeded weak-type experiment with the per-level ledger",
       {"grid.d", "grid.L", "young.spec", "young.kind", "young.p", "young.delta", "young.table", "sparse.file",
        "sparse.lambda0", "sparse.N", "sparse.level_gap", "sparse.size", "sparse.child_fraction", "operator.alpha",
        "operator.nu", "operator.lambda1", "operator.removal", "functions.f", "functions.w", "run.trials",
        "run.seed", "run.threads", "run.lemma", "output.json", "output.csv"}},
      {"sanity", "Fefferman-Stein ratios, weight monotonicity and the adversarial trend table",
       {"grid.d", "grid.L", "young.delta", "sparse.lambda0", "sparse.N", "sparse.level_gap", "sparse.size",
        "sparse.child_fraction", "operator.alpha", "functions.f", "functions.w", "run.trials", "run.seed",
        "run.threads", "run.levels", "run.steps", "run.spikes", "output.json", "output.trend"}},
  };
  return subs;
}

SparseGeneratorParams sparse_params(const ConfigValues& v, SparseGeneratorParams p) {
  read_unsigned(v, "sparse.seed", p.seed);
  read_real(v, "sparse.lambda0", p.lambda0);
  read_int(v, "sparse.N", p.n_regular);
  read_int(v, "sparse.level_gap", p.level_gap);
  read_unsigned(v, "sparse.size", p.target_size);
  if (const auto* s = lookup(v, "sparse.child_fraction")) p.child_fraction = as_double("sparse.child_fraction", *s);
  return p;
}

}  // namespace

ConfigValues parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw PreconditionError("config: malformed INI at line " + std::to_string(e.line()) + ": " + e.message());
  }
  ConfigValues out;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw PreconditionError("config: key '" + section + "' must sit inside a section");
    for (const auto& [key, value] : body) {
      check_key(section, key);
      out[section + "." + key] = value.get_value<std::string>();
    }
  }
  return out;
}

ConfigValues read_config(const std::string& path) {
  if (!fs::is_regular_file(path)) throw PreconditionError("config file not found: " + path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PreconditionError("cannot read config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

ExperimentConfig build_config(const std::string& command, const ConfigValues& v) {
  for (const auto& [key, value] : v) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) throw PreconditionError("config: malformed key '" + key + "'");
    check_key(key.substr(0, dot), key.substr(dot + 1));
  }
  ExperimentConfig cfg;
  cfg.command = command;
  auto& ex = cfg.experiment;
  auto& sa = cfg.sanity;

  read_int(v, "grid.d", ex.dim);
  read_int(v, "grid.L", ex.resolution);
  sa.dim = ex.dim;
  read_int(v, "grid.L", sa.resolution);

  ex.phi = young_spec(v);
  read_real(v, "young.delta", sa.delta);

  ex.sparse = sparse_params(v, ex.sparse);
  sa.adversarial_sparse = sparse_params(v, sa.adversarial_sparse);
  if (const auto* s = lookup(v, "sparse.file")) {
    if (!fs::is_regular_file(*s)) throw PreconditionError("sparse.file: file not found: " + *s);
    cfg.family_file = *s;
  }
  if (const auto* s = lookup(v, "sparse.packing")) {
    if (*s == "carleson") {
      cfg.packing = PackingMode::carleson_sum;
    } else if (*s == "union") {
      cfg.packing = PackingMode::union_volume;
    } else {
      throw PreconditionError("sparse.packing: expected carleson or union, got '" + *s + "'");
    }
  }

  read_real(v, "operator.alpha", ex.alpha);
  sa.alpha = ex.alpha;
  read_real(v, "operator.nu", ex.nu);
  read_real(v, "operator.lambda1", ex.lambda1);
  if (const auto* s = lookup(v, "operator.removal")) {
    if (*s == "fractional") {
      ex.removal = RemovalOperator::fractional_maximal;
    } else if (*s == "hardy-littlewood") {
      ex.removal = RemovalOperator::hardy_littlewood;
    } else {
      throw PreconditionError("operator.removal: expected fractional or hardy-littlewood, got '" + *s + "'");
    }
  }

  for (const char* key : {"functions.f", "functions.w"}) {
    const auto* s = lookup(v, key);
    if (!s) continue;
    auto src = function_source(key, *s);
    const bool is_f = std::string(key) == "functions.f";
    if (auto* g = std::get_if<GeneratorSpec>(&src)) {
      (is_f ? ex.f_gen : ex.w_gen) = *g;
      (is_f ? sa.f_gen : sa.w_gen) = *g;
    } else {
      auto& fn = std::get<GridFunction>(src);
      if (fn.dim() != ex.dim || fn.resolution() != ex.resolution) {
        throw PreconditionError(std::string(key) + ": function has (d, L) = (" + std::to_string(fn.dim()) + ", " +
                                std::to_string(fn.resolution()) + "), expected (" + std::to_string(ex.dim) + ", " +
                                std::to_string(ex.resolution) + ")");
      }
      (is_f ? ex.f_input : ex.w_input) = std::move(fn);
    }
  }

  read_unsigned(v, "run.trials", ex.trials);
  sa.trials = ex.trials;
  if (!lookup(v, "run.trials")) sa.trials = SanitySettings{}.trials;
  read_unsigned(v, "run.seed", ex.seed);
  sa.seed = lookup(v, "run.seed") ? ex.seed : SanitySettings{}.seed;
  read_unsigned(v, "run.threads", ex.threads);
  sa.threads = ex.threads;
  if (const auto* s = lookup(v, "run.lemma")) ex.lemma = as_bool("run.lemma", *s);
  if (const auto* s = lookup(v, "run.levels")) {
    sa.adversarial_levels.clear();
    std::istringstream in(*s);
    std::string item;
    while (std::getline(in, item, ',')) sa.adversarial_levels.push_back(static_cast<int>(as_integer("run.levels", item)));
    if (sa.adversarial_levels.empty()) throw PreconditionError("run.levels: expected a comma separated list");
  }
  read_int(v, "run.steps", sa.adversarial_steps);
  read_int(v, "run.spikes", sa.adversarial_spikes);
  if (sa.adversarial_steps < 0) throw PreconditionError("run.steps must be >= 0");

  for (const auto& [key, member] : {std::pair{"output.json", &cfg.json_path}, std::pair{"output.csv", &cfg.csv_path},
                                    std::pair{"output.out", &cfg.out_path}, std::pair{"output.trend", &cfg.trend_path}}) {
    if (const auto* s = lookup(v, key)) {
      check_output_path(key, *s);
      *member = *s;
    }
  }

  // Module preconditions, checked before anything is computed.
  if (command == "sanity") {
    validate_grid_shape(sa.dim, sa.resolution);
    validate_alpha(sa.alpha, sa.dim);
    for (int level : sa.adversarial_levels) validate_grid_shape(sa.dim, level);
    if (!(sa.delta > 0.0)) throw PreconditionError("young.delta must be > 0");
    if (sa.adversarial_spikes < 1) throw PreconditionError("run.spikes must be >= 1");
  } else if (command != "young") {
    validate_grid_shape(ex.dim, ex.resolution);
    validate_alpha(ex.alpha, ex.dim);
  }
  if (command == "young" || command == "maximal" || command == "weaktype") (void)builtin_young(ex.phi);
  if (command == "apply" && !(ex.nu > 0.0 && std::isfinite(ex.nu))) throw PreconditionError("operator.nu must be > 0");
  if (command == "decompose" && !(ex.lambda1 > 2.0)) throw PreconditionError("operator.lambda1 must be > 2");
  if (command == "weaktype") {
    if (cfg.family_file) ex.family = read_family(*cfg.family_file);
    validate_experiment(ex);
  }
  if (command == "sanity" && (ex.f_input || ex.w_input)) {
    throw PreconditionError("sanity draws f and w per trial; give generators in [functions]");
  }
  return cfg;
}

std::string report_json(const ExperimentReport& report) {
  Json j;
  j["config"] = settings_json(report.settings);
  j["c_phi"] = Json{{"value", report.c_phi.value}, {"terms", report.c_phi.terms}, {"truncated", report.c_phi.truncated}};
  Json trials = Json::array();
  for (const auto& t : report.trials) {
    Json row;
    row["trial"] = t.trial;
    row["seed"] = t.seed;
    row["lhs"] = t.lhs;
    row["rhs"] = t.rhs;
    row["ratio"] = t.ratio;
    row["bound_integral"] = t.bound_integral;
    row["band_sup"] = t.band_sup;
    row["family_size"] = t.family_size;
    row["w_eps"] = t.w_eps;
    row["assembly_bound"] = t.assembly_bound;
    row["assembly_ok"] = t.assembly_ok;
    Json ledger = Json::array();
    for (const auto& e : t.ledger) ledger.push_back(ledger_json(e));
    row["lemma_ledger"] = ledger;
    trials.push_back(row);
  }
  j["per_trial"] = trials;
  const auto& a = report.aggregate;
  j["aggregate"] =
      Json{{"max_ratio", a.max_ratio}, {"mean_ratio", a.mean_ratio}, {"p95_ratio", a.p95_ratio}, {"c_phi", a.c_phi}};
  return to_text(j);
}

std::string report_csv(const ExperimentReport& report) {
  std::string out = "trial,seed,lhs,rhs,ratio\n";
  for (const auto& t : report.trials) {
    out += std::to_string(t.trial) + "," + std::to_string(t.seed) + "," + format_real(t.lhs) + "," +
           format_real(t.rhs) + "," + format_real(t.ratio) + "\n";
  }
  return out;
}

void emit_report(const ExperimentReport& report, ReportFormat format, const std::string& path) {
  check_output_path("report", path);
  write_text(path, format == ReportFormat::json ? report_json(report) : report_csv(report));
}

std::string sanity_json(const SanitySettings& st, const SanityReport& r) {
  Json j;
  Json levels = Json::array();
  for (int l : st.adversarial_levels) levels.push_back(l);
  j["config"] = Json{{"grid", Json{{"d", st.dim}, {"L", st.resolution}}},
                     {"alpha", st.alpha},
                     {"delta", st.delta},
                     {"functions", Json{{"f", generator_json(st.f_gen)}, {"w", generator_json(st.w_gen)}}},
                     {"trials", st.trials},
                     {"seed", st.seed},
                     {"adversarial", Json{{"levels", levels},
                                          {"steps", st.adversarial_steps},
                                          {"spikes", st.adversarial_spikes},
                                          {"sparse", sparse_params_json(st.adversarial_sparse)}}}};
  Json ratios = Json::array();
  for (double x : r.fs_ratios) ratios.push_back(x);
  j["fefferman_stein"] = Json{{"max_ratio", r.fs_max_ratio}, {"ratios", ratios}};
  j["monotonicity"] = Json{{"cells", r.monotonicity_cells}, {"violations", r.monotonicity_violations}};
  Json trend = Json::array();
  for (const auto& row : r.trend) {
    trend.push_back(Json{{"L", row.resolution},
                         {"family_size", row.family_size},
                         {"initial_ratio", row.initial_ratio},
                         {"best_ratio", row.best_ratio},
                         {"accepted", row.accepted}});
  }
  j["trend"] = trend;
  return to_text(j);
}

namespace {

void emit(const std::optional<std::string>& path, const std::string& text) {
  if (path) {
    write_text(*path, text);
  } else {
    std::cout << text;
  }
}

SparseFamily family_for(const ExperimentConfig& cfg) {
  const auto& ex = cfg.experiment;
  if (cfg.family_file) {
    auto s = read_family(*cfg.family_file);
    if (s.dim != ex.dim || s.resolution != ex.resolution) {
      throw PreconditionError("family file has (d, L) = (" + std::to_string(s.dim) + ", " +
                              std::to_string(s.resolution) + "), expected (" + std::to_string(ex.dim) + ", " +
                              std::to_string(ex.resolution) + ")");
    }
    return s;
  }
  SparseGeneratorParams p = ex.sparse;
  p.dim = ex.dim;
  p.resolution = ex.resolution;
  return generate_sparse(p).family;
}

GridFunction f_for(const ExperimentConfig& cfg) {
  const auto& ex = cfg.experiment;
  if (ex.f_input) return *ex.f_input;
  GeneratorSpec g = ex.f_gen;
  g.seed = derive_seed(ex.seed ^ g.seed, 1);
  return generate_grid_function(ex.dim, ex.resolution, g);
}

struct YoungActions {
  bool cphi = false;
  std::optional<double> eval;
  std::optional<double> conjugate;
  std::optional<double> conjugate_inverse;
};

int cmd_young(const ExperimentConfig& cfg, const ConfigValues& v, const YoungActions& act) {
  const auto phi = builtin_young(cfg.experiment.phi);
  double tol = 1e-9;
  read_real(v, "young.tol", tol);
  if (!(tol > 0.0)) throw PreconditionError("young.tol must be > 0");
  const bool any = act.eval || act.conjugate || act.conjugate_inverse;
  if (act.eval) std::cout << "phi(" << format_real(*act.eval) << ") = " << format_real(eval_phi(phi, *act.eval)) << "\n";
  if (act.conjugate) {
    if (!(*act.conjugate > 0.0)) throw PreconditionError("--conjugate: s must be > 0");
    std::cout << "psi(" << format_real(*act.conjugate) << ") = " << format_real(conjugate(phi, *act.conjugate))
              << "\n";
  }
  if (act.conjugate_inverse) {
    if (!(*act.conjugate_inverse > 0.0)) throw PreconditionError("--conjugate-inverse: log2(y) must be > 0");
    std::cout << "log2 psi^-1(2^" << format_real(*act.conjugate_inverse)
              << ") = " << format_real(conjugate_inverse_log2(phi, *act.conjugate_inverse)) << "\n";
  }
  if (act.cphi || !any) {
    const auto r = c_phi(phi, tol);
    if (r.divergent) {
      throw ComputationRefused(std::string("c_phi diverges for the ") + to_string(phi.kind()) +
                               " Young function: the terms 1/psi^-1(2^(2^k)) do not decay (partial sum " +
                               format_real(r.value) + " after " + std::to_string(r.terms) + " terms)");
    }
    std::cout << "c_phi = " << format_real(r.value) << " (terms " << r.terms << (r.truncated ? ", truncated" : "")
              << ")\n";
  }
  return 0;
}

int cmd_build_sparse(const ExperimentConfig& cfg) {
  const auto& ex = cfg.experiment;
  if (cfg.family_file) {
    const auto s = read_family(*cfg.family_file);
    const auto packing = verify_sparse(s, cfg.packing);
    std::cout << "cubes " << s.cubes.size() << "\n";
    std::cout << "packing " << (packing.pass ? "pass" : "fail") << " worst_ratio " << format_real(packing.worst_ratio)
              << " bound " << format_real(packing.bound);
    if (packing.worst_cube) std::cout << " worst_cube " << packing.worst_cube->to_string();
    std::cout << "\n";
    bool ok = packing.pass;
    if (s.n_regular) {
      const auto reg = verify_n_regular(s, *s.n_regular);
      std::cout << "regularity " << (reg.pass ? "pass" : "fail") << " worst_count " << reg.worst_count << " N "
                << *s.n_regular;
      if (reg.worst_cube) std::cout << " worst_cube " << reg.worst_cube->to_string();
      std::cout << "\n";
      ok = ok && reg.pass;
    }
    if (!ok) {
      std::cerr << "error: family violates "
                << (packing.pass ? "N-regularity" : "the packing condition (sum |P| <= |Q| / lambda0)") << "\n";
      return 1;
    }
    return 0;
  }
  SparseGeneratorParams p = ex.sparse;
  p.dim = ex.dim;
  p.resolution = ex.resolution;
  const auto g = generate_sparse(p);
  emit(cfg.out_path, format_family(g.family));
  if (cfg.out_path) {
    std::cout << "cubes " << g.family.cubes.size() << (g.partial ? " (stopped before the target size)" : "")
              << "\n";
  }
  return 0;
}

int cmd_apply(const ExperimentConfig& cfg) {
  const auto family = family_for(cfg);
  const auto f = f_for(cfg);
  emit(cfg.out_path, format_grid_function(sparse_operator(f, family, cfg.experiment.alpha, cfg.experiment.nu)));
  return 0;
}

int cmd_maximal(const ExperimentConfig& cfg, const ConfigValues& v) {
  const auto& ex = cfg.experiment;
  std::string kind = "fractional";
  if (const auto* s = lookup(v, "operator.kind")) kind = *s;
  if (kind != "fractional" && kind != "orlicz" && kind != "iterated") {
    throw PreconditionError("operator.kind: expected fractional, orlicz or iterated, got '" + kind + "'");
  }
  const auto phi = builtin_young(ex.phi);
  const auto f = f_for(cfg);
  const auto out = kind == "fractional" ? dyadic_frac_maximal(f, ex.alpha)
                   : kind == "orlicz"   ? orlicz_maximal(f, phi)
                                        : iterated_bound_weight(f, phi, ex.alpha);
  emit(cfg.out_path, format_grid_function(out));
  return 0;
}

int cmd_decompose(const ExperimentConfig& cfg) {
  const auto& ex = cfg.experiment;
  const auto family = family_for(cfg);
  const auto f = f_for(cfg);
  const auto d = decompose(family, f, ex.alpha, ex.lambda1);
  Json j;
  j["lambda1"] = d.lambda1;
  j["family_size"] = family.cubes.size();
  Json levels = Json::array();
  for (const auto& [k, members] : d.levels) {
    Json level;
    level["k"] = k;
    level["u"] = d.u.at(k);
    level["cubes"] = members.size();
    Json layers = Json::array();
    for (int v = 0;; ++v) {
      auto it = d.layers.find({k, v});
      if (it == d.layers.end()) break;
      Json layer = Json::array();
      for (const auto& q : it->second) {
        layer.push_back(Json{{"cube", q.to_string()}, {"e_cells", d.e_sets.at(q).size()}});
      }
      layers.push_back(layer);
    }
    level["layers"] = layers;
    levels.push_back(level);
  }
  j["levels"] = levels;
  emit(cfg.json_path, to_text(j));
  return 0;
}

int cmd_weaktype(const ExperimentConfig& cfg) {
  const auto report = run_experiment(cfg.experiment);
  const std::string json = report_json(report);
  if (cfg.csv_path) write_text(*cfg.csv_path, report_csv(report));
  if (cfg.json_path) {
    write_text(*cfg.json_path, json);
    const auto& a = report.aggregate;
    std::cout << "trials " << report.trials.size() << " c_phi " << format_real(a.c_phi) << " max_ratio "
              << format_real(a.max_ratio) << " mean_ratio " << format_real(a.mean_ratio) << " p95_ratio "
              << format_real(a.p95_ratio) << "\n";
  } else {
    std::cout << json;
  }
  return 0;
}

int cmd_sanity(const ExperimentConfig& cfg) {
  const auto report = sanity_suite(cfg.sanity);
  const std::string table = format_trend_table(report.trend);
  if (cfg.trend_path) write_text(*cfg.trend_path, table);
  if (cfg.json_path) write_text(*cfg.json_path, sanity_json(cfg.sanity, report));
  std::cout << "fefferman_stein_max_ratio " << format_real(report.fs_max_ratio) << "\n";
  std::cout << "monotonicity_violations " << report.monotonicity_violations << " of " << report.monotonicity_cells
            << "\n";
  if (!cfg.trend_path) std::cout << table;
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Sparse fractional operators and weighted weak-type experiments on dyadic grids", "sparseweak"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  std::map<std::string, std::string> inline_values;
  std::map<std::string, std::string> config_paths;
  YoungActions young;
  std::map<std::string, CLI::App*> subs;

  for (const auto& sub : subcommands()) {
    CLI::App* s = app.add_subcommand(sub.name, sub.help);
    s->add_option("--config", config_paths[sub.name], "INI config file; inline flags override it");
    for (const auto& key : sub.keys) {
      const auto& f = flag_for(key);
      s->add_option(f.flag, inline_values[std::string(sub.name) + "|" + key], f.help);
    }
    subs[sub.name] = s;
  }
  CLI::App* ys = subs.at("young");
  ys->add_flag("--cphi", young.cphi, "print c_phi (the default action)");
  ys->add_option("--eval", young.eval, "print phi(t)");
  ys->add_option("--conjugate", young.conjugate, "print psi(s)");
  ys->add_option("--conjugate-inverse", young.conjugate_inverse, "print log2 psi^{-1}(2^x) for x = log2(y)");

  if (argc > 1 && argv[1][0] != '-' && !subs.contains(argv[1])) {
    std::string names;
    for (const auto& sub : subcommands()) names += (names.empty() ? "" : ", ") + std::string(sub.name);
    std::cerr << "error: unknown subcommand '" << argv[1] << "' (expected one of " << names << ")\n";
    return 1;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    for (const auto& sub : subcommands()) {
      CLI::App* s = subs.at(sub.name);
      if (!s->parsed()) continue;
      ConfigValues values;
      if (s->count("--config")) values = read_config(config_paths[sub.name]);
      for (const auto& key : sub.keys) {
        if (s->count(flag_for(key).flag)) values[key] = inline_values[std::string(sub.name) + "|" + key];
      }
      const auto cfg = build_config(sub.name, values);
      const std::string name = sub.name;
      if (name == "young") return cmd_young(cfg, values, young);
      if (name == "build-sparse") return cmd_build_sparse(cfg);
      if (name == "apply") return cmd_apply(cfg);
      if (name == "maximal") return cmd_maximal(cfg, values);
      if (name == "decompose") return cmd_decompose(cfg);
      if (name == "weaktype") return cmd_weaktype(cfg);
      if (name == "sanity") return cmd_sanity(cfg);
    }
    std::cerr << "error: no subcommand given\n";
    return 1;
  } catch (const ComputationRefused& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace sparseweak
