#include "singflow/cli.hpp"

#include "singflow/errors.hpp"
#include "singflow/integrator.hpp"
#include "singflow/section_graph.hpp"
#include "singflow/ulam.hpp"

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace singflow::cli {

namespace fs = std::filesystem;

void ExperimentConfig::validate() const {
  if (model.empty() && model_file.empty()) throw ConfigError("no model given");
  if (!(gap_tol > 0.0) || !(cluster_tol > 0.0) || !(radius_tol > 0.0)) {
    throw ConfigError("tolerances must be positive");
  }
  if (horizon < 0.0 || burn_in < 0.0) throw ConfigError("horizon and burn-in must be non-negative");
  if (horizon > 0.0 && !(horizon > burn_in)) throw ConfigError("horizon must exceed burn-in");
  if (grid < 0) throw ConfigError("grid must be positive");
  if (workers < 0) throw ConfigError("workers must be non-negative");
  if (format != "json" && format != "csv") throw ConfigError("format must be json or csv");
}

CensusConfig ExperimentConfig::census_config() const {
  CensusConfig c;
  c.horizon = horizon;
  c.burn_in = burn_in;
  c.grid = grid;
  c.per_node = grid;
  c.gap_tol = gap_tol;
  c.cluster_tol = cluster_tol;
  c.radius_tol = radius_tol;
  c.workers = workers;
  c.seed = seed;
  return c;
}

int default_workers() {
  const char* v = std::getenv("SINGFLOW_WORKERS");
  if (v == nullptr || *v == '\0') return 0;
  try {
    std::size_t used = 0;
    const int n = std::stoi(v, &used);
    if (used != std::string(v).size() || n < 0) throw ConfigError("");
    return n;
  } catch (const std::exception&) {
    throw ConfigError(std::string("SINGFLOW_WORKERS is not a worker count: ") + v);
  }
}

const std::vector<std::string>& census_keys() {
  static const std::vector<std::string> keys{"horizon", "burn_in", "grid",    "gap_tol",
                                             "cluster_tol", "radius_tol", "workers", "seed",
                                             "format",  "out"};
  return keys;
}

std::vector<std::string> model_param_keys(const std::string& label) {
  if (label == "lorenz_classic") return {"a", "b", "r"};
  if (label == "geometric_lorenz") return {"c", "lambda1", "lambda2", "lambda3"};
  if (label == "sharp_1" || label.rfind("chained_", 0) == 0) return {"lambda1", "lambda2", "lambda3"};
  if (label.rfind("glued_suspension_", 0) == 0) return {"radius"};
  return {};
}

namespace {

template <class T>
T parse_value(const std::string& key, const std::string& text) {
  std::istringstream is(text);
  T v{};
  is >> v;
  if (is.fail() || !(is >> std::ws).eof()) throw ConfigError("bad value for " + key + ": " + text);
  return v;
}

void apply_census_key(ExperimentConfig& cfg, const std::string& key, const std::string& val) {
  if (key == "horizon") cfg.horizon = parse_value<double>(key, val);
  else if (key == "burn_in") cfg.burn_in = parse_value<double>(key, val);
  else if (key == "grid") cfg.grid = parse_value<int>(key, val);
  else if (key == "gap_tol") cfg.gap_tol = parse_value<double>(key, val);
  else if (key == "cluster_tol") cfg.cluster_tol = parse_value<double>(key, val);
  else if (key == "radius_tol") cfg.radius_tol = parse_value<double>(key, val);
  else if (key == "workers") cfg.workers = parse_value<int>(key, val);
  else if (key == "seed") cfg.seed = parse_value<std::uint64_t>(key, val);
  else if (key == "format") cfg.format = val;
  else if (key == "out") cfg.out_dir = val;
  else throw ConfigError("unknown config key " + key);
}

bool is_census_key(const std::string& k) {
  const auto& keys = census_keys();
  return std::find(keys.begin(), keys.end(), k) != keys.end();
}

int suffix_k(const std::string& label, const std::string& prefix) {
  return std::stoi(label.substr(prefix.size()));
}

double param(const ExperimentConfig& cfg, const std::string& key, double fallback) {
  const auto it = cfg.params.find(key);
  return it == cfg.params.end() ? fallback : it->second;
}

LinearSaddleParams saddle_params(const ExperimentConfig& cfg) {
  LinearSaddleParams p;
  p.lambda1 = param(cfg, "lambda1", p.lambda1);
  p.lambda2 = param(cfg, "lambda2", p.lambda2);
  p.lambda3 = param(cfg, "lambda3", p.lambda3);
  p.validate();
  return p;
}

// Writes to <out_dir>/<name>, or to `out` when no directory is configured.
class Sink {
 public:
  Sink(const ExperimentConfig& cfg, const std::string& name, std::ostream& out) {
    if (cfg.out_dir.empty()) {
      stream_ = &out;
      return;
    }
    fs::create_directories(cfg.out_dir);
    path_ = (fs::path(cfg.out_dir) / name).string();
    file_.open(path_);
    if (!file_) throw ConfigError("cannot write " + path_);
    stream_ = &file_;
  }
  std::ostream& stream() { return *stream_; }
  const std::string& path() const { return path_; }

 private:
  std::ofstream file_;
  std::ostream* stream_ = nullptr;
  std::string path_;
};

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const CensusUnreliable& e) {
    err << "census unreliable: " << e.what() << '\n';
    return kExitUnreliable;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParameterError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
}

int piece_by_id(const SectionGraphModel& g, const std::string& id) {
  if (id.empty()) return 0;
  for (std::size_t p = 0; p < g.pieces.size(); ++p) {
    if (g.pieces[p].id == id) return static_cast<int>(p);
  }
  throw ConfigError("model " + g.label + " has no piece " + id);
}

}  // namespace

void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  if (const auto census = tree.get_child_optional("census")) {
    for (const auto& [k, v] : *census) apply_census_key(cfg, k, v.data());
  }
  if (cfg.model.empty()) return;
  if (const auto sec = tree.get_child_optional(pt::ptree::path_type(cfg.model, '\0'))) {
    const auto allowed = model_param_keys(cfg.model);
    for (const auto& [k, v] : *sec) {
      if (is_census_key(k)) {
        apply_census_key(cfg, k, v.data());
      } else if (std::find(allowed.begin(), allowed.end(), k) != allowed.end()) {
        cfg.params[k] = parse_value<double>(k, v.data());
      } else {
        throw ConfigError("unknown key " + k + " in section [" + cfg.model + "]");
      }
    }
  }
}

ZooEntry resolve_model(const ExperimentConfig& cfg) {
  if (!cfg.model_file.empty()) {
    std::ifstream in(cfg.model_file);
    if (!in) throw ConfigError("cannot open model file " + cfg.model_file);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("model file is not JSON: ") + e.what());
    }
    const nlohmann::json& body = j.contains("model") ? j.at("model") : j;
    SectionGraphModel m = SectionGraphModel::from_json(body);
    m.finalize();
    const int s_expected = j.value("s_expected", -1);
    return make_section_entry(m, s_expected, m.lorenz_like_count());
  }
  const std::string& label = cfg.model;
  const auto allowed = model_param_keys(label);
  for (const auto& [k, v] : cfg.params) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw ConfigError("model " + label + " has no parameter " + k);
    }
  }
  if (cfg.params.empty()) return zoo_entry(label);
  if (label == "lorenz_classic") {
    LorenzParams p;
    p.a = param(cfg, "a", p.a);
    p.b = param(cfg, "b", p.b);
    p.r = param(cfg, "r", p.r);
    return make_lorenz_classic(p);
  }
  if (label == "geometric_lorenz") return make_geometric_lorenz(param(cfg, "c", 1.9), saddle_params(cfg));
  if (label == "sharp_1") return make_sharp(saddle_params(cfg));
  if (label.rfind("chained_", 0) == 0) return make_chained(suffix_k(label, "chained_"), saddle_params(cfg));
  if (label.rfind("glued_suspension_", 0) == 0) {
    return make_glued_suspension(suffix_k(label, "glued_suspension_"), param(cfg, "radius", 0.25));
  }
  return zoo_entry(label);
}

int cmd_list(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto entries = zoo();
    if (cfg.format == "json") {
      out << zoo_manifest(entries).dump(2) << '\n';
    } else {
      out << "label,kind,s_expected,s_L\n";
      for (const auto& e : entries) {
        out << e.label << ',' << to_string(e.kind) << ',' << e.s_expected << ','
            << e.s_L_expected << '\n';
      }
    }
    if (!cfg.out_dir.empty()) {
      fs::create_directories(cfg.out_dir);
      std::ofstream f(fs::path(cfg.out_dir) / "zoo.json");
      if (!f) throw ConfigError("cannot write zoo.json");
      f << zoo_manifest(entries).dump(2) << '\n';
    }
    return kExitOk;
  });
}

int cmd_analyze(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    cfg.validate();
    const ZooEntry entry = resolve_model(cfg);
    const MeasureCensus mc = census(entry, cfg.census_config());
    const Verdict v = check_bound(mc, mc.s_L);
    auto report = to_json(mc);
    report["s_expected"] = entry.s_expected;
    if (cfg.format == "json") {
      Sink sink(cfg, entry.label + "_census.json", out);
      sink.stream() << report.dump(2) << '\n';
    } else {
      Sink sink(cfg, entry.label + "_vectors.csv", out);
      write_vectors_csv(sink.stream(), mc);
    }
    if (!cfg.out_dir.empty()) {
      out << entry.label << ": s=" << mc.s << " s_singular=" << mc.singular_clusters()
          << " s_L=" << mc.s_L << " verdict=" << to_string(v) << '\n';
    }
    if (v != Verdict::ok) {
      err << entry.label << ": bound s <= 2 s_L violated\n";
      return kExitMismatch;
    }
    if (entry.s_expected >= 0 && mc.s != entry.s_expected) {
      err << entry.label << ": measured s=" << mc.s << ", expected " << entry.s_expected << '\n';
      return kExitMismatch;
    }
    return kExitOk;
  });
}

int cmd_sweep(const std::vector<std::string>& labels, const ExperimentConfig& cfg,
              std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::vector<std::string> todo = labels;
    if (todo.size() == 1 && todo[0] == "all") {
      todo.clear();
      for (const auto& e : zoo()) todo.push_back(e.label);
    }
    Sink sink(cfg, "sweep.csv", out);
    std::ostream& os = sink.stream();
    os << "label,s_L,s_measured,s_expected,verdict,seconds\n";
    int code = kExitOk;
    for (const auto& label : todo) {
      ExperimentConfig one = cfg;
      one.model = label;
      one.model_file.clear();
      one.validate();
      const ZooEntry entry = resolve_model(one);
      const auto t0 = std::chrono::steady_clock::now();
      std::string verdict;
      int measured = -1;
      try {
        const MeasureCensus mc = census(entry, one.census_config());
        measured = mc.s;
        const Verdict v = check_bound(mc, mc.s_L);
        verdict = to_string(v);
        if (v != Verdict::ok || (entry.s_expected >= 0 && mc.s != entry.s_expected)) {
          code = std::max(code, kExitMismatch);
        }
      } catch (const CensusUnreliable& e) {
        verdict = "unreliable";
        err << label << ": " << e.what() << '\n';
        code = std::max(code, kExitUnreliable);
      }
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      os << label << ',' << entry.s_L() << ',' << measured << ',' << entry.s_expected << ','
         << verdict << ',' << std::fixed << std::setprecision(3) << secs << '\n'
         << std::defaultfloat;
    }
    return code;
  });
}

int cmd_dump(const ExperimentConfig& cfg, const std::string& what, const std::string& piece,
             std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    cfg.validate();
    const ZooEntry entry = resolve_model(cfg);
    CensusConfig cc = resolve_config(entry, cfg.census_config());
    const auto seeds = census_seeds(entry, cc);
    if (seeds.empty()) throw ConfigError("model has no seeds");
    if (what == "trajectory") {
      Sink sink(cfg, entry.label + "_trajectory.csv", out);
      if (entry.kind == ModelKind::ode) {
        const double T = cfg.horizon > 0.0 ? cfg.horizon : std::min(entry.defaults.horizon, 100.0);
        const Trajectory tr = integrate(*entry.field, seeds.front().point, T, cc.tol);
        write_trajectory_csv(sink.stream(), tr, 0.01);
      } else {
        // Base visits of the first seed's orbit.
        const SectionGraphModel& g = *entry.graph;
        const long n = cfg.horizon > 0.0 ? std::lround(cfg.horizon) : 10000;
        std::ostream& os = sink.stream();
        os << "t,x,y,z\n" << std::setprecision(12);
        int node = seeds.front().node;
        Vec2 p = seeds.front().local;
        double t = 0.0;
        os << t << ',' << g.nodes[node].embed(p).x() << ',' << g.nodes[node].embed(p).y() << ','
           << g.nodes[node].embed(p).z() << '\n';
        for (long k = 0; k < n; ++k) {
          const Hop h = g.step(node, p);
          if (h.status != HopStatus::moved) break;
          t += h.time;
          node = h.target;
          p = h.point;
          const Vec3 q = g.nodes[node].embed(p);
          os << t << ',' << q.x() << ',' << q.y() << ',' << q.z() << '\n';
        }
      }
      return kExitOk;
    }
    if (what != "return_map" && what != "density") {
      throw ConfigError("dump target must be trajectory, return_map or density");
    }
    if (entry.kind != ModelKind::section_graph) {
      throw ConfigError(what + " dumps need a section-graph model");
    }
    const SectionGraphModel& g = *entry.graph;
    const int pc = piece_by_id(g, piece);
    const PiecewiseMap1D f = g.piece_quotient(pc);
    const std::string stem = entry.label + "_" + g.pieces[pc].id;
    if (what == "return_map") {
      Sink sink(cfg, stem + "_return_map.csv", out);
      std::ostream& os = sink.stream();
      os << "x_in,x_out\n" << std::setprecision(12);
      constexpr int kPoints = 10000;
      for (int i = 0; i < kPoints; ++i) {
        const double x = f.lo() + (i + 0.5) * (f.hi() - f.lo()) / kPoints;
        if (const auto y = f.try_eval(x)) os << x << ',' << *y << '\n';
      }
      return kExitOk;
    }
    const UlamOperator op = ulam_build(f, 4096);
    const UlamResult res = invariant_densities(op);
    Sink sink(cfg, stem + "_density.csv", out);
    write_density_csv(sink.stream(), op, res);
    return kExitOk;
  });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg.workers = default_workers();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  CLI::App app{"singflow: census of physical measures for singular-hyperbolic flow models"};
  app.require_subcommand(1);
  std::string config_file;
  std::vector<std::string> labels;
  std::string what, piece;

  ExperimentConfig flags;
  std::vector<CLI::Option*> opts;
  auto add_common = [&](CLI::App* sub, bool with_model) {
    if (with_model) {
      opts.push_back(sub->add_option("--model", flags.model, "zoo label"));
      opts.push_back(sub->add_option("--model-file", flags.model_file, "section-graph JSON model"));
    }
    opts.push_back(sub->add_option("--horizon", flags.horizon, "averaging horizon"));
    opts.push_back(sub->add_option("--burn-in", flags.burn_in, "discarded transient"));
    opts.push_back(sub->add_option("--grid", flags.grid, "seeds per axis (or per node axis)"));
    opts.push_back(sub->add_option("--gap-tol", flags.gap_tol, "convergence gap tolerance"));
    opts.push_back(sub->add_option("--cluster-tol", flags.cluster_tol, "linking radius"));
    opts.push_back(sub->add_option("--radius-tol", flags.radius_tol, "singularity ball radius"));
    opts.push_back(sub->add_option("--workers", flags.workers, "worker threads"));
    opts.push_back(sub->add_option("--seed", flags.seed, "random seed"));
    opts.push_back(sub->add_option("--out", flags.out_dir, "output directory"));
    opts.push_back(sub->add_option("--format", flags.format, "json or csv"));
    sub->add_option("--config", config_file, "INI config file");
  };
  CLI::App* list = app.add_subcommand("list", "print the model zoo");
  add_common(list, false);
  CLI::App* analyze = app.add_subcommand("analyze", "census and bound check for one model");
  add_common(analyze, true);
  CLI::App* sweep = app.add_subcommand("sweep", "census over several models");
  add_common(sweep, false);
  sweep->add_option("labels", labels, "model labels, or 'all'");
  CLI::App* dump = app.add_subcommand("dump", "plot-ready data for one model");
  add_common(dump, true);
  dump->add_option("what", what, "trajectory, return_map or density")->required();
  dump->add_option("--piece", piece, "piece id for return_map and density");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  // Apply flags over the config file.
  cfg.model = flags.model;
  cfg.model_file = flags.model_file;
  try {
    if (!config_file.empty()) apply_config_file(cfg, config_file);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  for (CLI::Option* o : opts) {
    if (o->count() == 0) continue;
    const std::string n = o->get_name();
    if (n == "--horizon") cfg.horizon = flags.horizon;
    if (n == "--burn-in") cfg.burn_in = flags.burn_in;
    if (n == "--grid") cfg.grid = flags.grid;
    if (n == "--gap-tol") cfg.gap_tol = flags.gap_tol;
    if (n == "--cluster-tol") cfg.cluster_tol = flags.cluster_tol;
    if (n == "--radius-tol") cfg.radius_tol = flags.radius_tol;
    if (n == "--workers") cfg.workers = flags.workers;
    if (n == "--seed") cfg.seed = flags.seed;
    if (n == "--out") cfg.out_dir = flags.out_dir;
    if (n == "--format") cfg.format = flags.format;
  }
  if (list->parsed()) {
    if (!list->get_option("--format")->count() && config_file.empty()) cfg.format = "csv";
    return cmd_list(cfg, out, err);
  }
  if (analyze->parsed()) return cmd_analyze(cfg, out, err);
  if (sweep->parsed()) return cmd_sweep(labels, cfg, out, err);
  return cmd_dump(cfg, what, piece, out, err);
}

}  // namespace singflow::cli
