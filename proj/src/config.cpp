// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#include "c2dfb/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "c2dfb/rng.hpp"

namespace c2dfb {

using nlohmann::json;

std::uint64_t SeedConfig::topology_seed() const { return topology ? *topology : derive_seed(master, "topology", 0); }
std::uint64_t SeedConfig::data_seed() const { return data ? *data : derive_seed(master, "data", 0); }

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string suggest_key(const std::string& key, const std::vector<std::string>& candidates) {
  std::string best;
  std::size_t best_d = 3;
  for (const auto& c : candidates) {
    const std::size_t d = edit_distance(key, c);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

namespace {

// Reads one JSON object section, collecting errors instead of throwing.
class Section {
 public:
  Section(const json* obj, std::string name, std::vector<std::string>& errors)
      : obj_(obj), name_(std::move(name)), errors_(errors) {
    if (obj_ && !obj_->is_object()) {
      fail("", "must be an object");
      obj_ = nullptr;
    }
  }

  // `aliases` are accepted spellings of the same key.
  const json* find(const std::string& key, std::initializer_list<const char*> aliases = {}) {
    known_.push_back(key);
    for (const char* a : aliases) known_.push_back(a);
    if (!obj_) return nullptr;
    const json* hit = nullptr;
    std::string hit_key;
    auto probe = [&](const std::string& k) {
      auto it = obj_->find(k);
      if (it == obj_->end()) return;
      if (hit) fail(k, "duplicates '" + hit_key + "'");
      hit = &*it;
      hit_key = k;
    };
    probe(key);
    for (const char* a : aliases) probe(a);
    return hit;
  }

  bool read(const std::string& key, double& out, std::initializer_list<const char*> aliases = {}) {
    const json* v = find(key, aliases);
    if (!v) return false;
    if (!v->is_number()) return fail(key, "expected a number"), false;
    out = v->get<double>();
    return true;
  }

  bool read(const std::string& key, std::optional<double>& out) {
    const json* v = find(key);
    if (!v || v->is_null()) return false;
    if (!v->is_number()) return fail(key, "expected a number or null"), false;
    out = v->get<double>();
    return true;
  }

  bool read(const std::string& key, int& out, std::initializer_list<const char*> aliases = {}) {
    const json* v = find(key, aliases);
    if (!v) return false;
    if (!v->is_number_integer()) return fail(key, "expected an integer"), false;
    const auto i = v->get<std::int64_t>();
    if (i < INT32_MIN || i > INT32_MAX) return fail(key, "out of range"), false;
    out = static_cast<int>(i);
    return true;
  }

  bool read(const std::string& key, std::uint64_t& out) {
    const json* v = find(key);
    if (!v) return false;
    if (v->is_number_unsigned()) {
      out = v->get<std::uint64_t>();
      return true;
    }
    if (v->is_number_integer() && v->get<std::int64_t>() >= 0) {
      out = static_cast<std::uint64_t>(v->get<std::int64_t>());
      return true;
    }
    return fail(key, "expected a non-negative integer"), false;
  }

  bool read(const std::string& key, std::optional<std::uint64_t>& out) {
    if (obj_) {
      auto it = obj_->find(key);
      if (it != obj_->end() && it->is_null()) {
        known_.push_back(key);
        return false;
      }
    }
    std::uint64_t tmp = 0;
    if (!read(key, tmp)) return false;
    out = tmp;
    return true;
  }

  bool read(const std::string& key, bool& out) {
    const json* v = find(key);
    if (!v) return false;
    if (!v->is_boolean()) return fail(key, "expected true or false"), false;
    out = v->get<bool>();
    return true;
  }

  bool read(const std::string& key, std::string& out) {
    const json* v = find(key);
    if (!v) return false;
    if (!v->is_string()) return fail(key, "expected a string"), false;
    out = v->get<std::string>();
    return true;
  }

  void fail(const std::string& key, const std::string& why) {
    errors_.push_back(name_ + (key.empty() ? "" : "." + key) + ": " + why);
  }

  // Rejects every key that no read() asked for.
  void finish() {
    if (!obj_) return;
    for (auto it = obj_->begin(); it != obj_->end(); ++it) {
      if (std::find(known_.begin(), known_.end(), it.key()) != known_.end()) continue;
      std::string msg = "unknown key";
      const std::string s = suggest_key(it.key(), known_);
      if (s == "lambda" || s == "λ")
        msg += " (did you mean 'λ/lambda'?)";
      else if (!s.empty())
        msg += " (did you mean '" + s + "'?)";
      fail(it.key(), msg);
    }
  }

 private:
  const json* obj_;
  std::string name_;
  std::vector<std::string>& errors_;
  std::vector<std::string> known_;
};

const json* child(const json& doc, const char* key) {
  auto it = doc.find(key);
  return it == doc.end() ? nullptr : &*it;
}

void parse_topology(const json* obj, ExperimentConfig& cfg, std::vector<std::string>& errs) {
  Section s(obj, "topology", errs);
  std::string kind = to_string(cfg.topology.kind);
  if (s.read("kind", kind)) {
    try {
      cfg.topology.kind = parse_topology_kind(kind);
    } catch (const Error& e) {
      s.fail("kind", e.what());
    }
  }
  s.read("nodes", cfg.topology.node_count, {"m"});
  s.read("edge_probability", cfg.topology.edge_probability);
  if (const json* edges = s.find("edges"); edges && !edges->is_null()) {
    std::vector<Edge> list;
    bool ok = edges->is_array();
    if (ok) {
      for (const auto& e : *edges) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
          ok = false;
          break;
        }
        list.emplace_back(e[0].get<int>(), e[1].get<int>());
      }
    }
    if (ok)
      cfg.topology.custom_edges = std::move(list);
    else
      s.fail("edges", "expected a list of [i, j] pairs");
  }
  s.finish();
  if (cfg.topology.node_count < 1) errs.push_back("topology.nodes: must be >= 1");
  if (cfg.topology.kind == TopologyKind::erdos_renyi &&
      !(cfg.topology.edge_probability > 0.0 && cfg.topology.edge_probability <= 1.0))
    errs.push_back("topology.edge_probability: must lie in (0, 1]");
  if (cfg.topology.kind == TopologyKind::custom && !cfg.topology.custom_edges)
    errs.push_back("topology.edges: required for kind 'custom'");
}

void parse_compressor(const json* obj, ExperimentConfig& cfg, std::vector<std::string>& errs) {
  Section s(obj, "compressor", errs);
  s.read("kind", cfg.compressor.kind);
  s.read("ratio", cfg.compressor.ratio);
  s.read("rescale", cfg.compressor.rescale);
  s.finish();
  try {
    cfg.run.compressor = build_compressor(cfg.compressor);
  } catch (const Error& e) {
    errs.push_back(std::string("compressor: ") + e.what());
  }
}

void parse_problem(const json* obj, ExperimentConfig& cfg, std::vector<std::string>& errs) {
  Section s(obj, "problem", errs);
  ProblemConfig& p = cfg.problem;
  s.read("family", p.family);
  s.read("dim_x", p.dim_x);
  s.read("dim_y", p.dim_y);
  s.read("coupling", p.coupling);
  s.read("target", p.target);
  s.read("init_scale", p.init_scale);
  s.read("feature_dim", p.feature_dim);
  s.read("classes", p.classes);
  s.read("samples", p.samples);
  s.read("head_dim", p.head_dim);
  s.read("heterogeneity", p.heterogeneity, {"h"});
  s.read("ridge", p.ridge);
  s.read("x_init", p.x_init);
  s.finish();
  if (p.family != "quadratic" && p.family != "coefficient_tuning" && p.family != "hyper_representation")
    errs.push_back("problem.family: expected quadratic, coefficient_tuning or hyper_representation");
  if (p.dim_x < 1) errs.push_back("problem.dim_x: must be >= 1");
  if (p.dim_y < 1) errs.push_back("problem.dim_y: must be >= 1");
  if (p.feature_dim < 0) errs.push_back("problem.feature_dim: must be >= 0");
  if (p.classes < 0 || p.classes == 1) errs.push_back("problem.classes: must be 0 (default) or >= 2");
  if (p.samples < 0) errs.push_back("problem.samples: must be >= 0");
  if (p.head_dim < 1) errs.push_back("problem.head_dim: must be >= 1");
  if (!(p.heterogeneity >= 0.0 && p.heterogeneity <= 1.0)) errs.push_back("problem.heterogeneity: must lie in [0, 1]");
  if (!(p.ridge > 0.0)) errs.push_back("problem.ridge: must be positive");
}

void parse_schedule(const json* obj, ExperimentConfig& cfg, std::vector<std::string>& errs) {
  Section s(obj, "schedule", errs);
  RunConfig& r = cfg.run;
  s.read("eta_in", r.eta_in);
  s.read("eta_in_y", r.eta_in_y);
  const bool eta_out = s.read("eta_out", r.eta_out);
  s.read("gamma_in", r.gamma_in);
  const bool gamma_out = s.read("gamma_out", r.gamma_out);
  const bool lambda = s.read("lambda", r.lambda, {"λ"});
  const bool k = s.read("K", r.K);
  s.read("T", r.T);
  s.read("epsilon", r.epsilon);
  s.read("target_grad_norm", r.target_grad_norm);
  if (const json* c = s.find("coefficients")) {
    Section cs(c, "schedule.coefficients", errs);
    cs.read("c_lambda", cfg.coefficients.c_lambda);
    cs.read("c_K", cfg.coefficients.c_K);
    cs.read("c_eta", cfg.coefficients.c_eta);
    cs.read("c_gamma", cfg.coefficients.c_gamma);
    cs.finish();
  }
  s.finish();
  if (r.epsilon) {
    cfg.lambda_from_epsilon = !lambda;
    cfg.K_from_epsilon = !k;
    cfg.eta_out_from_epsilon = !eta_out;
    cfg.gamma_out_from_epsilon = !gamma_out;
  }
}

void parse_seeds(const json* obj, ExperimentConfig& cfg, std::vector<std::string>& errs) {
  Section s(obj, "seeds", errs);
  s.read("master", cfg.seeds.master);
  s.read("topology", cfg.seeds.topology);
  s.read("data", cfg.seeds.data);
  s.finish();
  cfg.run.seed = cfg.seeds.master;
  cfg.topology.seed = cfg.seeds.topology_seed();
}

void parse_log(const json* obj, ExperimentConfig& cfg, std::vector<std::string>& errs) {
  Section s(obj, "log", errs);
  s.read("flush_every", cfg.flush_every);
  s.read("wall_clock", cfg.run.wall_clock);
  s.read("audit", cfg.run.audit);
  s.finish();
  if (cfg.flush_every < 1) errs.push_back("log.flush_every: must be >= 1");
}

}  // namespace

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.run.compressor = build_compressor(cfg.compressor);
  cfg.topology.seed = cfg.seeds.topology_seed();
  return cfg;
}

ExperimentConfig parse_config(const json& doc) {
  std::vector<std::string> errs;
  ExperimentConfig cfg = default_config();
  if (!doc.is_object()) throw InvalidConfigError("config: top level must be an object");

  static const std::vector<std::string> kTop = {"topology", "compressor", "problem", "schedule",
                                                "variant",  "seeds",      "output_dir", "log"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (std::find(kTop.begin(), kTop.end(), it.key()) != kTop.end()) continue;
    std::string msg = it.key() + ": unknown section";
    if (const auto s = suggest_key(it.key(), kTop); !s.empty()) msg += " (did you mean '" + s + "'?)";
    errs.push_back(msg);
  }

  parse_topology(child(doc, "topology"), cfg, errs);
  parse_compressor(child(doc, "compressor"), cfg, errs);
  parse_problem(child(doc, "problem"), cfg, errs);
  parse_schedule(child(doc, "schedule"), cfg, errs);
  parse_seeds(child(doc, "seeds"), cfg, errs);
  parse_log(child(doc, "log"), cfg, errs);
  if (const json* v = child(doc, "variant")) {
    if (!v->is_string()) {
      errs.push_back("variant: expected a string");
    } else {
      try {
        cfg.run.variant = parse_variant(v->get<std::string>());
      } catch (const Error& e) {
        errs.push_back(std::string("variant: ") + e.what());
      }
    }
  }
  if (const json* v = child(doc, "output_dir")) {
    if (!v->is_string())
      errs.push_back("output_dir: expected a string");
    else
      cfg.output_dir = v->get<std::string>();
  }
  for (auto& e : cfg.run.validation_errors()) errs.push_back(e);

  if (!errs.empty()) {
    std::ostringstream os;
    os << "invalid configuration (" << errs.size() << " error" << (errs.size() == 1 ? "" : "s") << "):";
    for (const auto& e : errs) os << "\n  " << e;
    throw InvalidConfigError(os.str());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidConfigError("cannot open config file " + path);
  json doc;
  try {
    doc = json::parse(is, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw InvalidConfigError("config " + path + ": " + e.what());
  }
  return parse_config(doc);
}

namespace {

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json to_json(const ExperimentConfig& cfg) {
  json t = {{"kind", to_string(cfg.topology.kind)},
            {"nodes", cfg.topology.node_count},
            {"edge_probability", cfg.topology.edge_probability}};
  if (cfg.topology.custom_edges) {
    json edges = json::array();
    for (const auto& [i, j] : *cfg.topology.custom_edges) edges.push_back({i, j});
    t["edges"] = edges;
  }
  const ProblemConfig& p = cfg.problem;
  const RunConfig& r = cfg.run;
  return {
      {"topology", t},
      {"compressor", {{"kind", cfg.compressor.kind}, {"ratio", cfg.compressor.ratio}, {"rescale", cfg.compressor.rescale}}},
      {"problem",
       {{"family", p.family},
        {"dim_x", p.dim_x},
        {"dim_y", p.dim_y},
        {"coupling", p.coupling},
        {"target", p.target},
        {"init_scale", p.init_scale},
        {"feature_dim", p.feature_dim},
        {"classes", p.classes},
        {"samples", p.samples},
        {"head_dim", p.head_dim},
        {"heterogeneity", p.heterogeneity},
        {"ridge", p.ridge},
        {"x_init", p.x_init}}},
      {"schedule",
       {{"eta_in", r.eta_in},
        {"eta_in_y", r.effective_eta_in_y()},
        {"eta_out", r.eta_out},
        {"gamma_in", r.gamma_in},
        {"gamma_out", r.gamma_out},
        {"lambda", r.lambda},
        {"K", r.K},
        {"T", r.T},
        {"epsilon", opt_json(r.epsilon)},
        {"target_grad_norm", opt_json(r.target_grad_norm)},
        {"coefficients",
         {{"c_lambda", cfg.coefficients.c_lambda},
          {"c_K", cfg.coefficients.c_K},
          {"c_eta", cfg.coefficients.c_eta},
          {"c_gamma", cfg.coefficients.c_gamma}}}}},
      {"variant", to_string(r.variant)},
      {"seeds", {{"master", cfg.seeds.master}, {"topology", cfg.seeds.topology_seed()}, {"data", cfg.seeds.data_seed()}}},
      {"output_dir", cfg.output_dir},
      {"log", {{"flush_every", cfg.flush_every}, {"wall_clock", r.wall_clock}, {"audit", r.audit}}},
  };
}

std::string config_hash(const ExperimentConfig& cfg) {
  json j = to_json(cfg);
  j.erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Compressor build_compressor(const CompressorConfig& cc) {
  Compressor c = Compressor::identity();
  if (cc.kind == "identity")
    c = Compressor::identity();
  else if (cc.kind == "top_k")
    c = Compressor::top_k(cc.ratio);
  else if (cc.kind == "rand_k")
    c = Compressor::rand_k(cc.ratio);
  else
    throw InvalidConfigError("unknown compressor kind '" + cc.kind + "' (expected identity, top_k or rand_k)");
  return cc.rescale ? rescale_biased(c) : c;
}

MixingMatrix build_topology(const ExperimentConfig& cfg) { return build_mixing_matrix(cfg.topology); }

std::unique_ptr<BilevelProblem> build_problem(const ExperimentConfig& cfg) {
  const ProblemConfig& p = cfg.problem;
  const int m = cfg.topology.node_count;
  const std::uint64_t seed = cfg.seeds.data_seed();
  if (p.family == "quadratic") {
    QuadraticOptions q;
    q.coupling = p.coupling;
    q.target = p.target;
    q.init_scale = p.init_scale;
    return make_quadratic_problem(m, p.dim_x, p.dim_y, seed, q);
  }
  if (p.family == "coefficient_tuning") {
    CoefficientTuningOptions o;
    if (p.feature_dim > 0) o.data.feature_dim = p.feature_dim;
    if (p.classes > 0) o.data.classes = p.classes;
    if (p.samples > 0) o.data.samples = p.samples;
    o.heterogeneity = p.heterogeneity;
    o.x_init = p.x_init;
    return make_coefficient_tuning_problem(m, seed, o);
  }
  if (p.family == "hyper_representation") {
    HyperRepresentationOptions o;
    if (p.feature_dim > 0) o.data.feature_dim = p.feature_dim;
    if (p.classes > 0) o.data.classes = p.classes;
    if (p.samples > 0) o.data.samples = p.samples;
    o.head_dim = p.head_dim;
    o.heterogeneity = p.heterogeneity;
    o.ridge = p.ridge;
    return make_hyper_representation_toy(m, o.data.feature_dim, o.head_dim, seed, o);
  }
  throw InvalidConfigError("problem.family: unknown family '" + p.family + "'");
}

void resolve_schedule(ExperimentConfig& cfg, const BilevelProblem& problem, const MixingMatrix& w) {
  if (!cfg.run.epsilon) return;
  if (!(cfg.lambda_from_epsilon || cfg.K_from_epsilon || cfg.eta_out_from_epsilon || cfg.gamma_out_from_epsilon))
    return;
  const Schedule s = default_schedule(*cfg.run.epsilon, problem.constants(), w.spectral_gap, cfg.coefficients);
  const bool eta_in_y_pinned = cfg.run.eta_in_y.has_value();
  if (cfg.lambda_from_epsilon) cfg.run.lambda = s.lambda;
  if (cfg.K_from_epsilon) cfg.run.K = s.K;
  if (cfg.eta_out_from_epsilon) cfg.run.eta_out = s.eta_out;
  if (cfg.gamma_out_from_epsilon) cfg.run.gamma_out = s.gamma_out;
  if (!eta_in_y_pinned) cfg.run.eta_in_y.reset();
  cfg.lambda_from_epsilon = cfg.K_from_epsilon = cfg.eta_out_from_epsilon = cfg.gamma_out_from_epsilon = false;
  cfg.run.validate();
}

}  // namespace c2dfb
