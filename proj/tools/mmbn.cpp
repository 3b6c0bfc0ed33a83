// mmbn: learn, evaluate and cross-validate Bayesian network classifiers, or
// export the structure-learning MILP.
//
// Exit codes: 0 success (including a timed-out solve with an incumbent),
// 2 no incumbent, 1 usage or input errors.
//
// MMBN_LOG=quiet|warn|progress controls stderr chatter (default warn).

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmbn/mmbn.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mmbn;

namespace {

enum class Verbosity { quiet, warn, progress };

Verbosity verbosity() {
  const char* v = std::getenv("MMBN_LOG");
  if (!v) return Verbosity::warn;
  const std::string s(v);
  if (s == "quiet" || s == "0") return Verbosity::quiet;
  if (s == "progress" || s == "debug" || s == "2") return Verbosity::progress;
  return Verbosity::warn;
}

void warn(const std::string& msg) {
  if (verbosity() != Verbosity::quiet) std::cerr << "warning: " << msg << '\n';
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string command;
  std::string data;
  std::string model;
  std::string out = "mmbn_out";
  std::string score = "sm";
  std::vector<double> gamma_p;
  std::optional<double> gamma;
  std::vector<int> max_parents;
  double delta = 1.0;
  double time_limit = 7200.0;
  double gap_tol = 1e-6;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::size_t class_column = 0;
  int bins = 3;
  std::vector<int> schema;
  bool header = false;
  bool no_header = false;
  std::string node_order = "best";
  double log_interval = 5.0;
  bool timing = false;
  std::size_t folds = 5;
};

HeaderMode header_mode(const Options& o) {
  if (o.header && o.no_header) throw UsageError("--header and --no-header are exclusive");
  if (o.header) return HeaderMode::present;
  if (o.no_header) return HeaderMode::absent;
  return HeaderMode::detect;
}

std::string header_name(HeaderMode h) {
  return h == HeaderMode::present ? "present" : h == HeaderMode::absent ? "absent" : "detect";
}

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw std::runtime_error("cannot create output directory '" + dir + "'");
  return p;
}

LoadOptions load_options(const Options& o) {
  LoadOptions lo;
  lo.bins = o.bins;
  lo.header = header_mode(o);
  lo.class_column = o.class_column;
  if (!o.schema.empty()) lo.schema = o.schema;
  return lo;
}

Dataset load(const Options& o) {
  std::vector<std::string> warnings;
  Dataset ds = load_csv(o.data, load_options(o), &warnings);
  for (const auto& w : warnings) warn(w);
  return ds;
}

void validate(Options& o) {
  if (!(o.time_limit > 0.0)) throw UsageError("--time-limit must be > 0");
  if (!(o.delta > 0.0) || !std::isfinite(o.delta)) throw UsageError("--delta must be > 0");
  if (!(o.gap_tol >= 0.0)) throw UsageError("--gap-tol must be >= 0");
  if (o.threads < 1) throw UsageError("--threads must be >= 1");
  if (o.bins < 2) throw UsageError("--bins must be >= 2");
  if (o.node_order != "best" && o.node_order != "depth") throw UsageError("--node-order must be best or depth");
  for (int k : o.max_parents) {
    if (k < 0) throw UsageError("--max-parents must be >= 0");
  }
  for (double p : o.gamma_p) {
    if (!(p > 0.0 && p < 1.0)) throw UsageError("--gamma-p values must lie in (0,1)");
  }
  if (o.score != "sm" && o.score != "sbm" && o.score != "mdl" && o.score != "nb") {
    throw UsageError("--score must be sm, sbm, mdl or nb");
  }
  if ((o.score == "mdl" || o.score == "nb") && (!o.gamma_p.empty() || o.gamma)) {
    warn("--gamma/--gamma-p are ignored for score " + o.score);
    o.gamma_p.clear();
    o.gamma.reset();
  }
  if (o.gamma && !o.gamma_p.empty()) throw UsageError("--gamma and --gamma-p are exclusive");
}

LearnConfig learn_config(const Options& o) {
  LearnConfig cfg;
  cfg.score = parse_learn_score(o.score);
  if (!o.gamma_p.empty()) cfg.p_grid = o.gamma_p;
  cfg.gamma = o.gamma;
  if (!o.max_parents.empty()) cfg.max_parents = o.max_parents;
  cfg.delta = o.delta;
  cfg.seed = o.seed;
  cfg.solver.time_limit = o.time_limit;
  cfg.solver.gap_tol = o.gap_tol;
  cfg.solver.threads = o.threads;
  cfg.solver.node_order = o.node_order == "depth" ? NodeOrder::depth_first : NodeOrder::best_first;
  cfg.solver.log_interval = o.log_interval;
  if (verbosity() == Verbosity::progress) cfg.solver.log = &std::cerr;
  return cfg;
}

json config_json(const Options& o, const LearnConfig* cfg) {
  json j;
  j["command"] = o.command;
  if (!o.data.empty()) j["data"] = o.data;
  if (!o.model.empty()) j["model"] = o.model;
  j["header"] = header_name(header_mode(o));
  j["class_column"] = o.class_column;
  j["bins"] = o.bins;
  j["schema"] = o.schema;
  j["seed"] = o.seed;
  if (cfg) {
    j["score"] = to_string(cfg->score);
    if (uses_gamma(cfg->score)) {
      if (cfg->gamma) {
        j["gamma"] = *cfg->gamma;
      } else {
        j["gamma_p"] = cfg->p_grid;
        j["gamma"] = gamma_grid(cfg->p_grid);
      }
    }
    j["max_parents"] = cfg->max_parents;
    j["delta"] = cfg->delta;
    j["time_limit"] = cfg->solver.time_limit;
    j["gap_tol"] = cfg->solver.gap_tol;
    j["threads"] = cfg->solver.threads;
    j["node_order"] = o.node_order;
    j["inner_validation"] = {{"folds", cfg->inner_folds},
                             {"holdout_fraction", cfg->holdout_fraction},
                             {"holdout_above", cfg->holdout_threshold}};
  }
  if (o.command == "cross-validate") j["folds"] = o.folds;
  return j;
}

json selection_json(const SelectionResult& s) {
  json grid = json::array();
  for (const auto& g : s.grid) {
    grid.push_back({{"p", g.p},
                    {"gamma", g.gamma},
                    {"max_parents", g.max_parents},
                    {"correct", g.correct},
                    {"n", g.n},
                    {"accuracy", g.accuracy}});
  }
  return {{"protocol", s.protocol},
          {"chosen", {{"p", s.chosen.p}, {"gamma", s.chosen.gamma}, {"max_parents", s.chosen.max_parents}}},
          {"grid", grid}};
}

json solve_json(const LearnedStructure& ls, bool timing) {
  json j;
  to_json(j, ls.solve, timing);
  j["fallback_empty_graph"] = ls.fallback;
  j["catalog_size"] = ls.catalog_size;
  return j;
}

std::vector<std::string> names_of(const std::vector<ColumnInfo>& cols) {
  std::vector<std::string> out;
  for (const auto& c : cols) out.push_back(c.name);
  return out;
}

std::string solve_summary(const SolveResult& r) {
  std::ostringstream os;
  os << "status=" << to_string(r.status) << '\n';
  os << "gap=" << fixed(r.gap_percent, 2) << "%\n";
  os << "objective=" << fixed(r.objective, 6) << '\n';
  os << "upper_bound=" << fixed(r.upper_bound, 6) << '\n';
  os << "nodes=" << r.nodes_explored << '\n';
  return os.str();
}

std::string accuracy_line(const EvalReport& r) {
  return "accuracy=" + fixed(100.0 * r.accuracy, 2) + "% +/- " + fixed(100.0 * r.ci95, 2) + " (n=" +
         std::to_string(r.n) + ", correct=" + std::to_string(r.correct) + ")\n";
}

// ---------------------------------------------------------------------------

int cmd_learn(Options& o) {
  validate(o);
  const Dataset ds = load(o);
  const LearnConfig cfg = learn_config(o);
  const fs::path out = prepare_out(o.out);
  write_json(out / "config.json", config_json(o, &cfg));

  const SelectionResult sel = select_model(ds, cfg);
  if (sel.grid.size() > 1) write_json(out / "selection.json", selection_json(sel));

  LearnedStructure ls;
  const BnClassifier clf = fit_classifier(ds, cfg, sel.chosen.gamma, sel.chosen.max_parents, &ls);
  json sj = solve_json(ls, o.timing);
  sj["gamma"] = uses_gamma(cfg.score) ? json(sel.chosen.gamma) : json(nullptr);
  sj["max_parents"] = sel.chosen.max_parents;
  write_json(out / "solve.json", sj);

  std::string summary = "command=learn\nscore=" + std::string(to_string(cfg.score)) + "\n" + solve_summary(ls.solve);
  if (ls.fallback) {
    summary += "model=none\n";
    write_text(out / "summary.txt", summary);
    std::cerr << "error: no incumbent found within the time limit\n";
    return 2;
  }
  write_json(out / "model.json", model_bundle(clf));
  const auto names = names_of(clf.columns());
  write_text(out / "structure.dot", to_dot(clf.structure(), names));
  const EvalReport train = evaluate(clf, ds);
  summary += "edges=" + std::to_string(clf.structure().num_edges()) + "\n";
  summary += "train_" + accuracy_line(train);
  write_text(out / "summary.txt", summary);
  std::cout << summary;
  return 0;
}

int cmd_evaluate(Options& o) {
  if (o.bins < 2) throw UsageError("--bins must be >= 2");
  std::ifstream mf(o.model);
  if (!mf) throw std::runtime_error("cannot open model '" + o.model + "'");
  const BnClassifier clf = load_model_bundle(json::parse(mf));
  std::ifstream df(o.data);
  if (!df) throw std::runtime_error("cannot open '" + o.data + "'");
  const Dataset test = encode_csv(df, clf.columns(), clf.params().cardinalities(), header_mode(o));
  const fs::path out = prepare_out(o.out);
  write_json(out / "config.json", config_json(o, nullptr));
  const EvalReport rep = evaluate(clf, test);
  write_json(out / "eval.json", rep);
  std::string summary = "command=evaluate\n" + accuracy_line(rep);
  if (!rep.unseen_class_samples.empty()) {
    summary += "unseen_class_samples=" + std::to_string(rep.unseen_class_samples.size()) + "\n";
    warn(std::to_string(rep.unseen_class_samples.size()) + " test samples have a class unseen in training");
  }
  write_text(out / "summary.txt", summary);
  std::cout << summary;
  return 0;
}

int cmd_cross_validate(Options& o) {
  validate(o);
  const Dataset ds = load(o);
  const LearnConfig cfg = learn_config(o);
  if (o.folds < 2 || o.folds > ds.num_samples()) throw UsageError("--folds must lie in [2, samples]");
  const fs::path out = prepare_out(o.out);
  write_json(out / "config.json", config_json(o, &cfg));
  std::vector<std::string> warnings;
  const FoldPlan plan = make_folds(ds, o.folds, o.seed, &warnings);
  for (const auto& w : warnings) warn(w);
  write_json(out / "folds.json", plan);

  const CrossValidationResult cv = cross_validate(ds, plan, cfg);
  json j = cv.report;
  json sels = json::array();
  json solves = json::array();
  for (std::size_t f = 0; f < cv.selections.size(); ++f) {
    sels.push_back(selection_json(cv.selections[f]));
    json s = solve_json(cv.structures[f], o.timing);
    s["structure"] = cv.structures[f].structure;
    solves.push_back(std::move(s));
  }
  j["selection"] = std::move(sels);
  j["solves"] = std::move(solves);
  write_json(out / "cv.json", j);

  std::ostringstream os;
  os << "command=cross-validate\nscore=" << to_string(cfg.score) << "\nfolds=" << plan.k << '\n';
  os << "fold  n    correct  accuracy  K  gamma      status            gap\n";
  for (const auto& f : cv.report.folds) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-5zu %-4zu %-8zu %7s%%  %-2d %-10s %-17s %s%%\n", f.fold + 1, f.n, f.correct,
                  fixed(100.0 * f.accuracy, 2).c_str(), f.max_parents, fixed(f.gamma, 4).c_str(),
                  f.solve_status.c_str(), fixed(f.gap_percent, 2).c_str());
    os << buf;
  }
  os << "pooled_" << accuracy_line(cv.report);
  write_text(out / "summary.txt", os.str());
  std::cout << os.str();
  return 0;
}

int cmd_export(Options& o) {
  validate(o);
  if (o.score == "nb") throw UsageError("naive Bayes has no MILP to export");
  if (o.gamma_p.size() > 1 || o.max_parents.size() > 1) {
    throw UsageError("export-milp takes a single --gamma-p and a single --max-parents");
  }
  const Dataset ds = load(o);
  const LearnScore score = parse_learn_score(o.score);
  double gamma = 0.0;
  if (uses_gamma(score)) gamma = o.gamma ? *o.gamma : gamma_from_p(o.gamma_p.empty() ? 0.9 : o.gamma_p.front());
  const int k = o.max_parents.empty() ? 2 : o.max_parents.front();
  const MilpModel model = build_learning_milp(ds, score, gamma, k, o.delta);
  const fs::path out = prepare_out(o.out);
  LearnConfig cfg = learn_config(o);
  cfg.gamma = uses_gamma(score) ? std::optional<double>(gamma) : std::nullopt;
  cfg.max_parents = {k};
  write_json(out / "config.json", config_json(o, &cfg));
  std::ostringstream mps;
  write_mps(model, mps, "MMBN_" + o.score);
  write_text(out / "model.mps", mps.str());
  std::ostringstream os;
  os << "command=export-milp\nscore=" << o.score << "\ncolumns=" << model.lp.num_cols()
     << "\nrows=" << model.lp.num_rows() << "\neta=" << model.num_eta << "\ntau=" << model.num_tau
     << "\nmargin_rows=" << model.num_margin_rows << "\norder_rows=" << model.num_order_rows << '\n';
  write_text(out / "summary.txt", os.str());
  std::cout << os.str();
  return 0;
}

void add_data_options(CLI::App* sub, Options& o) {
  sub->add_option("--class-column", o.class_column, "0-based file column holding the class");
  sub->add_option("--bins", o.bins, "bins for continuous columns");
  sub->add_option("--schema", o.schema, "per-column cardinalities, comma separated")->delimiter(',');
  sub->add_flag("--header", o.header, "first row is a header");
  sub->add_flag("--no-header", o.no_header, "first row is data");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--seed", o.seed, "random seed");
}

void add_learn_options(CLI::App* sub, Options& o) {
  sub->add_option("--score", o.score, "sm, sbm, mdl or nb");
  sub->add_option("--gamma-p", o.gamma_p, "p values; gamma = log(p/(1-p))")->delimiter(',');
  sub->add_option("--gamma", o.gamma, "raw gamma");
  sub->add_option("--max-parents", o.max_parents, "maximum parent-set sizes")->delimiter(',');
  sub->add_option("--delta", o.delta, "order variable range");
  sub->add_option("--time-limit", o.time_limit, "seconds per solve");
  sub->add_option("--gap-tol", o.gap_tol, "relative gap (percent) to stop at");
  sub->add_option("--threads", o.threads, "branch-and-bound worker threads");
  sub->add_option("--node-order", o.node_order, "best or depth");
  sub->add_option("--log-interval", o.log_interval, "seconds between progress lines");
  sub->add_flag("--timing", o.timing, "include wall times in JSON outputs");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Max-margin Bayesian network classifier learning"};
  app.require_subcommand(1);
  Options o;

  auto* learn = app.add_subcommand("learn", "learn a structure and classifier");
  learn->add_option("data", o.data, "training CSV")->required();
  add_data_options(learn, o);
  add_learn_options(learn, o);

  auto* eval = app.add_subcommand("evaluate", "evaluate a saved model");
  eval->add_option("model", o.model, "model.json")->required();
  eval->add_option("data", o.data, "test CSV")->required();
  add_data_options(eval, o);

  auto* cv = app.add_subcommand("cross-validate", "k-fold cross-validation with inner model selection");
  cv->add_option("data", o.data, "CSV")->required();
  cv->add_option("--folds", o.folds, "number of folds");
  add_data_options(cv, o);
  add_learn_options(cv, o);

  auto* exp = app.add_subcommand("export-milp", "write the structure MILP in MPS format");
  exp->add_option("data", o.data, "training CSV")->required();
  add_data_options(exp, o);
  add_learn_options(exp, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (learn->parsed()) {
      o.command = "learn";
      return cmd_learn(o);
    }
    if (eval->parsed()) {
      o.command = "evaluate";
      return cmd_evaluate(o);
    }
    if (cv->parsed()) {
      o.command = "cross-validate";
      return cmd_cross_validate(o);
    }
    o.command = "export-milp";
    return cmd_export(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return 1;
}
