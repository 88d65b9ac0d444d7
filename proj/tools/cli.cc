// Copyright 2026 The dpsearch Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.h"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "dpsearch/bench.h"
#include "dpsearch/errors.h"
#include "dpsearch/mechanisms.h"
#include "dpsearch/parallel.h"
#include "dpsearch/regression.h"
#include "dpsearch/relation.h"
#include "dpsearch/search.h"
#include "dpsearch/serialize.h"

namespace dpsearch::cli {
namespace {

namespace fs = std::filesystem;

struct PrivatizeFlags {
  std::string input, schema, mechanism, out, target;
  std::optional<std::string> join_key;
  double epsilon = 0.0, delta = 0.0;
  int order = 2;
  std::uint64_t seed = 0;
  bool pure_dp = false, no_noise = false, remove_outliers = false;
  std::optional<double> norm_bound, max_frequency;
  std::optional<std::size_t> pca;
  std::size_t n_corp = 1, n_req = 1;
};

struct SearchFlags {
  std::string corpus, train, test, target, out;
  std::size_t max_iter = 5;
  std::optional<std::size_t> threads;
};

struct BenchFlags {
  std::string config, out;
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> seed;
};

struct InspectFlags {
  std::string input;
  bool json = false;
};

struct PlotFlags {
  std::string input, out_dir;
};

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_text_file(path, text);
  }
}

int do_privatize(const PrivatizeFlags& f, std::ostream& out, std::ostream& err) {
  const auto kind = parse_mechanism(f.mechanism);
  if (!kind || *kind == MechanismKind::kNone) {
    throw PreconditionError("unknown mechanism: " + f.mechanism);
  }
  PrivacyBudget budget{f.epsilon, f.pure_dp ? 0.0 : f.delta};
  budget.validate();
  if (f.order < 1) throw PreconditionError("--order must be >= 1");

  const Schema schema = load_schema(f.schema);
  Dataset ds = load_csv(f.input, schema);
  if (f.join_key && (!schema.join_key() || schema.join_key()->name != *f.join_key)) {
    throw SchemaError("schema has no join key named " + *f.join_key);
  }
  if (f.remove_outliers) ds = remove_outliers(ds);
  if (f.pca) {
    if (f.target.empty()) throw PreconditionError("--pca needs --target");
    ds = reduce_dims(ds, *f.pca, f.target);
  }
  if (f.norm_bound) ds = bound_norm(ds, *f.norm_bound);

  const CounterRng stream(f.seed);
  MechanismOptions opts;
  opts.inject_noise = !f.no_noise;
  opts.randomize_keys = !f.no_noise;
  const ApmContext ctx{f.n_corp, f.n_req, f.max_frequency};
  const std::string dataset_id = fs::path(f.input).stem().string();
  BudgetLedger ledger;

  if (*kind == MechanismKind::kFpmUnionOpt) {
    if (f.target.empty()) throw PreconditionError("fpm-union-opt needs --target");
    if (f.join_key) throw UnsupportedError("fpm-union-opt is union-only");
    // Unkeyed view of the rows.
    const Dataset plain(Schema(ds.schema().feature_names()), ds.features(), {},
                        ds.norm_bound());
    PrivatizedMoments m = fpm_union_opt_privatize(plain, f.target, budget, stream, opts);
    emit(f.out, dump(moments_to_json(m)), out);
    ledger.record(dataset_id, f.mechanism,
                  {BudgetSpend{"moments", m.budget.epsilon, m.budget.delta}});
    err << ledger.summary(dataset_id) << "\n";
    return kOk;
  }

  PrivatizedStats s;
  switch (*kind) {
    case MechanismKind::kFpm:
      s = fpm_privatize(ds, f.join_key, f.order, budget, stream, opts);
      break;
    case MechanismKind::kFpmOpt:
      if (!f.join_key) throw UnsupportedError("fpm-opt needs --join-key");
      s = fpm_opt_privatize(ds, *f.join_key, f.order, budget, stream, opts);
      break;
    case MechanismKind::kTpm:
      s = tpm_privatize(ds, f.join_key, f.order, budget, stream, opts);
      break;
    case MechanismKind::kApm:
      s = apm_privatize(aggregate(ds, f.order, f.join_key.has_value()),
                        ds.norm_bound(), ds.rows(), budget, ctx, stream, opts);
      break;
    case MechanismKind::kSf1:
    case MechanismKind::kSf2:
      if (f.join_key) throw UnsupportedError("shuffling baselines are union-only");
      s = shuffle_privatize(
          ds, budget,
          *kind == MechanismKind::kSf1 ? ShuffleLevel::kSf1 : ShuffleLevel::kSf2,
          ctx, f.order, stream, opts);
      break;
    default:
      throw PreconditionError("unknown mechanism: " + f.mechanism);
  }
  emit(f.out, dump(privatized_to_json(s)), out);
  ledger.record(dataset_id, s);
  err << ledger.summary(dataset_id) << "\n";
  return kOk;
}

PrivatizedStats load_release(const std::string& path) {
  return privatized_from_json(parse_json_text(read_text_file(path)));
}

int do_search(const SearchFlags& f, std::ostream& out) {
  if (!fs::is_directory(f.corpus)) {
    throw PreconditionError("corpus is not a directory: " + f.corpus);
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(f.corpus)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Corpus corpus;
  for (const auto& p : files) {
    const Json j = parse_json_text(read_text_file(p.string()));
    PrivatizedStats s = privatized_from_json(j);
    AugType aug = s.stats.keyed() ? AugType::kBoth : AugType::kUnion;
    if (j.contains("aug_type")) {
      const std::string t = j["aug_type"].get<std::string>();
      if (t == "join") {
        aug = AugType::kJoin;
      } else if (t == "union") {
        aug = AugType::kUnion;
      } else if (t == "both") {
        aug = AugType::kBoth;
      } else {
        throw SchemaError("unknown aug_type in " + p.string() + ": " + t);
      }
    }
    Schema schema = schema_of(s);
    corpus.register_dataset(std::move(s), std::move(schema), aug, p.stem().string());
  }

  SearchRequest req;
  req.train = load_release(f.train);
  req.test = load_release(f.test);
  req.target = f.target;
  req.max_iterations = f.max_iter;
  const auto& feats = req.train.stats.features();
  if (std::find(feats.begin(), feats.end(), f.target) == feats.end()) {
    throw SchemaError("target not in training statistics: " + f.target);
  }
  for (const auto& name : feats) {
    if (name != f.target) req.features.push_back(name);
  }
  SearchOptions opts;
  opts.threads = f.threads.value_or(default_threads());
  const SearchResult r = greedy_search(corpus, req, opts);

  Json j;
  j["chosen"] = Json::array();
  for (const auto& c : r.chosen) {
    j["chosen"].push_back({{"id", c.id}, {"type", std::string(aug_type_name(c.type))}});
  }
  j["utility_trace"] = r.utility_trace;
  j["model"] = fit_to_json(r.final_model);
  emit(f.out, dump(j), out);
  return kOk;
}

int do_bench(const BenchFlags& f, std::ostream& out) {
  ExperimentConfig cfg = parse_experiment_config(read_text_file(f.config));
  if (f.seed) cfg.seed = *f.seed;
  const ExperimentResult r = run_experiment(cfg, f.threads.value_or(default_threads()));
  emit(f.out, to_csv(r), out);
  return kOk;
}

int do_inspect(const InspectFlags& f, std::ostream& out) {
  const PrivatizedStats s = load_release(f.input);
  if (f.json) {
    out << dump(privatized_to_json(s));
    return kOk;
  }
  out << "mechanism: " << mechanism_name(s.mechanism) << "\n";
  out << "epsilon: " << format_double(s.budget.epsilon)
      << "  delta: " << format_double(s.budget.delta) << "\n";
  out << "order: " << s.order << "  B: " << format_double(s.norm_bound)
      << "  n: " << s.cardinality << "\n";
  out << "features:";
  for (const auto& name : s.stats.features()) out << ' ' << name;
  out << "\n";
  if (s.stats.keyed()) {
    out << "join key: " << s.stats.key()->name << " (" << s.stats.key()->domain.size()
        << " values)\n";
  }
  for (const auto& spend : s.spends) {
    out << "spend " << spend.label << ": epsilon=" << format_double(spend.epsilon)
        << " delta=" << format_double(spend.delta) << "\n";
  }
  if (s.guaranteed_failure) out << "warning: noise scale guarantees failure\n";
  const SemiringVector total = s.stats.total();
  const auto& basis = *total.basis();
  out << "total:\n";
  for (std::size_t i = 0; i < total.size(); ++i) {
    out << "  " << basis.name(i) << " = " << format_double(total[i]) << "\n";
  }
  return kOk;
}

int do_plot(const PlotFlags& f, std::ostream& out) {
  const auto rows = parse_summary_csv(read_text_file(f.input));
  fs::create_directories(f.out_dir);
  for (const std::string metric : {"s_error", "beta_error"}) {
    const bool present = std::any_of(rows.begin(), rows.end(),
                                     [&](const auto& r) { return r.metric == metric; });
    if (!present) continue;
    const std::string path = (fs::path(f.out_dir) / (metric + ".svg")).string();
    write_text_file(path, render_svg(rows, metric));
    out << "wrote " << path << "\n";
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Differentially private factorized statistics and data search.",
               "dpsearch"};
  app.require_subcommand(1, 1);

  PrivatizeFlags pf;
  auto* priv = app.add_subcommand("privatize", "Privatize a CSV into semi-ring statistics");
  priv->add_option("--input", pf.input, "CSV file with a header row")->required();
  priv->add_option("--schema", pf.schema, "Schema JSON sidecar")->required();
  priv->add_option("--mechanism", pf.mechanism,
                   "fpm, fpm-opt, fpm-union-opt, tpm, apm, sf1 or sf2")
      ->required();
  priv->add_option("--epsilon", pf.epsilon, "Privacy budget epsilon (> 0)")->required();
  priv->add_option("--delta", pf.delta, "Privacy budget delta; 0 selects Laplace noise")
      ->required();
  priv->add_option("--order", pf.order, "Largest monomial degree k")->required();
  priv->add_option("--join-key", pf.join_key, "Aggregate per value of this key");
  priv->add_option("--seed", pf.seed, "Noise seed (default 0)");
  priv->add_option("--out", pf.out, "Output JSON file; stdout when omitted or -");
  priv->add_flag("--pure-dp", pf.pure_dp, "Force delta = 0 (Laplace noise)");
  priv->add_flag("--no-noise", pf.no_noise, "Skip noise injection (debugging only)");
  priv->add_option("--norm-bound", pf.norm_bound,
                   "Rescale rows so every norm is at most this bound");
  priv->add_flag("--remove-outliers", pf.remove_outliers,
                 "Drop rows beyond 1.5 standard deviations in any feature");
  priv->add_option("--pca", pf.pca, "Project non-target features onto K components");
  priv->add_option("--target", pf.target, "Target column (fpm-union-opt, --pca)");
  priv->add_option("--n-corp", pf.n_corp, "apm/sf2: corpus datasets per augmentation");
  priv->add_option("--n-req", pf.n_req, "apm/sf2: requests sharing the budget");
  priv->add_option("--max-frequency", pf.max_frequency,
                   "apm: largest key frequency (selects join mode)");

  SearchFlags sf;
  auto* search = app.add_subcommand("search", "Greedy augmentation search over a corpus");
  search->add_option("--corpus", sf.corpus, "Directory of released statistics (*.json)")
      ->required();
  search->add_option("--train", sf.train, "Requester training statistics")->required();
  search->add_option("--test", sf.test, "Requester test statistics")->required();
  search->add_option("--target", sf.target, "Target column")->required();
  search->add_option("--max-iter", sf.max_iter, "Greedy iterations (default 5)");
  search->add_option("--out", sf.out, "Result JSON file; stdout when omitted or -");
  search->add_option("--threads", sf.threads, "Worker threads (default all cores)");

  BenchFlags bf;
  auto* bench = app.add_subcommand("bench", "Run a synthetic experiment sweep");
  bench->add_option("--config", bf.config, "Experiment config JSON")->required();
  bench->add_option("--out", bf.out, "Summary CSV file; stdout when omitted or -");
  bench->add_option("--threads", bf.threads, "Worker threads (default all cores)");
  bench->add_option("--seed", bf.seed, "Override the config seed");

  InspectFlags inf;
  auto* inspect = app.add_subcommand("inspect", "Print a released statistics file");
  inspect->add_option("--input", inf.input, "Released statistics JSON")->required();
  inspect->add_flag("--json", inf.json, "Re-serialize as canonical JSON");

  PlotFlags plf;
  auto* plot = app.add_subcommand("plot", "Render SVG charts from a bench CSV");
  plot->add_option("--input", plf.input, "Summary CSV from bench")->required();
  plot->add_option("--out-dir", plf.out_dir, "Directory for <metric>.svg")->required();

  std::vector<const char*> argv{"dpsearch"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }

  try {
    if (*priv) return do_privatize(pf, out, err);
    if (*search) return do_search(sf, out);
    if (*bench) return do_bench(bf, out);
    if (*inspect) return do_inspect(inf, out);
    if (*plot) return do_plot(plf, out);
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << "\n";
    return kValidation;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kValidation;
  } catch (const BudgetError& e) {
    err << "budget error: " << e.what() << "\n";
    return kValidation;
  } catch (const PreconditionError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kValidation;
  } catch (const Error& e) {
    err << "precondition violated: " << e.what() << "\n";
    return kPrecondition;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kValidation;
}

}  // namespace dpsearch::cli
