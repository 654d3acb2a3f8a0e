#include "mbda/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include "mbda/service.hpp"
#include "mbda/synthetic.hpp"
#include "mbda/workspace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mbda {

namespace {

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::size_t pos = 0;
    while (pos <= item.size()) {
      auto comma = item.find(',', pos);
      if (comma == std::string::npos) comma = item.size();
      if (comma > pos) out.push_back(item.substr(pos, comma - pos));
      pos = comma + 1;
    }
  }
  return out;
}

std::pair<int, int> parse_pcs(const std::string& s) {
  auto comma = s.find(',');
  if (comma == std::string::npos) throw ConfigError("--pcs expects i,j");
  try {
    return {std::stoi(s.substr(0, comma)), std::stoi(s.substr(comma + 1))};
  } catch (const std::exception&) {
    throw ConfigError("--pcs expects i,j");
  }
}

void print(std::ostream& out, const json& j) { out << j.dump(2) << "\n"; }

struct Globals {
  std::string workspace;
  std::size_t workers = 1;
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Log-stream anomaly detection: parse, model, detect, diagnose and de-parse.", "mbda"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  const char* env_ws = std::getenv("MBDA_WORKSPACE");
  g.workspace = env_ws && *env_ws ? env_ws : "mbda-ws";
  g.workers = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("-w,--workspace", g.workspace, "Workspace directory (env MBDA_WORKSPACE)");
  app.add_option("--workers", g.workers, "Parallel workers for parse/learn/deparse")->check(CLI::PositiveNumber);

  std::function<void()> action;

  // generate
  auto* generate = app.add_subcommand("generate", "Write a synthetic trap corpus with injected anomalies");
  std::string gen_out, gen_spec;
  std::optional<std::uint64_t> gen_seed;
  std::optional<int> gen_days;
  std::optional<double> gen_entries;
  generate->add_option("--out", gen_out, "Output directory; logs go to <out>/logs")->required();
  generate->add_option("--spec", gen_spec, "Scenario JSON (defaults to the built-in 60-day scenario)");
  generate->add_option("--seed", gen_seed);
  generate->add_option("--days", gen_days);
  generate->add_option("--entries-per-day", gen_entries);
  generate->callback([&] {
    action = [&] {
      SyntheticSpec spec = default_synthetic_spec();
      if (!gen_spec.empty()) {
        try {
          spec = json::parse(read_file(gen_spec)).get<SyntheticSpec>();
        } catch (const json::exception& e) {
          throw ConfigError(gen_spec + ": " + e.what());
        }
      }
      if (gen_seed) spec.rng_seed = *gen_seed;
      if (gen_days) spec.n_days = *gen_days;
      if (gen_entries) spec.entries_per_day = *gen_entries;
      spec.validate();
      auto corpus = generate_synthetic_corpus(spec, (fs::path(gen_out) / "logs").string());
      write_file((fs::path(gen_out) / "ground_truth.json").string(), to_json(corpus.truth).dump(2) + "\n");
      json s = spec;
      write_file((fs::path(gen_out) / "scenario.json").string(), s.dump(2) + "\n");
      print(out, {{"logs", (fs::path(gen_out) / "logs").string()},
                  {"files", corpus.manifest.chunks.size()},
                  {"entries", corpus.manifest.total_entries()},
                  {"ground_truth", (fs::path(gen_out) / "ground_truth.json").string()}});
    };
  });

  // scan
  auto* scan = app.add_subcommand("scan", "Index corpus files into time-bin chunks");
  std::vector<std::string> scan_paths;
  std::int64_t scan_bin = kSecondsPerDay;
  TimestampSpec scan_ts;
  std::string scan_delim = "\n";
  scan->add_option("paths", scan_paths, "Files or directories")->required();
  scan->add_option("--bin-width", scan_bin, "Bin width in seconds")->check(CLI::PositiveNumber);
  scan->add_option("--timestamp-pattern", scan_ts.pattern, "Regex with one group capturing the timestamp");
  scan->add_option("--timestamp-format", scan_ts.format, "strptime format of the captured timestamp");
  scan->add_option("--delimiter", scan_delim, "Record delimiter");
  scan->callback([&] {
    action = [&] {
      auto ws = Workspace::open_or_create(g.workspace);
      WorkspaceLock lock(ws.root());
      auto m = scan_corpus(scan_paths, scan_ts, scan_delim, scan_bin);
      ws.save_manifest(m);
      json issues = json::array();
      for (const auto& i : m.issues) issues.push_back({{"path", i.path}, {"message", i.message}});
      print(out, {{"chunks", m.chunks.size()},
                  {"bins", m.bin_labels().size()},
                  {"entries", m.total_entries()},
                  {"unparsable_records", m.unparsable_records},
                  {"issues", issues}});
    };
  });

  // learn
  auto* learn = app.add_subcommand("learn", "Learn the feature dictionary from the corpus");
  std::string learn_vars, learn_out;
  LearningParams learn_params;
  learn->add_option("--variables", learn_vars, "YAML with a variables: section (default: trap variables)");
  learn->add_option("--presence", learn_params.presence_threshold, "Per-bin presence threshold");
  learn->add_option("--variance-ratio", learn_params.variance_ratio_threshold, "Variance filter ratio");
  learn->add_option("--out", learn_out, "Also write the config here");
  learn->callback([&] {
    action = [&] {
      auto ws = Workspace::open(g.workspace);
      WorkspaceLock lock(ws.root());
      auto vars = learn_vars.empty() ? default_trap_variables() : parse_variables_yaml(read_file(learn_vars));
      auto outcome = learn_config(ws.manifest(), vars, learn_params, g.workers);
      ws.save_config(outcome.config);
      if (!learn_out.empty()) emit_config(outcome.config, learn_out);
      for (const auto& w : outcome.warnings) err << "warning: " << w << "\n";
      print(out, {{"features", outcome.config.features.size()},
                  {"candidates_considered", outcome.candidates_considered},
                  {"warnings", outcome.warnings}});
    };
  });

  // parse
  auto* parse = app.add_subcommand("parse", "Count features per bin into iteration 0");
  bool parse_force = false;
  std::string parse_config;
  parse->add_flag("--force", parse_force, "Discard existing iterations and registry");
  parse->add_option("--config", parse_config, "Use this parser config instead of the learned one");
  parse->callback([&] {
    action = [&] {
      auto ws = Workspace::open(g.workspace);
      if (!parse_config.empty()) ws.save_config(load_config(parse_config));
      auto result = parse_initial(ws, g.workers, parse_force);
      print(out, {{"rows", result.matrix.rows()}, {"columns", result.matrix.cols()}, {"report", to_json(result.report)}});
    };
  });

  // fuse
  auto* fusec = app.add_subcommand("fuse", "Concatenate feature matrices column-wise");
  std::vector<std::string> fuse_inputs;
  std::string fuse_out;
  fusec->add_option("inputs", fuse_inputs, "NAME=matrix.csv")->required();
  fusec->add_option("--out", fuse_out)->required();
  fusec->callback([&] {
    action = [&] {
      std::vector<std::pair<std::string, FeatureMatrix>> sources;
      for (const auto& in : fuse_inputs) {
        auto eq = in.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("fuse input must be NAME=PATH: " + in);
        sources.emplace_back(in.substr(0, eq), read_matrix(in.substr(eq + 1)));
      }
      auto m = fuse(sources);
      write_matrix(m, fuse_out);
      print(out, {{"rows", m.rows()}, {"columns", m.cols()}});
    };
  });

  // fit
  auto* fit = app.add_subcommand("fit", "Fit PCA on the current iteration");
  std::optional<int> fit_pcs, fit_max;
  std::optional<double> fit_tol;
  std::string fit_pre;
  fit->add_option("--pcs", fit_pcs, "Fixed number of components (otherwise the ckf policy)");
  fit->add_option("--tolerance", fit_tol, "Relative ckf improvement below which A stops growing");
  fit->add_option("--max-components", fit_max);
  fit->add_option("--preprocess", fit_pre, "mean-center | autoscale");
  auto apply_fit_flags = [&](Workspace& ws) {
    auto s = ws.settings();
    if (fit_pcs) {
      s.policy.kind = ComponentPolicy::Kind::kFixed;
      s.policy.fixed = *fit_pcs;
    }
    if (fit_tol) {
      s.policy.kind = ComponentPolicy::Kind::kCkf;
      s.policy.tolerance = *fit_tol;
    }
    if (fit_max) s.policy.max_components = *fit_max;
    if (!fit_pre.empty()) s.preprocess = preprocessing_from_string(fit_pre);
    ws.save_settings(s);
  };
  fit->callback([&] {
    action = [&] {
      auto ws = Workspace::open(g.workspace);
      WorkspaceLock lock(ws.root());
      apply_fit_flags(ws);
      auto outcome = fit_iteration(ws, ws.settings().policy, ws.settings().preprocess);
      print(out, {{"iteration", ws.iteration()},
                  {"components", outcome.chosen_components},
                  {"preprocess", to_string(ws.settings().preprocess)},
                  {"curves", curves_payload(outcome.curves)}});
    };
  });

  // detect
  auto* detectc = app.add_subcommand("detect", "Compute D/Q statistics and flag bins above the limits");
  std::optional<double> det_alpha;
  std::optional<int> det_pcs;
  detectc->add_option("--alpha", det_alpha, "Confidence level of the control limits");
  detectc->add_option("--pcs", det_pcs, "Refit with this many components first");
  detectc->callback([&] {
    action = [&] {
      auto ws = Workspace::open(g.workspace);
      WorkspaceLock lock(ws.root());
      auto s = ws.settings();
      if (det_alpha) s.alpha = *det_alpha;
      ws.save_settings(s);
      if (det_pcs) {
        ComponentPolicy p = s.policy;
        p.kind = ComponentPolicy::Kind::kFixed;
        p.fixed = *det_pcs;
        fit_iteration(ws, p, s.preprocess);
      }
      auto rep = detect(ws, s.alpha);
      for (const auto& id : rep.new_cases) err << "new case " << id << "\n";
      out << read_file(ws.iteration_dir(rep.iteration) + "/msnm.json");
    };
  });

  // iterate
  auto* iteratec = app.add_subcommand("iterate", "Fit and detect on the current iteration");
  std::optional<double> it_alpha;
  iteratec->add_option("--alpha", it_alpha);
  iteratec->callback([&] {
    action = [&] {
      auto ws = Workspace::open(g.workspace);
      const auto& s = ws.settings();
      print(out, to_json(iterate(ws, it_alpha.value_or(s.alpha), s.policy, s.preprocess)));
    };
  });

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "oMEDA contrast of a case or of two groups of bins");
  std::string diag_case;
  std::vector<std::string> diag_g1, diag_g2;
  std::optional<int> diag_top, diag_pcs;
  std::optional<double> diag_fraction;
  bool diag_create = false;
  diag->add_option("--case", diag_case);
  diag->add_option("--group1", diag_g1, "Bins (comma separated)");
  diag->add_option("--group2", diag_g2, "Bins; default every other bin");
  diag->add_option("--top", diag_top, "Keep the top-k features");
  diag->add_option("--fraction", diag_fraction, "Keep features with |bar| >= fraction * max|bar|");
  diag->add_option("--pcs", diag_pcs, "Components used for the reconstruction");
  diag->add_flag("--create-case", diag_create, "Register group1 as a case with the selected features");
  diag->callback([&] {
    action = [&] {
      auto ws = Workspace::open(g.workspace);
      DiagnoseOptions opt;
      if (diag_top) opt.rule = TopRule::top_k(*diag_top);
      if (diag_fraction) opt.rule = TopRule::fraction(*diag_fraction);
      opt.components = diag_pcs.value_or(0);
      json j;
      OmedaResult result;
      if (!diag_case.empty()) {
        if (!diag_g1.empty()) throw ConfigError("--case and --group1 are exclusive");
        result = diagnose_case(ws, diag_case, opt);
        j = to_json(result);
        j["case"] = diag_case;
      } else {
        GroupSelection sel;
        sel.group1 = split_list(diag_g1);
        if (sel.group1.empty()) throw ConfigError("diagnose needs --case or --group1");
        sel.group2 = split_list(diag_g2);
        sel.rest_as_group2 = diag_g2.empty();
        result = diagnose_selection(ws, sel, opt.components);
        j = to_json(result);
      }
      const auto top = case_features(result, opt.rule, ws.config());
      j["top"] = top;
      if (diag_create && diag_case.empty()) j["created_case"] = create_case(ws, split_list(diag_g1), top).id;
      print(out, j);
    };
  });

  // deparse
  auto* dep = app.add_subcommand("deparse", "Recover the raw entries behind a case");
  std::string dep_case, dep_out;
  bool dep_entries = false;
  dep->add_option("--case", dep_case)->required();
  dep->add_option("--out", dep_out, "Also write the report here");
  dep->add_flag("--entries", dep_entries, "Print the matched raw entries");
  dep->callback([&] {
    action = [&] {
      auto ws = Workspace::open(g.workspace);
      auto report = deparse_case(ws, dep_case, g.workers);
      if (!dep_out.empty()) save_report(report, dep_out);
      if (dep_entries) {
        for (const auto& e : materialize(ws.manifest(), report)) out << e.raw_text << "\n";
        return;
      }
      auto j = to_json(summarize(report));
      j["case"] = dep_case;
      j["report"] = "reports/" + dep_case + ".json";
      j["gaps"] = report.gaps;
      j["warnings"] = report.warnings;
      print(out, j);
    };
  });

  // graph
  auto* graphc = app.add_subcommand("graph", "Export the station/AP graph of a case or bins");
  std::string graph_case, graph_out, graph_format = "gexf";
  std::vector<std::string> graph_bins;
  std::uint64_t node_min = 0, edge_min = 0;
  graphc->add_option("--case", graph_case);
  graphc->add_option("--bins", graph_bins);
  graphc->add_option("--node-min", node_min);
  graphc->add_option("--edge-min", edge_min);
  graphc->add_option("--format", graph_format, "gexf | csv | json");
  graphc->add_option("--out", graph_out, "Output file (default stdout)");
  graphc->callback([&] {
    action = [&] {
      auto ws = Workspace::open(g.workspace);
      auto bins = split_list(graph_bins);
      if (!graph_case.empty()) {
        auto cases = ws.cases();
        auto it = cases.find(graph_case);
        if (it == cases.end()) throw ConfigError("unknown case " + graph_case);
        bins = it->second.anomaly.bins;
      }
      if (bins.empty()) throw ConfigError("graph needs --case or --bins");
      const auto format = graph_format_from_string(graph_format);
      const auto& s = ws.settings();
      auto graph = build_graph_window(ws.manifest(), bins, ws.config(), s.station_variable, s.ap_variable, g.workers);
      if (!graph_out.empty()) {
        export_graph(graph, node_min, edge_min, graph_out, format);
        return;
      }
      auto f = filter_graph(graph, node_min, edge_min);
      switch (format) {
        case GraphFormat::kGexf: out << graph_to_gexf(f); break;
        case GraphFormat::kCsv: out << graph_to_csv(f); break;
        case GraphFormat::kJson: print(out, graph_to_json(f)); break;
      }
    };
  });

  // update
  auto* upd = app.add_subcommand("update", "Extract a case and start a new iteration");
  std::string upd_kind = "observation-wise", upd_case;
  std::vector<std::string> upd_bins;
  upd->add_option("--kind", upd_kind, "observation-wise | log-wise")
      ->check(CLI::IsMember({"observation-wise", "log-wise"}));
  upd->add_option("--case", upd_case);
  upd->add_option("--bins", upd_bins, "Observation-wise only");
  upd->callback([&] {
    action = [&] {
      auto ws = Workspace::open(g.workspace);
      UpdateOutcome outcome;
      if (upd_kind == "log-wise") {
        if (upd_case.empty()) throw ConfigError("log-wise update needs --case");
        outcome = update_logwise(ws, upd_case, g.workers);
      } else {
        auto bins = split_list(upd_bins);
        if (bins.empty() && !upd_case.empty()) {
          auto cases = ws.cases();
          auto it = cases.find(upd_case);
          if (it == cases.end()) throw ConfigError("unknown case " + upd_case);
          bins = it->second.anomaly.bins;
        }
        if (bins.empty()) throw ConfigError("observation-wise update needs --bins or --case");
        outcome = update_observationwise(ws, std::set<std::string>(bins.begin(), bins.end()), upd_case);
      }
      print(out, {{"record", to_json(outcome.record)}, {"rows", outcome.matrix.rows()}});
    };
  });

  // replay
  auto* replay = app.add_subcommand("replay", "Rebuild every iteration from the extraction records and compare");
  replay->callback([&] {
    action = [&] {
      auto ws = Workspace::open(g.workspace);
      auto matrices = replay_matrices(ws, g.workers);
      json rows = json::array();
      bool all = true;
      for (std::size_t k = 0; k < matrices.size(); ++k) {
        bool same = matrix_to_csv(matrices[k]) == read_file(ws.iteration_dir(static_cast<int>(k)) + "/matrix.csv");
        all = all && same;
        rows.push_back({{"iteration", k}, {"identical", same}});
      }
      print(out, rows);
      if (!all) throw DataError("replayed matrices differ from the stored ones");
    };
  });

  // plot
  auto* plot = app.add_subcommand("plot", "Print a plot payload of the current iteration");
  std::string plot_kind, plot_pcs = "1,2";
  plot->add_option("kind", plot_kind, "model | scores | loadings | biplot | msnm | curves | registry")
      ->required()
      ->check(CLI::IsMember({"model", "scores", "loadings", "biplot", "msnm", "curves", "registry"}));
  plot->add_option("--pcs", plot_pcs, "Component pair, 1-based");
  plot->callback([&] {
    action = [&] {
      auto ws = Workspace::open(g.workspace);
      if (plot_kind == "registry") {
        print(out, registry_payload(ws));
        return;
      }
      auto [a, b] = parse_pcs(plot_pcs);
      print(out, plot_payload(ws, plot_kind, a, b));
    };
  });

  // registry
  auto* registry = app.add_subcommand("registry", "Print cases and extraction history");
  registry->callback([&] {
    action = [&] { print(out, registry_payload(Workspace::open(g.workspace))); };
  });

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the workspace over HTTP");
  ServiceOptions sopt;
  serve->add_option("--host", sopt.host);
  serve->add_option("--port", sopt.port);
  serve->add_option("--cors-origin", sopt.cors_origin, "Allowed origin for the UI");
  serve->callback([&] {
    action = [&] {
      sopt.workers = g.workers;
      Service service(Workspace::open(g.workspace).root(), sopt);
      int port = service.bind();
      err << "listening on http://" << sopt.host << ":" << port << "\n";
      service.listen();
    };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (action) action();
    return kExitOk;
  } catch (const LockError& e) {
    err << "error: " << e.what() << "\n";
    return kExitLock;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace mbda
