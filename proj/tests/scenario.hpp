#pragma once

#include "mbda/synthetic.hpp"
#include "mbda/workspace.hpp"
#include "support.hpp"

namespace mbda::test {

// A small synthetic corpus with one strong anomaly on days 8-9 and a parsed
// workspace over it.
inline SyntheticSpec small_scenario() {
  SyntheticSpec s;
  s.n_days = 20;
  s.entries_per_day = 3000;
  s.vocabulary = {{"bsnDot11StationAssociate", 0.4},     {"bsnDot11StationDisassociate", 0.3},
                  {"bsnAuthenticationFailure", 0.06},    {"ciscoLwappApIfUpNotify", 0.1},
                  {"bsnRADIUSServerNotResponding", 0.01}};
  s.anomalies = {{"auth", 8, 9, {"bsnAuthenticationFailure"}, 8}};
  s.rng_seed = 4242;
  s.n_aps = 6;
  s.n_stations = 200;
  s.n_users = 100;
  return s;
}

struct ScenarioWorkspace {
  TempDir dir;
  SyntheticCorpus corpus;
  Workspace ws;

  ScenarioWorkspace() : corpus(generate_synthetic_corpus(small_scenario(), dir.file("logs"))),
                        ws(Workspace::create(dir.file("ws"))) {
    ws.save_manifest(corpus.manifest);
    ws.save_config(learn_config(corpus.manifest, default_trap_variables(), {}, 2).config);
    parse_initial(ws, 2);
  }

  // Autoscaled fixed-A model plus detection on the current iteration.
  DetectionReport detect_now(int a = 2) {
    ComponentPolicy p;
    p.kind = ComponentPolicy::Kind::kFixed;
    p.fixed = a;
    return iterate(ws, 0.99, p, Preprocessing::kAutoscale);
  }
};

}  // namespace mbda::test
