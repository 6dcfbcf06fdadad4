#include <doctest.h>

#include <unistd.h>

#include <filesystem>

#include "bellsim/engine.hpp"
#include "bellsim/io.hpp"
#include "bellsim/stats.hpp"

using namespace bellsim;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test case, removed on scope exit.
struct TmpDir {
  fs::path path;
  TmpDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("bellsim_io_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TmpDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

ExperimentConfig small_run_config(std::int64_t m) {
  ExperimentConfig cfg;
  cfg.m_total = m;
  cfg.rate_hz = 1e9;
  cfg.seed = 99;
  return cfg;
}

}  // namespace

TEST_CASE("doubles survive the shortest round-trip format") {
  for (const double v : {0.1, 1.0 / 3.0, 1e-300, 1.7976931348623157e308, -0.0, 12345.678,
                         0.07322330470336312, 2.5e-323}) {
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK_THROWS_AS(static_cast<void>(parse_double("1.2.3")), ConfigError);
  CHECK_THROWS_AS(static_cast<void>(parse_double("")), ConfigError);
}

TEST_CASE("records survive a CSV round trip") {
  TmpDir tmp;
  ExperimentConfig cfg = small_run_config(500);
  const RunResult r = run(cfg);  // qm source: no traces
  const std::string path = tmp.file("records.csv");
  write_records_csv(path, r.records, cfg.directions);

  const LoadedRecords loaded = read_records_csv(path);
  REQUIRE(loaded.records.size() == r.records.size());
  CHECK(loaded.names == std::vector<std::string>{"A", "B", "C"});
  for (std::size_t i = 0; i < loaded.records.size(); ++i) {
    const PairRecord& a = r.records[i];
    const PairRecord& b = loaded.records[i];
    CHECK(a.m == b.m);
    CHECK(a.setting1 == b.setting1);  // sorted names match the original order here
    CHECK(a.setting2 == b.setting2);
    CHECK(a.outcome1 == b.outcome1);
    CHECK(a.outcome2 == b.outcome2);
    CHECK(a.t_emit == b.t_emit);  // bit-exact via shortest round-trip
    CHECK(a.t_set1 == b.t_set1);
    CHECK(a.t_set2 == b.t_set2);
    CHECK_FALSE(b.trace.has_value());
  }
}

TEST_CASE("traces reattach losslessly, including the lambda bits") {
  TmpDir tmp;
  ExperimentConfig cfg = small_run_config(400);
  cfg.source = SelectionCorrelatedSource{};
  const RunResult r = run(cfg);
  write_records_csv(tmp.file("r.csv"), r.records, cfg.directions);
  write_traces_csv(tmp.file("t.csv"), r.records, cfg.directions);

  LoadedRecords loaded = read_records_csv(tmp.file("r.csv"));
  attach_traces_csv(tmp.file("t.csv"), loaded.records, loaded.names);
  CHECK(loaded.names == std::vector<std::string>{"A", "B", "C"});
  for (std::size_t i = 0; i < loaded.records.size(); ++i) {
    const auto& orig = r.records[i].trace;
    const auto& back = loaded.records[i].trace;
    REQUIRE(back.has_value());
    CHECK(back->lambda == orig->lambda);
    CHECK(back->family == orig->family);
    CHECK(back->counterfactual == orig->counterfactual);
  }
  // Reattached data passes the strict counterfactual audit.
  CHECK(ensemble_inequality_check(loaded.records).holds);
}

TEST_CASE("loading sorts names; traces restore the original ordering") {
  // Direction names deliberately out of alphabetical order: the records
  // reader indexes against sorted names, the trace header re-indexes back.
  TmpDir tmp;
  ExperimentConfig cfg = small_run_config(300);
  cfg.directions = DirectionSet({"Z", "A", "M"},
                                {Direction::coplanar(0), Direction::coplanar(kPi / 4),
                                 Direction::coplanar(kPi / 2)});
  cfg.source = DeterministicUniformSource{};
  const RunResult r = run(cfg);
  write_records_csv(tmp.file("r.csv"), r.records, cfg.directions);
  write_traces_csv(tmp.file("t.csv"), r.records, cfg.directions);

  LoadedRecords loaded = read_records_csv(tmp.file("r.csv"));
  CHECK(loaded.names == std::vector<std::string>{"A", "M", "Z"});

  attach_traces_csv(tmp.file("t.csv"), loaded.records, loaded.names);
  CHECK(loaded.names == std::vector<std::string>{"Z", "A", "M"});
  for (std::size_t i = 0; i < loaded.records.size(); ++i) {
    CHECK(loaded.records[i].setting1 == r.records[i].setting1);
    CHECK(loaded.records[i].setting2 == r.records[i].setting2);
    REQUIRE(loaded.records[i].trace.has_value());
    CHECK(loaded.records[i].trace->counterfactual == r.records[i].trace->counterfactual);
  }
  CHECK_NOTHROW(static_cast<void>(decomposition_audit(loaded.records)));
}

TEST_CASE("partial trace files leave the uncovered records untraced") {
  TmpDir tmp;
  ExperimentConfig cfg = small_run_config(100);
  cfg.source = DeterministicUniformSource{};
  RunResult r = run(cfg);
  std::vector<PairRecord> evens;
  for (const auto& rec : r.records)
    if (rec.m % 2 == 0) evens.push_back(rec);
  write_records_csv(tmp.file("r.csv"), r.records, cfg.directions);
  write_traces_csv(tmp.file("t.csv"), evens, cfg.directions);

  LoadedRecords loaded = read_records_csv(tmp.file("r.csv"));
  attach_traces_csv(tmp.file("t.csv"), loaded.records, loaded.names);
  for (const auto& rec : loaded.records)
    CHECK(rec.trace.has_value() == (rec.m % 2 == 0));
}

TEST_CASE("malformed record files are rejected with their defect") {
  TmpDir tmp;
  write_text_file(tmp.file("bad_header.csv"), "m,who,what\n1,A,B\n");
  CHECK_THROWS_WITH_AS(static_cast<void>(read_records_csv(tmp.file("bad_header.csv"))),
                       doctest::Contains("header"), ConfigError);

  const std::string header =
      "m,setting1,setting2,outcome1,outcome2,t_emit,t_set1,t_set2,lambda_family";
  write_text_file(tmp.file("short.csv"), header + "\n1,A,B,+1\n");
  CHECK_THROWS_WITH_AS(static_cast<void>(read_records_csv(tmp.file("short.csv"))),
                       doctest::Contains("9 fields"), ConfigError);

  write_text_file(tmp.file("bad_outcome.csv"), header + "\n1,A,B,up,-1,0,0,0,\n");
  CHECK_THROWS_WITH_AS(static_cast<void>(read_records_csv(tmp.file("bad_outcome.csv"))),
                       doctest::Contains("outcome"), ConfigError);

  CHECK_THROWS_AS(static_cast<void>(read_records_csv(tmp.file("missing.csv"))), ConfigError);

  write_text_file(tmp.file("records_ok.csv"), header + "\n1,A,B,+1,-1,0,0,0,\n");
  std::vector<PairRecord> recs = read_records_csv(tmp.file("records_ok.csv")).records;
  std::vector<std::string> names{"A", "B"};
  write_text_file(tmp.file("bad_traces.csv"), "m,family,lambda,cf_A\n");
  CHECK_THROWS_WITH_AS(attach_traces_csv(tmp.file("bad_traces.csv"), recs, names),
                       doctest::Contains("lack direction 'B'"), ConfigError);
  write_text_file(tmp.file("bad_traces2.csv"), "m,family,raw\n");
  CHECK_THROWS_WITH_AS(attach_traces_csv(tmp.file("bad_traces2.csv"), recs, names),
                       doctest::Contains("traces header"), ConfigError);
}

TEST_CASE("summary json lays out counts, frequencies and expectations") {
  std::vector<PairRecord> rs;
  for (int i = 0; i < 4; ++i) {
    PairRecord r;
    r.m = i + 1;
    r.setting1 = 0;
    r.setting2 = 1;
    r.outcome1 = i < 3 ? Outcome::Up : Outcome::Down;
    r.outcome2 = Outcome::Down;
    rs.push_back(r);
  }
  const auto j = summary_json(tally(rs), {"A", "B"});
  CHECK(j["m_total"] == 4);
  REQUIRE(j["pairs"].size() == 1);
  const auto& p = j["pairs"][0];
  CHECK(p["pair"] == "A-B");
  CHECK(p["counts"]["ud"] == 3);
  CHECK(p["counts"]["dd"] == 1);
  CHECK(p["subtotal"] == 4);
  CHECK(p["frequencies"]["ud"] == doctest::Approx(0.75));
  CHECK(p["expectation"] == doctest::Approx(-0.5));
}

TEST_CASE("config text parses every field") {
  const std::string text = R"(
# sample configuration
directions = A:0, B:0.7853981633974483, C:1.5707963267948966
m_total = 1000
seed = 42
t_start = 0.5
t_end = 2.5
rate_hz = 1e6
poisson = true
cadence_s = 0.1
natural_units = false
detector_distance = 6.5
source = qm
schedule = iid_random 7
)";
  const ExperimentConfig cfg = parse_config_text(text, "");
  CHECK(cfg.directions.size() == 3);
  CHECK(cfg.directions.name(1) == "B");
  CHECK(cfg.directions.dir(2).angle() == doctest::Approx(kPi / 2));
  CHECK(cfg.m_total == 1000);
  CHECK(cfg.seed == 42);
  CHECK(cfg.t_start == 0.5);
  CHECK(cfg.t_end == 2.5);
  CHECK(cfg.rate_hz == 1e6);
  CHECK(cfg.poisson_emissions);
  CHECK(cfg.cadence_s == 0.1);
  CHECK(cfg.geometry.detector1 == std::array<double, 3>{6.5, 0.0, 0.0});
  CHECK(cfg.geometry.detector2 == std::array<double, 3>{-6.5, 0.0, 0.0});
  CHECK(std::holds_alternative<QmSource>(cfg.source));
  CHECK(std::get<IidRandomSchedule>(cfg.schedule).seed == 7);
  CHECK(cfg.validate().empty());
}

TEST_CASE("config parses spatial directions, positions and schedules") {
  const std::string text = R"(
directions = X:1;0;0, Y:0;1;0, Z:0;0;1
m_total = 10
detector1 = 1;2;3
detector2 = -1;-2;-3
schedule = periodic X-Y, Y-Z
source = deterministic_uniform
)";
  const ExperimentConfig cfg = parse_config_text(text, "");
  CHECK_FALSE(cfg.directions.all_coplanar());
  CHECK(cfg.geometry.detector1 == std::array<double, 3>{1.0, 2.0, 3.0});
  const auto& per = std::get<PeriodicSchedule>(cfg.schedule);
  REQUIRE(per.pattern.size() == 2);
  CHECK(per.pattern[0] == std::pair{0, 1});
  CHECK(per.pattern[1] == std::pair{1, 2});
  CHECK(std::holds_alternative<DeterministicUniformSource>(cfg.source));

  const ExperimentConfig dc = parse_config_text("schedule = delayed_choice 1e-9 5\nm_total=1", "");
  const auto& d = std::get<DelayedChoiceSchedule>(dc.schedule);
  CHECK(d.latency_s == 1e-9);
  CHECK(d.seed == 5);
}

TEST_CASE("config file references resolve against its directory") {
  TmpDir tmp;
  write_text_file(tmp.file("density.json"),
                  R"({"kind": "mixture", "weights": [0.4, 0.6], "components": [
                        {"kind": "cap", "center": [0.3], "halfwidth": 0.5},
                        {"kind": "uniform"}]})");
  write_text_file(tmp.file("preset.txt"), "A-B\nB-C\n# comment\nA-C\n");
  write_text_file(tmp.file("cfg.txt"),
                  "m_total = 3\nsource = stochastic density.json\nschedule = preset preset.txt\n");
  const ExperimentConfig cfg = parse_config_file(tmp.file("cfg.txt"));
  const auto& sto = std::get<StochasticSource>(cfg.source);
  CHECK(sto.density.kind == "mixture");
  REQUIRE(sto.density.components.size() == 2);
  CHECK(sto.density.components[0].kind == "cap");
  CHECK(sto.density.components[0].halfwidth == 0.5);
  const auto& pre = std::get<PresetSchedule>(cfg.schedule);
  REQUIRE(pre.assignments.size() == 3);
  CHECK(pre.assignments[2] == std::pair{0, 2});
  CHECK(cfg.validate().empty());
}

TEST_CASE("selection-correlated sources parse their target flavor") {
  CHECK(std::get<SelectionCorrelatedSource>(
            parse_config_text("source = selection_correlated\nm_total=1", "").source)
            .target_kind == "qm");
  CHECK(std::get<SelectionCorrelatedSource>(
            parse_config_text("source = selection_correlated uniform_model\nm_total=1", "").source)
            .target_kind == "uniform_model");

  TmpDir tmp;
  write_text_file(tmp.file("targets.json"),
                  R"({"pairs": [{"pair": "A-B", "cells": [0.1, 0.4, 0.4, 0.1]},
                                {"pair": "B-C", "cells": [0.1, 0.4, 0.4, 0.1]},
                                {"pair": "A-C", "cells": [0.25, 0.25, 0.25, 0.25]}]})");
  write_text_file(tmp.file("cfg.txt"), "m_total = 5\nsource = selection_correlated targets.json\n");
  const ExperimentConfig cfg = parse_config_file(tmp.file("cfg.txt"));
  const auto& sel = std::get<SelectionCorrelatedSource>(cfg.source);
  CHECK(sel.target_kind == "custom");
  REQUIRE(sel.custom_targets.size() == 3);
  CHECK(sel.custom_targets.at({0, 1})[1] == 0.4);
  CHECK(cfg.validate().empty());
}

TEST_CASE("target json entries reorient to the canonical pair order") {
  const auto targets = targets_from_json(
      nlohmann::json::parse(R"({"pairs": [{"pair": "C-A", "cells": [0.1, 0.2, 0.3, 0.4]}]})"),
      default_triple());
  REQUIRE(targets.size() == 1);
  const auto& arr = targets.at({0, 2});
  CHECK(arr[0] == 0.1);
  CHECK(arr[1] == 0.3);  // C+A- seen from (A, C) is du; swapped into ud slot
  CHECK(arr[2] == 0.2);
  CHECK(arr[3] == 0.4);

  CHECK_THROWS_AS(static_cast<void>(targets_from_json(
                      nlohmann::json::parse(R"({"pairs": [{"pair": "A-Q", "cells": [1,0,0,0]}]})"),
                      default_triple())),
                  ConfigError);
  CHECK_THROWS_AS(static_cast<void>(targets_from_json(
                      nlohmann::json::parse(R"({"pairs": [{"pair": "A-B", "cells": [1,0]}]})"),
                      default_triple())),
                  ConfigError);
}

TEST_CASE("config errors carry the offending key or line") {
  CHECK_THROWS_WITH_AS(static_cast<void>(parse_config_text("volume = 11", "")),
                       doctest::Contains("unknown config key"), ConfigError);
  CHECK_THROWS_WITH_AS(static_cast<void>(parse_config_text("m_total = 1\nm_total = 2", "")),
                       doctest::Contains("duplicate"), ConfigError);
  CHECK_THROWS_WITH_AS(static_cast<void>(parse_config_text("just some words", "")),
                       doctest::Contains("key = value"), ConfigError);
  CHECK_THROWS_AS(static_cast<void>(parse_config_text("schedule = periodic A-Q\n", "")),
                  ConfigError);
  CHECK_THROWS_AS(static_cast<void>(parse_config_text("source = astrology", "")), ConfigError);
  CHECK_THROWS_AS(static_cast<void>(parse_config_text("m_total = lots", "")), ConfigError);
  CHECK_THROWS_AS(static_cast<void>(parse_config_text("poisson = maybe", "")), ConfigError);
}
