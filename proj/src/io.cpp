#include "bellsim/io.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace bellsim {

namespace {

constexpr const char* kRecordsHeader =
    "m,setting1,setting2,outcome1,outcome2,t_emit,t_set1,t_set2,lambda_family";

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::int64_t parse_int(const std::string& s) {
  const std::string t = trim(s);
  std::int64_t v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
    throw ConfigError("bad integer '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  const std::string t = trim(s);
  std::uint64_t v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
    throw ConfigError("bad unsigned integer '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  const std::string t = trim(s);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw ConfigError("bad boolean '" + s + "' (use true/false)");
}

// from_chars rejects the explicit '+' we write; outcomes get their own parser.
Outcome parse_outcome_field(const std::string& s) {
  const std::string t = trim(s);
  if (t == "+1" || t == "1") return Outcome::Up;
  if (t == "-1") return Outcome::Down;
  throw ConfigError("bad outcome '" + s + "' (use +1/-1)");
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
    throw ConfigError("bad number '" + s + "'");
  return v;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << content;
}

// ---------------------------------------------------------------------------
// Records CSV

void write_records_csv(const std::string& path, std::span<const PairRecord> records,
                       const DirectionSet& dirs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << kRecordsHeader << '\n';
  for (const PairRecord& r : records) {
    out << r.m << ',' << dirs.name(r.setting1) << ',' << dirs.name(r.setting2) << ','
        << (outcome_value(r.outcome1) > 0 ? "+1" : "-1") << ','
        << (outcome_value(r.outcome2) > 0 ? "+1" : "-1") << ',' << format_double(r.t_emit)
        << ',' << format_double(r.t_set1) << ',' << format_double(r.t_set2) << ','
        << (r.trace ? r.trace->family : "") << '\n';
  }
  if (!out) throw ConfigError("write failed for " + path);
}

LoadedRecords read_records_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kRecordsHeader)
    throw ConfigError(path + ": bad or missing records header");

  struct Raw {
    std::int64_t m;
    std::string s1, s2;
    Outcome o1, o2;
    double t_emit, t_set1, t_set2;
  };
  std::vector<Raw> raws;
  std::vector<std::string> names;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    if (f.size() != 9) throw ConfigError(path + ": expected 9 fields, got line '" + line + "'");
    Raw r;
    r.m = parse_int(f[0]);
    r.s1 = f[1];
    r.s2 = f[2];
    r.o1 = parse_outcome_field(f[3]);
    r.o2 = parse_outcome_field(f[4]);
    r.t_emit = parse_double(f[5]);
    r.t_set1 = parse_double(f[6]);
    r.t_set2 = parse_double(f[7]);
    for (const auto* n : {&r.s1, &r.s2})
      if (std::find(names.begin(), names.end(), *n) == names.end()) names.push_back(*n);
    raws.push_back(std::move(r));
  }
  std::sort(names.begin(), names.end());

  LoadedRecords out;
  out.names = names;
  const auto index_of = [&](const std::string& n) {
    return static_cast<int>(std::find(names.begin(), names.end(), n) - names.begin());
  };
  out.records.reserve(raws.size());
  for (const Raw& r : raws) {
    PairRecord rec;
    rec.m = r.m;
    rec.setting1 = index_of(r.s1);
    rec.setting2 = index_of(r.s2);
    rec.outcome1 = r.o1;
    rec.outcome2 = r.o2;
    rec.t_emit = r.t_emit;
    rec.t_set1 = r.t_set1;
    rec.t_set2 = r.t_set2;
    out.records.push_back(std::move(rec));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Traces CSV

void write_traces_csv(const std::string& path, std::span<const PairRecord> records,
                      const DirectionSet& dirs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << "m,family,lambda";
  for (int i = 0; i < dirs.size(); ++i) out << ",cf_" << dirs.name(i);
  out << '\n';
  for (const PairRecord& r : records) {
    if (!r.trace) continue;
    out << r.m << ',' << r.trace->family << ',';
    for (std::size_t i = 0; i < r.trace->lambda.size(); ++i) {
      if (i) out << ';';
      out << format_double(r.trace->lambda[i]);
    }
    for (Outcome o : r.trace->counterfactual)
      out << ',' << (outcome_value(o) > 0 ? "+1" : "-1");
    out << '\n';
  }
  if (!out) throw ConfigError("write failed for " + path);
}

void attach_traces_csv(const std::string& path, std::vector<PairRecord>& records,
                       std::vector<std::string>& names) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty traces file");
  const auto header = split(trim(line), ',');
  if (header.size() < 4 || header[0] != "m" || header[1] != "family" || header[2] != "lambda")
    throw ConfigError(path + ": bad traces header");
  std::vector<std::string> trace_names;
  for (std::size_t i = 3; i < header.size(); ++i) {
    if (header[i].rfind("cf_", 0) != 0)
      throw ConfigError(path + ": counterfactual columns must be named cf_<direction>");
    trace_names.push_back(header[i].substr(3));
  }

  // Records were indexed against their own (sorted) name list; re-index them
  // against the trace ordering, which covers every direction.
  std::vector<int> remap(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto it = std::find(trace_names.begin(), trace_names.end(), names[i]);
    if (it == trace_names.end())
      throw ConfigError(path + ": traces lack direction '" + names[i] + "'");
    remap[i] = static_cast<int>(it - trace_names.begin());
  }
  for (PairRecord& r : records) {
    r.setting1 = remap[r.setting1];
    r.setting2 = remap[r.setting2];
  }
  names = trace_names;

  std::map<std::int64_t, PairRecord*> by_m;
  for (PairRecord& r : records) by_m[r.m] = &r;

  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    if (f.size() != 3 + trace_names.size())
      throw ConfigError(path + ": wrong field count in line '" + line + "'");
    const std::int64_t m = parse_int(f[0]);
    const auto it = by_m.find(m);
    if (it == by_m.end()) continue;  // trace for a trial not in the records file
    HiddenTrace t;
    t.family = f[1];
    for (const std::string& part : split(f[2], ';'))
      if (!trim(part).empty()) t.lambda.push_back(parse_double(part));
    for (std::size_t i = 0; i < trace_names.size(); ++i)
      t.counterfactual.push_back(parse_outcome_field(f[3 + i]));
    it->second->trace = std::move(t);
  }
}

// ---------------------------------------------------------------------------
// Summary JSON

nlohmann::ordered_json summary_json(const CountTable& table,
                                    const std::vector<std::string>& names) {
  nlohmann::ordered_json j;
  j["m_total"] = table.m_total();
  j["pairs"] = nlohmann::ordered_json::array();
  for (const auto& [key, cells] : table.all()) {
    nlohmann::ordered_json p;
    p["pair"] = names.at(key.lo) + "-" + names.at(key.hi);
    p["counts"] = {{"uu", cells.uu}, {"ud", cells.ud}, {"du", cells.du}, {"dd", cells.dd}};
    p["subtotal"] = cells.subtotal();
    if (cells.subtotal() > 0) {
      p["frequencies"] = {{"uu", *cells.f_uu()},
                          {"ud", *cells.f_ud()},
                          {"du", *cells.f_du()},
                          {"dd", *cells.f_dd()}};
      p["expectation"] = *cells.expectation();
    } else {
      p["frequencies"] = nullptr;
      p["expectation"] = nullptr;
    }
    j["pairs"].push_back(std::move(p));
  }
  return j;
}

void write_summary_json(const std::string& path, const CountTable& table,
                        const std::vector<std::string>& names) {
  write_text_file(path, summary_json(table, names).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Density / targets JSON

DensitySpec density_from_json(const nlohmann::json& j) {
  DensitySpec d;
  d.kind = j.value("kind", "");
  if (j.contains("center")) d.center = j["center"].get<std::vector<double>>();
  if (j.contains("halfwidth")) d.halfwidth = j["halfwidth"].get<double>();
  if (j.contains("weights")) d.weights = j["weights"].get<std::vector<double>>();
  if (j.contains("components"))
    for (const auto& c : j["components"]) d.components.push_back(density_from_json(c));
  return d;
}

DensitySpec load_density_file(const std::string& path) {
  return density_from_json(nlohmann::json::parse(read_text_file(path)));
}

std::map<std::pair<int, int>, std::array<double, 4>> targets_from_json(
    const nlohmann::json& j, const DirectionSet& dirs) {
  std::map<std::pair<int, int>, std::array<double, 4>> out;
  if (!j.contains("pairs") || !j["pairs"].is_array())
    throw ConfigError("targets JSON needs a 'pairs' array");
  for (const auto& entry : j["pairs"]) {
    const std::string pair = entry.at("pair").get<std::string>();
    const auto parts = split(pair, '-');
    if (parts.size() != 2) throw ConfigError("bad pair name '" + pair + "'");
    const auto i = dirs.index_of(trim(parts[0]));
    const auto k = dirs.index_of(trim(parts[1]));
    if (!i || !k) throw ConfigError("pair '" + pair + "' names an unknown direction");
    auto cells = entry.at("cells").get<std::vector<double>>();
    if (cells.size() != 4) throw ConfigError("pair '" + pair + "' needs 4 cells (uu,ud,du,dd)");
    std::array<double, 4> arr{cells[0], cells[1], cells[2], cells[3]};
    if (*i > *k) std::swap(arr[1], arr[2]);  // reorient mixed cells to canonical order
    out[{std::min(*i, *k), std::max(*i, *k)}] = arr;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config files

namespace {

Direction parse_direction_value(const std::string& v) {
  if (v.find(';') != std::string::npos) {
    const auto parts = split(v, ';');
    if (parts.size() != 3) throw ConfigError("direction vector needs 3 components: '" + v + "'");
    return Direction::spatial(parse_double(parts[0]), parse_double(parts[1]),
                              parse_double(parts[2]));
  }
  return Direction::coplanar(parse_double(v));
}

DirectionSet parse_directions(const std::string& value) {
  std::vector<std::string> names;
  std::vector<Direction> dirs;
  for (const std::string& item : split(value, ',')) {
    const std::string t = trim(item);
    if (t.empty()) continue;
    const auto colon = t.find(':');
    if (colon == std::string::npos)
      throw ConfigError("direction entry '" + t + "' must be name:angle or name:x;y;z");
    names.push_back(trim(t.substr(0, colon)));
    dirs.push_back(parse_direction_value(trim(t.substr(colon + 1))));
  }
  return DirectionSet(std::move(names), std::move(dirs));
}

std::array<double, 3> parse_point(const std::string& v) {
  const auto parts = split(v, ';');
  if (parts.size() != 3) throw ConfigError("position needs 3 components: '" + v + "'");
  return {parse_double(parts[0]), parse_double(parts[1]), parse_double(parts[2])};
}

std::pair<int, int> parse_pair_name(const std::string& item, const DirectionSet& dirs) {
  const auto parts = split(trim(item), '-');
  if (parts.size() != 2) throw ConfigError("bad pair '" + item + "', expected NAME-NAME");
  const auto i = dirs.index_of(trim(parts[0]));
  const auto j = dirs.index_of(trim(parts[1]));
  if (!i || !j) throw ConfigError("pair '" + item + "' names an unknown direction");
  return {*i, *j};
}

std::string resolve(const std::string& base_dir, const std::string& rel) {
  const std::filesystem::path p(rel);
  if (p.is_absolute() || base_dir.empty()) return rel;
  return (std::filesystem::path(base_dir) / p).string();
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& base_dir) {
  ExperimentConfig cfg;
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!kv.emplace(key, value).second) throw ConfigError("duplicate config key '" + key + "'");
  }

  if (auto it = kv.find("directions"); it != kv.end()) cfg.directions = parse_directions(it->second);

  // Source and schedule need the directions; parse the rest afterwards.
  for (const auto& [key, value] : kv) {
    if (key == "directions") continue;
    if (key == "m_total") cfg.m_total = parse_int(value);
    else if (key == "seed") cfg.seed = parse_u64(value);
    else if (key == "t_start") cfg.t_start = parse_double(value);
    else if (key == "t_end") cfg.t_end = parse_double(value);
    else if (key == "rate_hz") cfg.rate_hz = parse_double(value);
    else if (key == "poisson") cfg.poisson_emissions = parse_bool(value);
    else if (key == "cadence_s") cfg.cadence_s = parse_double(value);
    else if (key == "natural_units") cfg.natural_units = parse_bool(value);
    else if (key == "detector1") cfg.geometry.detector1 = parse_point(value);
    else if (key == "detector2") cfg.geometry.detector2 = parse_point(value);
    else if (key == "detector_distance") {
      const double d = parse_double(value);
      cfg.geometry.detector1 = {d, 0.0, 0.0};
      cfg.geometry.detector2 = {-d, 0.0, 0.0};
    } else if (key == "source") {
      const auto parts = split(value, ' ');
      const std::string kind = trim(parts[0]);
      if (kind == "qm") {
        cfg.source = QmSource{};
      } else if (kind == "deterministic_uniform") {
        cfg.source = DeterministicUniformSource{};
      } else if (kind == "stochastic") {
        if (parts.size() < 2) throw ConfigError("source = stochastic needs a density file");
        StochasticSource s;
        s.density = load_density_file(resolve(base_dir, trim(value.substr(kind.size()))));
        cfg.source = s;
      } else if (kind == "selection_correlated") {
        SelectionCorrelatedSource s;
        const std::string rest = parts.size() > 1 ? trim(value.substr(kind.size())) : "qm";
        if (rest == "qm" || rest == "uniform_model" || rest.empty()) {
          s.target_kind = rest.empty() ? "qm" : rest;
        } else {
          s.target_kind = "custom";
          s.custom_targets = targets_from_json(
              nlohmann::json::parse(read_text_file(resolve(base_dir, rest))), cfg.directions);
        }
        cfg.source = s;
      } else {
        throw ConfigError("unknown source '" + value + "'");
      }
    } else if (key == "schedule") {
      const auto parts = split(value, ' ');
      const std::string kind = trim(parts[0]);
      if (kind == "iid_random") {
        IidRandomSchedule s;
        if (parts.size() > 1) s.seed = parse_u64(parts[1]);
        cfg.schedule = s;
      } else if (kind == "periodic") {
        if (parts.size() < 2) throw ConfigError("schedule = periodic needs a pattern");
        PeriodicSchedule s;
        for (const std::string& item : split(trim(value.substr(kind.size())), ','))
          s.pattern.push_back(parse_pair_name(item, cfg.directions));
        cfg.schedule = s;
      } else if (kind == "preset") {
        if (parts.size() < 2) throw ConfigError("schedule = preset needs an assignments file");
        PresetSchedule s;
        std::istringstream lines(read_text_file(resolve(base_dir, trim(value.substr(kind.size())))));
        std::string entry;
        while (std::getline(lines, entry)) {
          entry = trim(entry);
          if (entry.empty() || entry.front() == '#') continue;
          s.assignments.push_back(parse_pair_name(entry, cfg.directions));
        }
        cfg.schedule = s;
      } else if (kind == "delayed_choice") {
        if (parts.size() < 2) throw ConfigError("schedule = delayed_choice needs a latency");
        DelayedChoiceSchedule s;
        s.latency_s = parse_double(parts[1]);
        if (parts.size() > 2) s.seed = parse_u64(parts[2]);
        cfg.schedule = s;
      } else {
        throw ConfigError("unknown schedule '" + value + "'");
      }
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  return parse_config_text(read_text_file(path),
                           std::filesystem::path(path).parent_path().string());
}

}  // namespace bellsim
