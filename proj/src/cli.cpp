#include "hirsute/cli.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "hirsute/dataset.hpp"
#include "hirsute/errors.hpp"
#include "hirsute/logging.hpp"
#include "hirsute/mask_io.hpp"
#include "hirsute/maskops.hpp"
#include "hirsute/metrics.hpp"
#include "hirsute/pairs.hpp"
#include "hirsute/protocol.hpp"
#include "hirsute/report.hpp"
#include "hirsute/scoring.hpp"
#include "hirsute/synthgen.hpp"

namespace hirsute::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(fmt::format("config line {}: expected key = value", lineno));
    }
    auto key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '-', '_');
    if (key.empty()) throw UsageError(fmt::format("config line {}: empty key", lineno));
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

namespace {

struct KeyDef {
  std::string key;
  std::string default_value;  // empty: unset
  std::string help;
};

const std::vector<KeyDef> kDataKeys = {
    {"manifest", "", "manifest CSV"},
    {"embeddings", "", "embedding matrix (FHEB)"},
    {"masks", "", "base directory for relative mask paths"},
    {"dim", "", "expected embedding dimension"},
    {"count_shadow", "false", "count shadow pixels as facial hair"},
};

const std::vector<KeyDef> kSchemeKeys = {
    {"cl_upper", "0.001", "clean-shaven upper ratio bound"},
    {"large_lower", "0.1", "fh_L1 lower ratio bound"},
    {"xlarge_lower", "0.15", "fh_L2 lower ratio bound"},
};

const std::vector<KeyDef> kScoringKeys = {
    {"tail_frac", "", "fraction of extreme scores kept exactly"},
    {"histogram_bins", "100000", "histogram bins over [-1, 1]"},
    {"block_size", "256", "tile edge of the pair loop"},
    {"workers", "", "scoring threads (default: all cores)"},
    {"cross_demographic", "false", "include cross-demographic impostor pairs"},
    {"scope", "", "comma-separated demographic tags, or 'all' to pool"},
    {"groups", "", "comma-separated pair categories"},
};

// Resolved settings: defaults, then the config file, then flags.
class Settings {
 public:
  Settings(std::string command, std::vector<KeyDef> defs)
      : command_(std::move(command)), defs_(std::move(defs)) {
    for (const auto& d : defs_) {
      if (!d.default_value.empty()) values_[d.key] = d.default_value;
    }
  }

  const std::vector<KeyDef>& defs() const { return defs_; }
  const std::string& command() const { return command_; }

  void apply_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot open config {}", path.string()));
    std::stringstream buf;
    buf << in.rdbuf();
    for (const auto& [k, v] : parse_config_text(buf.str())) {
      if (!known(k)) {
        throw UsageError(fmt::format("{}: unknown key '{}' for {}", path.string(), k,
                                     command_));
      }
      values_[k] = v;
    }
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  bool has(const std::string& key) const {
    const auto it = values_.find(key);
    return it != values_.end() && !it->second.empty();
  }

  std::string str(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end() || it->second.empty()) {
      throw UsageError(fmt::format("{}: missing --{} (or {} = ... in the config)",
                                   command_, flag(key), key));
    }
    return it->second;
  }

  fs::path path(const std::string& key) const { return fs::path(str(key)); }

  fs::path existing_path(const std::string& key) const {
    auto p = path(key);
    if (!fs::exists(p)) {
      throw DataError(fmt::format("{} not found: {}", key, p.string()));
    }
    return p;
  }

  double real(const std::string& key) const {
    const auto s = str(key);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
      throw UsageError(fmt::format("--{}: '{}' is not a number", flag(key), s));
    }
    return v;
  }

  std::uint64_t integer(const std::string& key) const {
    const auto s = str(key);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw UsageError(fmt::format("--{}: '{}' is not a non-negative integer",
                                   flag(key), s));
    }
    return v;
  }

  bool boolean(const std::string& key) const {
    auto s = str(key);
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw UsageError(fmt::format("--{}: '{}' is not a boolean", flag(key), s));
  }

  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    if (!has(key)) return out;
    std::stringstream ss(str(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item.erase(0, item.find_first_not_of(' '));
      item.erase(item.find_last_not_of(' ') + 1);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  // Every resolved setting except worker count and output path, sorted by key.
  std::string snapshot() const {
    std::string out = fmt::format("# hirsute {}\n", command_);
    for (const auto& [k, v] : values_) {
      if (k == "workers" || k == "out") continue;
      out += fmt::format("{} = {}\n", k, v);
    }
    return out;
  }

  static std::string flag(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
  }

 private:
  bool known(const std::string& key) const {
    return std::any_of(defs_.begin(), defs_.end(),
                       [&](const KeyDef& d) { return d.key == key; });
  }

  std::string command_;
  std::vector<KeyDef> defs_;
  std::map<std::string, std::string> values_;
};

std::vector<KeyDef> concat(std::initializer_list<std::vector<KeyDef>> parts) {
  std::vector<KeyDef> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw DataError(fmt::format("write failed: {}", path.string()));
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Creates the output directory, writes the config snapshot and starts the
// timestamped run log.
fs::path prepare_output(const Settings& s) {
  const auto out = s.path("out");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) {
    throw DataError(fmt::format("output directory {} is not writable{}",
                                out.string(), ec ? ": " + ec.message() : ""));
  }
  write_text(out / "config.txt", s.snapshot());
  logging::attach_file(out / "run.log");
  logging::info("hirsute {} started", s.command());
  return out;
}

RatioClassScheme scheme_from(const Settings& s) {
  RatioClassScheme sc;
  sc.cl_upper = s.real("cl_upper");
  sc.large_lower = s.real("large_lower");
  sc.xlarge_lower = s.real("xlarge_lower");
  sc.validate();
  return sc;
}

unsigned workers_from(const Settings& s) {
  if (!s.has("workers")) return std::max(1u, std::thread::hardware_concurrency());
  const auto w = s.integer("workers");
  if (w == 0 || w > 1024) throw UsageError("--workers must be in [1, 1024]");
  return static_cast<unsigned>(w);
}

ScoringOptions scoring_from(const Settings& s, double default_tail) {
  ScoringOptions o;
  o.tail_fraction = s.has("tail_frac") ? s.real("tail_frac") : default_tail;
  if (!(o.tail_fraction > 0.0 && o.tail_fraction <= 1.0)) {
    throw UsageError(fmt::format("--tail-frac {} outside (0, 1]", o.tail_fraction));
  }
  const auto bins = s.integer("histogram_bins");
  if (bins < 1 || bins > (1u << 26)) throw UsageError("--histogram-bins out of range");
  o.histogram.bins = static_cast<std::uint32_t>(bins);
  o.block_size = s.integer("block_size");
  if (o.block_size == 0) throw UsageError("--block-size must be positive");
  o.workers = workers_from(s);
  o.cross_demographic = s.boolean("cross_demographic");
  o.scheme = scheme_from(s);
  return o;
}

LoadedData load_from(const Settings& s) {
  const auto manifest = s.existing_path("manifest");
  const auto embeddings = s.existing_path("embeddings");
  std::optional<std::size_t> dim;
  if (s.has("dim")) dim = s.integer("dim");
  std::optional<fs::path> masks;
  if (s.has("masks")) masks = s.existing_path("masks");
  auto data = load_dataset(manifest, embeddings, dim, s.boolean("count_shadow"), masks);
  logging::info("loaded {} images of {} subjects", data.dataset.size(),
                data.dataset.subjects().size());
  return data;
}

// Demographic scopes to process: explicit tags, "all" for the pooled set, or
// by default every tag separately.
std::vector<std::optional<std::string>> scopes_from(const Settings& s,
                                                    const Dataset& ds) {
  std::vector<std::optional<std::string>> out;
  for (const auto& tag : s.list("scope")) {
    if (tag == "all") {
      out.emplace_back(std::nullopt);
    } else {
      if (!ds.demographics().contains(tag)) {
        throw UsageError(fmt::format("--scope: no images tagged '{}'", tag));
      }
      out.emplace_back(tag);
    }
  }
  if (out.empty()) {
    for (const auto& [tag, _] : ds.demographics()) out.emplace_back(tag);
  }
  return out;
}

std::vector<PairCategory> all_categories() {
  std::vector<PairCategory> out;
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = a; b < 4; ++b) {
      out.emplace_back(kAllRatioClasses[a], kAllRatioClasses[b]);
    }
  }
  return out;
}

std::vector<PairCategory> groups_from(const Settings& s,
                                      std::vector<PairCategory> fallback) {
  const auto names = s.list("groups");
  if (names.empty()) return fallback;
  std::vector<PairCategory> out;
  for (const auto& n : names) out.push_back(PairCategory::parse(n));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string cell_file_stem(const CellKey& key) {
  return fmt::format("{}_{}_{}", kind_name(key.kind), key.scope.value_or("all"),
                     key.category ? key.category->name() : std::string("all"));
}

std::vector<CellKey> cell_keys(const std::vector<std::optional<std::string>>& scopes,
                               const std::vector<PairCategory>& groups) {
  std::vector<CellKey> keys;
  for (const auto& scope : scopes) {
    for (const auto kind : {PairKind::kImpostor, PairKind::kGenuine}) {
      keys.push_back({kind, std::nullopt, scope});
      for (const auto& g : groups) keys.push_back({kind, g, scope});
    }
  }
  return keys;
}

// Scores per scope (each scope restricts the pair index separately).
std::vector<ScoreCell> score_scopes(const Dataset& ds, const EmbeddingStore& store,
                                    const std::vector<std::optional<std::string>>& scopes,
                                    const std::vector<PairCategory>& groups,
                                    const ScoringOptions& options) {
  std::vector<ScoreCell> cells;
  for (const auto& scope : scopes) {
    const auto keys = cell_keys({scope}, groups);
    auto part = score_pairs(ds, store, keys, options);
    for (auto& c : part) cells.push_back(std::move(c));
  }
  return cells;
}

void write_histograms(const fs::path& dir, std::span<const ScoreCell> cells) {
  fs::create_directories(dir);
  for (const auto& c : cells) {
    write_histogram_csv(c.scores, dir / (cell_file_stem(c.key) + ".csv"));
  }
}

void warn_empty_genuine(std::span<const ScoreCell> cells) {
  for (const auto& c : cells) {
    if (c.key.kind == PairKind::kGenuine && !c.key.category && c.scores.empty()) {
      logging::warn("scope {}: no genuine pairs; FNMR is undefined",
                    c.key.scope.value_or("all"));
    }
  }
}

// ---- subcommands ----------------------------------------------------------

int cmd_ingest(const Settings& s) {
  const auto data = load_from(s);
  const auto out = prepare_output(s);
  const auto scheme = scheme_from(s);
  write_manifest(data.dataset, out / "manifest.csv");
  Json summary;
  summary["images"] = data.dataset.size();
  summary["subjects"] = data.dataset.subjects().size();
  summary["embedding_dim"] = data.embeddings.dim();
  Json demos = Json::object();
  for (const auto& [tag, idx] : data.dataset.demographics()) {
    std::set<std::string> subjects;
    std::map<std::string, std::size_t> classes;
    for (const auto c : kAllRatioClasses) classes[std::string(class_name(c))] = 0;
    for (const auto i : idx) {
      const auto& r = data.dataset[i];
      subjects.insert(r.subject_id);
      for (const auto c : classify(*r.facial_hair_ratio, scheme).members()) {
        ++classes[std::string(class_name(c))];
      }
    }
    Json d;
    d["images"] = idx.size();
    d["subjects"] = subjects.size();
    d["classes"] = classes;
    demos[tag] = d;
  }
  summary["demographics"] = demos;
  write_text(out / "summary.json", summary.dump(2) + "\n");
  std::cout << fmt::format("{} images, {} subjects, {} demographic(s)\n",
                           data.dataset.size(), data.dataset.subjects().size(),
                           data.dataset.demographics().size());
  return kExitOk;
}

std::map<std::string, fs::path> mask_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw DataError(fmt::format("mask directory not found: {}", dir.string()));
  }
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".pgm") out[e.path().filename().string()] = e.path();
  }
  return out;
}

void check_matched(const std::map<std::string, fs::path>& a, const fs::path& da,
                   const std::map<std::string, fs::path>& b, const fs::path& db) {
  std::vector<std::string> missing;
  for (const auto& [name, _] : a) {
    if (!b.contains(name)) missing.push_back(fmt::format("{} (only in {})", name, da.string()));
  }
  for (const auto& [name, _] : b) {
    if (!a.contains(name)) missing.push_back(fmt::format("{} (only in {})", name, db.string()));
  }
  if (missing.empty()) return;
  for (const auto& m : missing) std::cerr << "unmatched: " << m << "\n";
  throw DataError(fmt::format("{} unmatched mask file(s)", missing.size()));
}

int cmd_mask_eval(const Settings& s) {
  const auto pred_dir = s.existing_path("pred");
  const auto gt_dir = s.existing_path("gt");
  const auto pred = mask_files(pred_dir);
  const auto gt = mask_files(gt_dir);
  check_matched(pred, pred_dir, gt, gt_dir);
  std::optional<std::map<std::string, fs::path>> gt2;
  if (s.has("gt2")) {
    const auto gt2_dir = s.existing_path("gt2");
    gt2 = mask_files(gt2_dir);
    check_matched(gt, gt_dir, *gt2, gt2_dir);
  }
  const auto cls = s.integer("class");
  if (cls != 1 && cls != 2) throw UsageError("--class must be 1 (facial hair) or 2 (shadow)");
  const auto label = static_cast<Label>(cls);
  const bool shadow = s.boolean("count_shadow");
  const auto out = prepare_output(s);

  std::vector<MaskPair> pairs;
  std::vector<report::MaskRow> rows;
  std::vector<LabelMask> first;
  std::vector<LabelMask> second;
  for (const auto& [name, p] : pred) {
    auto pm = load_mask(p);
    auto gm = load_mask(gt.at(name));
    report::MaskRow row;
    row.name = name;
    row.report = iou(pm, gm, label);
    row.gt_ratio = facial_hair_ratio(gm, shadow);
    rows.push_back(row);
    if (gt2) {
      first.push_back(gm);
      second.push_back(load_mask(gt2->at(name)));
    }
    pairs.emplace_back(std::move(pm), std::move(gm));
  }
  const auto buckets = default_ratio_buckets();
  const auto by_bucket = iou_by_ratio_bucket(pairs, buckets, label, shadow);
  write_text(out / "iou.csv", report::iou_csv(rows));
  write_text(out / "buckets.csv", report::bucket_csv(by_bucket));

  Json summary;
  summary["images"] = rows.size();
  double sum = 0.0;
  std::size_t defined = 0;
  for (const auto& r : rows) {
    if (r.report.iou) {
      sum += *r.report.iou;
      ++defined;
    }
  }
  summary["mean_iou"] = defined ? Json(sum / static_cast<double>(defined)) : Json(nullptr);
  summary["defined"] = defined;
  if (gt2) {
    const auto agree = annotator_agreement(first, second, label);
    summary["annotator_agreement"] = {
        {"intersection", agree.intersection},
        {"union", agree.union_count},
        {"iou", agree.aggregate_iou ? Json(*agree.aggregate_iou) : Json(nullptr)}};
    std::cout << fmt::format("annotator agreement IoU: {}\n",
                             agree.aggregate_iou
                                 ? fmt::format("{:.2f}%", *agree.aggregate_iou * 100.0)
                                 : "undefined");
  }
  write_text(out / "summary.json", summary.dump(2) + "\n");
  for (const auto& b : by_bucket) {
    std::cout << fmt::format("{:<14} n={:<5} mean IoU {}\n", b.bucket.label(), b.members,
                             b.mean_iou ? fmt::format("{:.2f}%", *b.mean_iou * 100.0)
                                        : "n/a");
  }
  return kExitOk;
}

int cmd_score(const Settings& s) {
  const auto data = load_from(s);
  const auto options = scoring_from(s, kDefaultTailFraction);
  const auto scopes = scopes_from(s, data.dataset);
  const auto groups = groups_from(s, all_categories());
  const auto out = prepare_output(s);
  const auto cells = score_scopes(data.dataset, data.embeddings, scopes, groups, options);
  warn_empty_genuine(cells);
  write_score_cache(cells, out / "scores.fhsc");
  write_histograms(out / "histograms", cells);
  for (const auto& c : cells) {
    if (c.key.category) continue;
    std::cout << fmt::format("{}: {} pairs\n", c.key.name(), c.scores.count());
  }
  return kExitOk;
}

double target_from(const Settings& s) {
  const double t = s.real("target_fmr");
  if (!(t > 0.0 && t < 1.0)) throw UsageError(fmt::format("--target-fmr {} outside (0, 1)", t));
  return t;
}

int cmd_calibrate(const Settings& s) {
  const auto cells = read_score_cache(s.existing_path("scores"));
  const double target = target_from(s);
  const auto out = prepare_output(s);
  std::map<std::optional<std::string>, std::vector<ScoreCell>> by_scope;
  for (const auto& c : cells) {
    if (c.key.kind == PairKind::kImpostor) by_scope[c.key.scope].push_back(c);
  }
  if (by_scope.empty()) throw DataError("score cache holds no impostor cells");
  std::vector<report::ScopedThresholds> tables;
  for (const auto& [scope, scope_cells] : by_scope) {
    tables.push_back({scope, calibrate(scope_cells, target)});
    std::cout << fmt::format("{}: global threshold {:.6f}\n", scope.value_or("all"),
                             tables.back().table.global_threshold);
  }
  write_text(out / "thresholds.json", report::thresholds_json(tables, target));
  return kExitOk;
}

int cmd_report(const Settings& s) {
  const auto cells = read_score_cache(s.existing_path("scores"));
  const auto tables = report::parse_thresholds_json(read_text(s.existing_path("thresholds")));
  const auto out = prepare_output(s);
  std::vector<CellErrors> errors;
  std::vector<report::ScopedEer> eers;
  for (const auto& t : tables) {
    std::vector<ScoreCell> scoped;
    const ScoreCell* imp = nullptr;
    const ScoreCell* gen = nullptr;
    for (const auto& c : cells) {
      if (c.key.scope != t.scope) continue;
      scoped.push_back(c);
    }
    for (const auto& c : scoped) {
      if (c.key.category) continue;
      (c.key.kind == PairKind::kImpostor ? imp : gen) = &c;
    }
    const auto e = evaluate(scoped, t.table, Exactness::kBestEffort);
    errors.insert(errors.end(), e.begin(), e.end());
    report::ScopedEer se{t.scope, std::nullopt};
    if (imp && gen && !imp->scores.empty() && !gen->scores.empty()) {
      se.eer = eer(imp->scores, gen->scores);
    }
    eers.push_back(se);
  }
  write_text(out / "errors.json", report::errors_json(errors, eers));
  for (const auto& e : errors) {
    const Rate& r = e.key.kind == PairKind::kImpostor ? e.fmr : e.fnmr;
    std::cout << fmt::format("{:<40} {} {}{}\n", e.key.name(),
                             e.key.kind == PairKind::kImpostor ? "FMR " : "FNMR",
                             r.defined ? fmt::format("{:.6g}", r.value) : "undefined",
                             r.exact || !r.defined ? "" : " (histogram estimate)");
  }
  return kExitOk;
}

int cmd_evaluate(const Settings& s) {
  const auto data = load_from(s);
  const double target = target_from(s);
  ProtocolOptions popt;
  popt.scoring = scoring_from(s, std::min(1.0, 10.0 * target));
  popt.oracle_mode = s.boolean("oracle");
  SplitPlan plan;
  plan.seed = s.integer("seed");
  plan.n_splits = s.integer("splits");
  const auto scopes = scopes_from(s, data.dataset);
  const auto groups = groups_from(s, default_protocol_groups());
  const auto out = prepare_output(s);

  std::vector<ProtocolResult> results;
  for (const auto& scope : scopes) {
    results.push_back(run_protocol(data.dataset, data.embeddings, plan, target, groups,
                                   scope, popt));
    for (const auto& split : results.back().splits) {
      if (split.test_genuine_pairs == 0) {
        logging::warn("scope {} split {}: no genuine test pairs; FNMR undefined",
                      scope.value_or("all"), split.index);
      }
    }
  }
  write_text(out / "protocol.json", report::protocol_json(results));
  write_text(out / "table3.csv", report::table3_csv(results));
  const auto text = report::table3_text(results);
  write_text(out / "table3.txt", text);

  // Score distributions over each full scope, for plotting.
  const auto cells = score_scopes(data.dataset, data.embeddings, scopes, groups, popt.scoring);
  write_histograms(out / "histograms", cells);
  std::cout << text;
  return kExitOk;
}

int cmd_synth(const Settings& s) {
  GenConfig cfg;
  cfg.n_subjects = s.integer("subjects");
  cfg.images_per_subject = s.integer("images_per_subject");
  cfg.dim = s.integer("dim");
  cfg.hair_axis_strength = s.real("beta");
  cfg.identity_spread = s.real("sigma_id");
  cfg.within_subject_noise = s.real("sigma_w");
  cfg.clean_shaven_fraction = s.real("p0");
  cfg.demographics = s.list("demographics");
  cfg.seed = s.integer("seed");
  const auto mask = s.integer("mask_size");
  cfg.mask_width = cfg.mask_height = mask;
  cfg.validate();
  const auto out = prepare_output(s);
  const auto data = generate(cfg);
  write_synthetic(data, cfg, out);
  std::cout << fmt::format("wrote {} images of {} subjects to {}\n", data.dataset.size(),
                           cfg.n_subjects, out.string());
  return kExitOk;
}

struct Command {
  std::string name;
  std::string help;
  std::vector<KeyDef> keys;
  int (*fn)(const Settings&);
};

std::vector<Command> commands() {
  const KeyDef out{"out", "", "output directory"};
  const KeyDef target{"target_fmr", "1e-4", "target false match rate"};
  return {
      {"ingest", "validate a dataset and attach mask-derived ratios",
       concat({kDataKeys, kSchemeKeys, {out}}), cmd_ingest},
      {"mask-eval", "IoU of predicted against ground-truth masks",
       {{"pred", "", "predicted mask directory"},
        {"gt", "", "ground-truth mask directory"},
        {"gt2", "", "second annotator directory"},
        {"class", "1", "label to score (1 facial hair, 2 shadow)"},
        {"count_shadow", "false", "count shadow pixels in the ratio"},
        out},
       cmd_mask_eval},
      {"score", "score genuine and impostor pairs into a cache",
       concat({kDataKeys, kSchemeKeys, kScoringKeys, {out}}), cmd_score},
      {"calibrate", "thresholds at a target FMR from a score cache",
       {{"scores", "", "score cache"}, target, out}, cmd_calibrate},
      {"evaluate", "subject-disjoint global vs adaptive threshold experiment",
       concat({kDataKeys, kSchemeKeys, kScoringKeys,
               {{"seed", "0", "split seed"},
                {"splits", "5", "number of random splits"},
                target,
                {"oracle", "false", "also fit thresholds on the test half"},
                out}}),
       cmd_evaluate},
      {"synth", "generate a synthetic dataset",
       {{"subjects", "2000", "number of subjects"},
        {"images_per_subject", "3", "images per subject"},
        {"dim", "128", "embedding dimension"},
        {"beta", "0", "hair axis strength"},
        {"sigma_id", "0.5", "identity spread"},
        {"sigma_w", "0.1", "within-subject noise"},
        {"p0", "0.5", "clean-shaven fraction"},
        {"demographics", "S", "comma-separated demographic tags"},
        {"mask_size", "0", "write square PGM masks of this size (0: none)"},
        {"seed", "0", "generator seed"},
        out},
       cmd_synth},
      {"report", "error rates of a score cache at calibrated thresholds",
       {{"scores", "", "score cache"}, {"thresholds", "", "thresholds.json"}, out},
       cmd_report},
  };
}

int run_impl(int argc, const char* const* argv) {
  logging::configure_from_env();
  CLI::App app{"Facial-hair aware face verification evaluation"};
  app.require_subcommand(1);
  const auto cmds = commands();
  struct Bound {
    CLI::App* sub = nullptr;
    std::map<std::string, std::string> flags;
    std::map<std::string, CLI::Option*> options;
    std::string config;
  };
  std::vector<Bound> bound(cmds.size());
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    auto& b = bound[i];
    b.sub = app.add_subcommand(cmds[i].name, cmds[i].help);
    b.sub->add_option("--config", b.config, "key = value settings file");
    for (const auto& k : cmds[i].keys) {
      auto help = k.help;
      if (!k.default_value.empty()) help += fmt::format(" [{}]", k.default_value);
      const auto name = "--" + Settings::flag(k.key);
      const bool is_bool = k.default_value == "true" || k.default_value == "false";
      b.options[k.key] = is_bool ? b.sub->add_flag(name + "{true}", b.flags[k.key], help)
                                 : b.sub->add_option(name, b.flags[k.key], help);
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    auto& b = bound[i];
    if (!b.sub->parsed()) continue;
    Settings settings(cmds[i].name, cmds[i].keys);
    if (!b.config.empty()) settings.apply_config(b.config);
    for (const auto& [key, opt] : b.options) {
      if (opt->count() > 0) settings.set(key, b.flags[key]);
    }
    return cmds[i].fn(settings);
  }
  return kExitUsage;
}

}  // namespace

int run(int argc, const char* const* argv) {
  int rc = kExitOk;
  try {
    rc = run_impl(argc, argv);
  } catch (const UsageError& e) {
    logging::error("{}", e.what());
    rc = kExitUsage;
  } catch (const DataError& e) {
    logging::error("{}", e.what());
    rc = kExitData;
  } catch (const CalibrationError& e) {
    logging::error("{}", e.what());
    rc = kExitCalibration;
  } catch (const std::filesystem::filesystem_error& e) {
    logging::error("{}", e.what());
    rc = kExitData;
  }
  logging::info("exit code {}", rc);
  logging::detach_file();
  return rc;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"hirsute"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace hirsute::cli
