#include "hirsute/report.hpp"

#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

#include "hirsute/errors.hpp"

namespace hirsute::report {

using Json = nlohmann::ordered_json;

namespace {

Json number_or_null(double v) {
  return std::isfinite(v) ? Json(v) : Json(nullptr);
}

Json optional_json(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? Json(*v) : Json(nullptr);
}

Json rate_json(const Rate& r, const char* name) {
  Json j;
  j[name] = r.defined ? number_or_null(r.value) : Json(nullptr);
  j["errors"] = r.errors;
  j["count"] = r.count;
  j["exact"] = r.exact;
  return j;
}

Json aggregate_json(const Aggregate& a) {
  Json j;
  j["mean"] = optional_json(a.mean);
  j["std"] = optional_json(a.std);
  j["n"] = a.n;
  return j;
}

Json inequity_json(const InequityResult& r) {
  Json j;
  j["ratio"] = optional_json(r.ratio);
  j["max_group"] = r.max_group.empty() ? Json(nullptr) : Json(r.max_group);
  j["min_group"] = r.min_group.empty() ? Json(nullptr) : Json(r.min_group);
  j["excluded_zero_fmr"] = r.excluded_zero_fmr;
  j["undefined_groups"] = r.undefined_groups;
  return j;
}

Json scope_json(const std::optional<std::string>& scope) {
  return scope ? Json(*scope) : Json(nullptr);
}

Json split_json(const ProtocolResult& result, const SplitOutcome& s) {
  Json j;
  j["index"] = s.index;
  j["validation_subjects"] = s.validation_subjects;
  j["test_subjects"] = s.test_subjects;
  j["validation_impostor_pairs"] = s.validation_impostor_pairs;
  j["test_impostor_pairs"] = s.test_impostor_pairs;
  j["test_genuine_pairs"] = s.test_genuine_pairs;
  j["global_threshold"] = s.global_threshold;
  Json modes = Json::object();
  for (const auto mode : result.modes) {
    Json m;
    Json groups = Json::object();
    for (const auto& g : result.groups) {
      Json gj;
      if (mode == ThresholdMode::kGlobal) {
        gj["threshold"] = s.global_threshold;
      } else if (mode == ThresholdMode::kAdaptive) {
        gj["threshold"] = s.adaptive_thresholds.at(g);
      } else {
        const auto it = s.oracle_thresholds.find(g);
        gj["threshold"] = it == s.oracle_thresholds.end() ? Json(nullptr) : Json(it->second);
      }
      gj["fmr"] = rate_json(s.fmr.at(mode).at(g), "fmr");
      gj["fnmr"] = rate_json(s.fnmr.at(mode).at(g), "fnmr");
      groups[g.name()] = gj;
    }
    m["groups"] = groups;
    const auto fa = s.fmr_all.find(mode);
    const auto na = s.fnmr_all.find(mode);
    if (fa != s.fmr_all.end()) {
      m["all"] = {{"fmr", rate_json(fa->second, "fmr")},
                  {"fnmr", rate_json(na->second, "fnmr")}};
    }
    m["inequity"] = inequity_json(s.inequity.at(mode));
    modes[std::string(mode_name(mode))] = m;
  }
  j["modes"] = modes;
  return j;
}

}  // namespace

std::string format_e4(double fmr) {
  if (!std::isfinite(fmr)) return "n/a";
  return fmt::format("{:.2f}", fmr * 1e4);
}

std::string format_mean_std(const Aggregate& a, double scale) {
  if (!a.mean) return "n/a";
  return fmt::format("{:.2f}±{:.2f}", *a.mean * scale, a.std.value_or(0.0) * scale);
}

std::string protocol_json(std::span<const ProtocolResult> results) {
  Json root;
  if (!results.empty()) {
    root["target_fmr"] = results.front().target_fmr;
    root["seed"] = results.front().plan.seed;
    root["n_splits"] = results.front().plan.n_splits;
  }
  Json scopes = Json::array();
  for (const auto& r : results) {
    Json sj;
    sj["scope"] = scope_json(r.scope);
    Json groups = Json::array();
    for (const auto& g : r.groups) groups.push_back(g.name());
    sj["groups"] = groups;
    Json splits = Json::array();
    for (const auto& s : r.splits) splits.push_back(split_json(r, s));
    sj["splits"] = splits;
    Json summary = Json::object();
    for (const auto mode : r.modes) {
      Json m;
      Json fmr = Json::object();
      for (const auto& g : r.groups) fmr[g.name()] = aggregate_json(r.fmr_summary.at(mode).at(g));
      m["fmr"] = fmr;
      m["ratio"] = aggregate_json(r.ratio_summary.at(mode));
      m["excluded_splits"] = r.ratio_excluded_splits.at(mode);
      summary[std::string(mode_name(mode))] = m;
    }
    sj["summary"] = summary;
    scopes.push_back(sj);
  }
  root["scopes"] = scopes;
  return root.dump(2) + "\n";
}

namespace {

std::string opt_num(const std::optional<double>& v, double scale) {
  return v ? fmt::format("{:.2f}", *v * scale) : std::string();
}

}  // namespace

std::string table3_csv(std::span<const ProtocolResult> results) {
  if (results.empty()) return "scope,mode\n";
  std::string out = "scope,mode";
  for (const auto& g : results.front().groups) {
    out += fmt::format(",{0}_fmr_e4_mean,{0}_fmr_e4_std", g.name());
  }
  out += ",ratio_mean,ratio_std,ratio_splits\n";
  for (const auto& r : results) {
    for (const auto mode : r.modes) {
      out += fmt::format("{},{}", r.scope.value_or("all"), mode_name(mode));
      for (const auto& g : r.groups) {
        const auto& a = r.fmr_summary.at(mode).at(g);
        out += fmt::format(",{},{}", opt_num(a.mean, 1e4), opt_num(a.std, 1e4));
      }
      const auto& ratio = r.ratio_summary.at(mode);
      out += fmt::format(",{},{},{}\n", opt_num(ratio.mean, 1.0),
                         opt_num(ratio.std, 1.0), ratio.n);
    }
  }
  return out;
}

std::string table3_text(std::span<const ProtocolResult> results) {
  if (results.empty()) return {};
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header = {""};
  for (const auto& g : results.front().groups) header.push_back(g.name() + " (1e-4)");
  header.push_back("max/min FMR");
  rows.push_back(header);
  for (const auto& r : results) {
    for (const auto mode : r.modes) {
      std::vector<std::string> row = {
          fmt::format("{} ({})", r.scope.value_or("all"), mode_name(mode))};
      for (const auto& g : r.groups) {
        row.push_back(format_mean_std(r.fmr_summary.at(mode).at(g), 1e4));
      }
      const auto& ratio = r.ratio_summary.at(mode);
      std::string cell = format_mean_std(ratio);
      if (ratio.mean && ratio.n != r.splits.size()) {
        cell += fmt::format(" ({} splits)", ratio.n);
      }
      row.push_back(cell);
      rows.push_back(row);
    }
  }
  // Column widths in code points; "±" is two bytes.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (const unsigned char c : s) w += (c & 0xC0) != 0x80 ? 1 : 0;
    return w;
  };
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], width(row[c]));
  }
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out += row[c];
      if (c + 1 < row.size()) out += std::string(widths[c] - width(row[c]) + 2, ' ');
    }
    out += "\n";
  }
  return out;
}

std::string thresholds_json(std::span<const ScopedThresholds> tables,
                            double target_fmr) {
  Json root;
  root["target_fmr"] = target_fmr;
  Json scopes = Json::array();
  for (const auto& t : tables) {
    Json sj;
    sj["scope"] = scope_json(t.scope);
    sj["global"] = {{"threshold", t.table.global_threshold}};
    Json cats = Json::object();
    for (const auto& [cat, thr] : t.table.per_category) {
      cats[cat.name()] = {{"threshold", thr}};
    }
    sj["categories"] = cats;
    scopes.push_back(sj);
  }
  root["scopes"] = scopes;
  return root.dump(2) + "\n";
}

std::vector<ScopedThresholds> parse_thresholds_json(const std::string& text) {
  std::vector<ScopedThresholds> out;
  try {
    const auto root = Json::parse(text);
    for (const auto& sj : root.at("scopes")) {
      ScopedThresholds t;
      if (!sj.at("scope").is_null()) t.scope = sj.at("scope").get<std::string>();
      t.table.global_threshold = sj.at("global").at("threshold").get<double>();
      for (const auto& [name, cj] : sj.at("categories").items()) {
        t.table.per_category[PairCategory::parse(name)] =
            cj.at("threshold").get<double>();
      }
      out.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("malformed thresholds file: {}", e.what()));
  } catch (const UsageError& e) {
    throw DataError(fmt::format("malformed thresholds file: {}", e.what()));
  }
  return out;
}

std::string errors_json(std::span<const CellErrors> errors,
                        std::span<const ScopedEer> eers) {
  Json root;
  Json cells = Json::array();
  for (const auto& e : errors) {
    Json cj;
    cj["cell"] = e.key.name();
    cj["kind"] = std::string(kind_name(e.key.kind));
    cj["scope"] = scope_json(e.key.scope);
    cj["category"] = e.key.category ? Json(e.key.category->name()) : Json(nullptr);
    cj["threshold"] = e.threshold;
    const Rate& r = e.key.kind == PairKind::kImpostor ? e.fmr : e.fnmr;
    const char* name = e.key.kind == PairKind::kImpostor ? "fmr" : "fnmr";
    cj[name] = r.defined ? number_or_null(r.value) : Json(nullptr);
    cj["errors"] = r.errors;
    cj["count"] = r.count;
    cj["exact"] = r.exact;
    cells.push_back(cj);
  }
  root["cells"] = cells;
  Json ej = Json::array();
  for (const auto& e : eers) {
    Json j;
    j["scope"] = scope_json(e.scope);
    if (e.eer) {
      j["eer"] = e.eer->rate;
      j["threshold"] = e.eer->threshold;
      j["fmr"] = e.eer->fmr;
      j["fnmr"] = e.eer->fnmr;
      j["uncertainty"] = e.eer->uncertainty;
      j["separated"] = e.eer->separated;
      j["exact"] = e.eer->exact;
    } else {
      j["eer"] = nullptr;
    }
    ej.push_back(j);
  }
  root["eer"] = ej;
  return root.dump(2) + "\n";
}

std::string iou_csv(std::span<const MaskRow> rows) {
  std::string out = "name,gt_ratio,intersection,union,iou\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{:.6f},{},{},{}\n", r.name, r.gt_ratio,
                       r.report.intersection, r.report.union_count,
                       r.report.iou ? fmt::format("{:.6f}", *r.report.iou) : "");
  }
  return out;
}

std::string bucket_csv(std::span<const BucketIoU> buckets) {
  std::string out = "bucket,members,defined,mean_iou,intersection,union\n";
  for (const auto& b : buckets) {
    out += fmt::format("\"{}\",{},{},{},{},{}\n", b.bucket.label(), b.members,
                       b.defined,
                       b.mean_iou ? fmt::format("{:.6f}", *b.mean_iou) : "",
                       b.intersection, b.union_count);
  }
  return out;
}

}  // namespace hirsute::report
