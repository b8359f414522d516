#pragma once

// Experiment metrics: per-run rows plus (mean, std) aggregates, emitted as
// JSON and CSV with identical number formatting.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

namespace setemb {

struct MetricRow {
  std::string dataset;
  double fraction;
  long long seed;
  std::string metric;
  double value;
};

struct MetricAggregate {
  std::string dataset;
  double fraction;
  std::string metric;
  double mean;
  double std_dev;  // unbiased (n-1); defined as 0 for n = 1
  int n;
};

struct MetricsReport {
  std::vector<MetricRow> rows;

  void add(const std::string& dataset, double fraction, long long seed,
           const std::string& metric, double value) {
    rows.push_back({dataset, fraction, seed, metric, value});
  }

  std::vector<MetricAggregate> aggregates() const {
    std::map<std::tuple<std::string, double, std::string>, std::vector<double>>
        groups;
    for (const auto& r : rows)
      groups[{r.dataset, r.fraction, r.metric}].push_back(r.value);
    std::vector<MetricAggregate> out;
    for (const auto& [key, vals] : groups) {
      MetricAggregate a;
      a.dataset = std::get<0>(key);
      a.fraction = std::get<1>(key);
      a.metric = std::get<2>(key);
      a.n = static_cast<int>(vals.size());
      double sum = 0.0;
      for (double v : vals) sum += v;
      a.mean = sum / a.n;
      double sq = 0.0;
      for (double v : vals) sq += (v - a.mean) * (v - a.mean);
      a.std_dev = a.n > 1 ? std::sqrt(sq / (a.n - 1)) : 0.0;
      out.push_back(std::move(a));
    }
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    auto jr = nlohmann::json::array();
    for (const auto& r : rows) {
      nlohmann::json e;
      e["dataset"] = r.dataset;
      e["fraction"] = r.fraction;
      e["seed"] = r.seed;
      e["metric"] = r.metric;
      e["value"] = r.value;
      jr.push_back(std::move(e));
    }
    j["rows"] = std::move(jr);
    auto ja = nlohmann::json::array();
    for (const auto& a : aggregates()) {
      nlohmann::json e;
      e["dataset"] = a.dataset;
      e["fraction"] = a.fraction;
      e["metric"] = a.metric;
      e["mean"] = a.mean;
      e["std"] = a.std_dev;
      e["n"] = a.n;
      ja.push_back(std::move(e));
    }
    j["aggregates"] = std::move(ja);
    return j;
  }

  // number formatting goes through nlohmann so CSV and JSON match exactly
  std::string to_csv() const {
    auto num = [](double v) { return nlohmann::json(v).dump(); };
    std::string out = "dataset,fraction,seed,metric,value\n";
    for (const auto& r : rows) {
      out += r.dataset + "," + num(r.fraction) + "," + std::to_string(r.seed) +
             "," + r.metric + "," + num(r.value) + "\n";
    }
    return out;
  }
};

}  // namespace setemb
