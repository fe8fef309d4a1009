#include "gradroute/router.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <iostream>
#include <string>
#include <vector>

#include "gradroute/error.hpp"

namespace gradroute {

namespace {

// Shortest text that parses back to the same double.
std::string format_fraction(double q) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, q);
  return std::string(buf, res.ptr);
}

void warn_if_one_sided(Partition& p) {
  if (p.sft_ids.empty() || p.rl_ids.empty()) {
    p.degenerate = true;
    p.warnings.push_back(std::string("degenerate partition: every trajectory routed to ") +
                         (p.rl_ids.empty() ? "SFT" : "RL") + " (uninformative scores)");
    std::cerr << "warning: " << p.warnings.back() << '\n';
  }
}

}  // namespace

std::string RoutingRule::to_string() const {
  std::string base = kind == Kind::median ? "median" : "quantile(" + format_fraction(rl_fraction) + ")";
  return inverted ? "inverse-of(" + base + ")" : base;
}

RoutingRule RoutingRule::parse(const std::string& text) {
  RoutingRule rule;
  std::string body = text;
  const std::string inv = "inverse-of(";
  if (body.rfind(inv, 0) == 0) {
    if (body.back() != ')') throw ParameterError("malformed routing rule '" + text + "'");
    rule = parse(body.substr(inv.size(), body.size() - inv.size() - 1));
    rule.inverted = !rule.inverted;
    return rule;
  }
  if (body == "median") return rule;
  const std::string quant = "quantile(";
  if (body.rfind(quant, 0) == 0 && body.back() == ')') {
    const std::string number = body.substr(quant.size(), body.size() - quant.size() - 1);
    char* end = nullptr;
    const double q = std::strtod(number.c_str(), &end);
    if (end == number.c_str() || *end != '\0' || !(q > 0.0 && q < 1.0)) {
      throw ParameterError("malformed quantile fraction in rule '" + text + "'");
    }
    rule.kind = Kind::quantile;
    rule.rl_fraction = q;
    return rule;
  }
  throw ParameterError("unknown routing rule '" + text + "'");
}

Partition median_split(const ScoreSet& scores) {
  if (scores.empty()) throw EmptyCorpusError("median_split needs at least one score");
  std::vector<double> values;
  values.reserve(scores.size());
  for (const auto& [id, e] : scores.entries) values.push_back(e.value);
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  const double median = n % 2 == 1 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;

  Partition p;
  p.threshold = median;
  p.rule = RoutingRule{};
  p.metric_name = std::string(metric_name(scores.metric));
  for (const auto& [id, e] : scores.entries) {
    if (e.value <= median) {
      p.sft_ids.insert(id);
    } else {
      p.rl_ids.insert(id);
    }
  }
  warn_if_one_sided(p);
  return p;
}

std::size_t rl_count_for_fraction(double rl_fraction, std::size_t n) {
  if (!(rl_fraction > 0.0 && rl_fraction < 1.0)) {
    throw ParameterError("rl_fraction must lie in (0, 1), got " + format_fraction(rl_fraction));
  }
  // The slack absorbs representation error such as 0.7 * 100 = 70.00000000000001.
  const double raw = rl_fraction * static_cast<double>(n);
  const double k = std::ceil(raw - 1e-9 * std::max(1.0, raw));
  return std::min(n, static_cast<std::size_t>(std::max(1.0, k)));
}

Partition quantile_split(const ScoreSet& scores, double rl_fraction) {
  const std::size_t k = rl_count_for_fraction(rl_fraction, scores.size());
  if (scores.empty()) throw EmptyCorpusError("quantile_split needs at least one score");

  std::vector<std::pair<double, const std::string*>> order;
  order.reserve(scores.size());
  for (const auto& [id, e] : scores.entries) order.emplace_back(e.value, &id);
  // Highest score first; equal scores by ascending id.
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  Partition p;
  p.rule.kind = RoutingRule::Kind::quantile;
  p.rule.rl_fraction = rl_fraction;
  p.metric_name = std::string(metric_name(scores.metric));
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < k ? p.rl_ids : p.sft_ids).insert(*order[i].second);
  }
  p.threshold = order[k - 1].first;
  warn_if_one_sided(p);
  return p;
}

Partition inverse_partition(const Partition& p) {
  Partition out = p;
  std::swap(out.sft_ids, out.rl_ids);
  out.rule.inverted = !p.rule.inverted;
  return out;
}

void check_partition_covers(const Partition& p, const ScoreSet& scores) {
  for (const auto& id : p.sft_ids) {
    if (p.rl_ids.count(id)) throw ConsistencyError("id '" + id + "' is in both SFT and RL");
  }
  if (p.size() != scores.size()) {
    throw ConsistencyError("partition covers " + std::to_string(p.size()) + " ids, scores have " +
                           std::to_string(scores.size()));
  }
  for (const auto& [id, e] : scores.entries) {
    if (!p.sft_ids.count(id) && !p.rl_ids.count(id)) {
      throw ConsistencyError("scored id '" + id + "' is missing from the partition");
    }
  }
}

}  // namespace gradroute
