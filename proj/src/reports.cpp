#include <cstdio>
#include <ostream>

#include "fewshot/inference.hpp"

namespace fewshot {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_eval_text(std::ostream& out, const EvalReport& report) {
  for (const auto& r : report.rows) {
    const std::string key = r.method + "." + r.split;
    out << key << ".count=" << r.top1.count << '\n';
    out << key << ".top1=" << fmt17(r.top1.accuracy()) << '\n';
    if (r.top5) out << key << ".top5=" << fmt17(r.top5->accuracy()) << '\n';
  }
}

void write_eval_records(std::ostream& out, const EvalReport& report) {
  out << "metric,split,value\n";
  for (const auto& r : report.rows) {
    out << r.method << "_top1," << r.split << ',' << fmt17(r.top1.accuracy()) << '\n';
    if (r.top5) out << r.method << "_top5," << r.split << ',' << fmt17(r.top5->accuracy()) << '\n';
    out << r.method << "_count," << r.split << ',' << r.top1.count << '\n';
  }
}

void write_episode_text(std::ostream& out, const EpisodeReport& report) {
  out << "n_way=" << report.n_way << '\n'
      << "k_shot=" << report.k_shot << '\n'
      << "n_episodes=" << report.n_episodes << '\n'
      << "mean=" << fmt17(report.mean) << '\n'
      << "ci95=" << fmt17(report.ci95) << '\n';
}

void write_episode_records(std::ostream& out, const EpisodeReport& report) {
  const std::string split = std::to_string(report.n_way) + "way_" + std::to_string(report.k_shot) + "shot";
  out << "metric,split,value\n";
  out << "episode_mean," << split << ',' << fmt17(report.mean) << '\n';
  out << "episode_ci95," << split << ',' << fmt17(report.ci95) << '\n';
  for (std::size_t e = 0; e < report.accuracies.size(); ++e) {
    out << "episode_" << e << ',' << split << ',' << fmt17(report.accuracies[e]) << '\n';
  }
}

std::string episode_summary(const EpisodeReport& report) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f ± %.4f", report.mean, report.ci95);
  return buf;
}

}  // namespace fewshot
