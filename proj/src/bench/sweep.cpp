#include "diffpush/bench/sweep.hpp"

#include <cstdio>
#include <ostream>

#include "diffpush/errors.hpp"

namespace diffpush::bench {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "guidance_w" || name == "w") return SweepAxis::guidance_w;
  if (name == "tau") return SweepAxis::tau;
  if (name == "lambda") return SweepAxis::lambda;
  if (name == "p" || name == "P") return SweepAxis::p;
  throw ConfigError("unknown sweep axis '" + name + "'");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::guidance_w: return "guidance_w";
    case SweepAxis::tau: return "tau";
    case SweepAxis::lambda: return "lambda";
    case SweepAxis::p: return "p";
  }
  return "?";
}

std::vector<SweepPoint> run_sweep(const ExperimentConfig& config, const ModelBundle& models,
                                  const MethodSpec& base, SweepAxis axis,
                                  const std::vector<double>& values, std::size_t workers,
                                  std::vector<EpisodeResult>* episodes) {
  if (values.empty()) {
    throw ConfigError("sweep needs at least one value");
  }
  ExperimentConfig cfg = config;
  std::vector<MethodSpec> methods;
  if (axis == SweepAxis::p) {
    cfg.evaluation.p_values = values;
    methods.push_back(base);
  } else {
    for (double v : values) {
      MethodSpec m = base;
      m.name = base.name + "@" + to_string(axis) + "=" + short_fmt(v);
      if (axis == SweepAxis::guidance_w) {
        m.guidance.w = v;
        m.guidance.validate();
      } else if (axis == SweepAxis::tau) {
        m.executor.tau = v;
        m.executor.validate();
      } else {
        m.executor.lambda = v;
        m.executor.validate();
      }
      methods.push_back(m);
    }
  }
  auto eps = run_evaluation(cfg, models, methods, workers);
  const ResultTable table = aggregate(eps);
  std::vector<SweepPoint> out;
  if (axis == SweepAxis::p) {
    for (double v : values) {
      out.push_back({v, v, table.at(base.name, v)});
    }
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) {
      for (double p : cfg.evaluation.p_values) {
        out.push_back({values[i], p, table.at(methods[i].name, p)});
      }
    }
  }
  if (episodes) {
    *episodes = std::move(eps);
  }
  return out;
}

void write_sweep_csv(std::ostream& out, SweepAxis axis, const std::vector<SweepPoint>& points,
                     std::uint64_t config_hash) {
  out << "# config_hash=" << hex_hash(config_hash) << "\n";
  out << to_string(axis) << ",p,mean,std,success_mean,success_std\n";
  for (const auto& pt : points) {
    out << fmt(pt.value) << "," << fmt(pt.p) << "," << fmt(pt.row.coverage_mean) << ","
        << fmt(pt.row.coverage_std) << "," << fmt(pt.row.success_mean) << ","
        << fmt(pt.row.success_std) << "\n";
  }
}

double best_value(const std::vector<SweepPoint>& points, double p) {
  const SweepPoint* best = nullptr;
  for (const auto& pt : points) {
    if (pt.p == p && (!best || pt.row.coverage_mean > best->row.coverage_mean)) {
      best = &pt;
    }
  }
  if (!best) {
    throw ConfigError("no sweep point at P=" + fmt(p));
  }
  return best->value;
}

}  // namespace diffpush::bench
