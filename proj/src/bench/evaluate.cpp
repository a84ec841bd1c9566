#include "diffpush/bench/evaluate.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "diffpush/errors.hpp"

namespace diffpush::bench {

namespace {

struct Slot {
  std::size_t episode;
  env::PushEnv env;
  env::ObservationWindow window;
  executor::Executor exec;
  Rng policy, weak, guidance;
  int side;
  std::vector<Chunk> strong_out, weak_out;
  bool active = true;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) {
    s += x;
  }
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) {
    return 0.0;
  }
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) {
    s += (x - m) * (x - m);
  }
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

const ResultRow& ResultTable::at(const std::string& method, double p) const {
  for (const auto& r : rows) {
    if (r.method == method && r.p == p) {
      return r;
    }
  }
  throw ConfigError("no result row for method '" + method + "' at P=" + short_num(p));
}

ResultTable aggregate(const std::vector<EpisodeResult>& episodes) {
  struct SeedAcc {
    std::uint64_t seed;
    std::vector<const EpisodeResult*> eps;
  };
  struct Group {
    std::string method;
    double p;
    std::vector<SeedAcc> seeds;
  };
  std::vector<Group> groups;
  for (const auto& e : episodes) {
    Group* g = nullptr;
    for (auto& cand : groups) {
      if (cand.method == e.method && cand.p == e.p) {
        g = &cand;
        break;
      }
    }
    if (!g) {
      groups.push_back({e.method, e.p, {}});
      g = &groups.back();
    }
    SeedAcc* s = nullptr;
    for (auto& cand : g->seeds) {
      if (cand.seed == e.seed) {
        s = &cand;
        break;
      }
    }
    if (!s) {
      g->seeds.push_back({e.seed, {}});
      s = &g->seeds.back();
    }
    s->eps.push_back(&e);
  }
  ResultTable table;
  for (const auto& g : groups) {
    ResultRow row;
    row.method = g.method;
    row.p = g.p;
    std::vector<double> cov, succ;
    double inv = 0.0, steps = 0.0, replan = 0.0;
    for (const auto& s : g.seeds) {
      double c = 0.0, k = 0.0;
      for (const auto* e : s.eps) {
        c += e->coverage;
        k += e->success ? 1.0 : 0.0;
        inv += static_cast<double>(e->invocations);
        steps += static_cast<double>(e->steps);
        replan += e->replan_fraction;
        ++row.episodes;
      }
      cov.push_back(c / static_cast<double>(s.eps.size()));
      succ.push_back(k / static_cast<double>(s.eps.size()));
    }
    row.seeds = g.seeds.size();
    row.coverage_mean = mean_of(cov);
    row.coverage_std = sample_std(cov);
    row.success_mean = mean_of(succ);
    row.success_std = sample_std(succ);
    const double n = static_cast<double>(row.episodes);
    row.invocations_mean = inv / n;
    row.steps_mean = steps / n;
    row.replan_mean = replan / n;
    table.rows.push_back(row);
  }
  return table;
}

EpisodeSeeds episode_seeds(std::uint64_t eval_seed, std::size_t episode) {
  const std::uint64_t base = derive_seed(derive_seed(eval_seed, "evaluation"), episode);
  return {derive_seed(base, "env"), derive_seed(base, "policy"),
          derive_seed(base, "weak_policy"), derive_seed(base, "guidance")};
}

std::vector<EpisodeResult> run_cell(const ExperimentConfig& config, const ModelBundle& models,
                                    const CellSpec& cell, const TraceSink& trace,
                                    CellCounters* counters) {
  const MethodSpec& m = cell.method;
  std::unique_ptr<BatchPolicy> strong, weak;
  if (m.policy == PolicyKind::expert) {
    strong = std::make_unique<ExpertPolicy>(config.model.horizon);
    weak = std::make_unique<ExpertPolicy>(config.model.horizon);
  } else {
    const auto& main = m.policy == PolicyKind::weak ? models.weak : models.strong;
    strong = std::make_unique<DiffusionPolicy>(main, &models.weak, models.stats,
                                               models.schedule, m.guidance, m.solver,
                                               m.inference_steps, config.diffusion.clip_x0);
    if (m.executor.mode == executor::ExecMode::bid) {
      weak = std::make_unique<DiffusionPolicy>(models.weak, nullptr, models.stats,
                                               models.schedule, guidance::GuidanceSpec{},
                                               m.solver, m.inference_steps,
                                               config.diffusion.clip_x0);
    }
  }
  const env::PerturbationConfig pert{cell.p, config.perturbation};

  std::vector<Slot> slots;
  slots.reserve(cell.num_episodes);
  for (std::size_t i = 0; i < cell.num_episodes; ++i) {
    const std::size_t ep = cell.first_episode + i;
    const EpisodeSeeds s = episode_seeds(cell.seed, ep);
    slots.push_back(Slot{ep,
                         env::PushEnv(config.env, pert, s.env),
                         env::ObservationWindow(config.model.history_len, strong->max_lag()),
                         executor::Executor(m.executor),
                         Rng(s.policy),
                         Rng(s.weak_policy),
                         Rng(s.guidance),
                         env::demo_episode_side(s.env),
                         {},
                         {}});
    slots.back().window.push(slots.back().env.observe());
  }

  std::vector<EpisodeResult> results(cell.num_episodes);
  std::size_t active = cell.num_episodes;
  std::vector<SampleRequest> strong_reqs, weak_reqs;
  while (active > 0) {
    strong_reqs.clear();
    weak_reqs.clear();
    for (auto& s : slots) {
      if (!s.active) {
        continue;
      }
      const auto need = s.exec.request();
      s.strong_out.clear();
      s.weak_out.clear();
      if (need.strong > 0) {
        strong_reqs.push_back({&s.window, &s.env, s.side, &s.policy, &s.guidance,
                               need.strong, &s.strong_out});
      }
      if (need.weak > 0) {
        if (!weak) {
          throw ConfigError("method '" + m.name + "' needs a weak policy");
        }
        weak_reqs.push_back({&s.window, &s.env, s.side, &s.weak, &s.guidance, need.weak,
                             &s.weak_out});
      }
    }
    strong->sample(strong_reqs);
    if (weak && !weak_reqs.empty()) {
      weak->sample(weak_reqs);
    }
    for (std::size_t i = 0; i < slots.size(); ++i) {
      Slot& s = slots[i];
      if (!s.active) {
        continue;
      }
      const std::size_t step = s.env.state().step;
      const auto out = s.exec.step(s.strong_out, s.weak_out);
      const auto r = s.env.step({out.action[0], out.action[1]});
      s.window.push(s.env.observe());
      if (trace) {
        trace(s.episode, {step, out.replanned, out.similarity, out.action});
      }
      if (r.done) {
        s.active = false;
        --active;
        EpisodeResult& e = results[i];
        e.method = m.name;
        e.p = cell.p;
        e.seed = cell.seed;
        e.episode = s.episode;
        e.success = s.env.success();
        e.coverage = s.env.coverage();
        e.steps = s.env.state().step;
        e.replan_fraction =
            static_cast<double>(s.exec.replans()) / static_cast<double>(s.exec.steps());
        e.invocations = s.exec.strong_samples() + s.exec.weak_samples();
      }
    }
  }
  if (counters) {
    *counters = {};
    for (const auto* p : {strong.get(), weak.get()}) {
      if (const auto* d = dynamic_cast<const DiffusionPolicy*>(p)) {
        counters->predictor_calls += d->model_calls();
        counters->predictor_rows += d->model_rows();
      }
    }
  }
  return results;
}

std::size_t worker_count() {
  if (const char* v = std::getenv("DIFFPUSH_WORKERS")) {
    const long n = std::strtol(v, nullptr, 10);
    if (n > 0) {
      return static_cast<std::size_t>(n);
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<EpisodeResult> run_evaluation(const ExperimentConfig& config,
                                          const ModelBundle& models,
                                          const std::vector<MethodSpec>& methods,
                                          std::size_t workers,
                                          const std::function<void(const std::string&)>& log) {
  std::vector<CellSpec> cells;
  for (const auto& m : methods) {
    for (double p : config.evaluation.p_values) {
      for (auto seed : config.evaluation.seeds) {
        cells.push_back({m, p, seed, 0, config.evaluation.num_episodes});
      }
    }
  }
  std::vector<std::vector<EpisodeResult>> out(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  std::exception_ptr error;
  auto work = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        out[i] = run_cell(config, models, cells[i]);
      } catch (...) {
        std::lock_guard lock(log_mutex);
        if (!error) {
          error = std::current_exception();
        }
        return;
      }
      if (log) {
        const auto row = aggregate(out[i]).rows.at(0);
        std::lock_guard lock(log_mutex);
        log(cells[i].method.name + " P=" + short_num(cells[i].p) + " seed=" +
            std::to_string(cells[i].seed) + " coverage=" + fixed(row.coverage_mean, 3) +
            " success=" + fixed(row.success_mean, 3));
      }
    }
  };
  const std::size_t n = std::min(std::max<std::size_t>(workers, 1), cells.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) {
    pool.emplace_back(work);
  }
  work();
  for (auto& t : pool) {
    t.join();
  }
  if (error) {
    std::rethrow_exception(error);
  }
  std::vector<EpisodeResult> all;
  for (auto& v : out) {
    all.insert(all.end(), v.begin(), v.end());
  }
  return all;
}

void write_episodes_csv(std::ostream& out, const std::vector<EpisodeResult>& episodes,
                        std::uint64_t config_hash) {
  out << "# config_hash=" << hex_hash(config_hash) << "\n";
  out << "method,p,seed,episode,success,coverage,steps,replan_fraction,invocations\n";
  for (const auto& e : episodes) {
    out << e.method << "," << fmt(e.p) << "," << e.seed << "," << e.episode << ","
        << (e.success ? 1 : 0) << "," << fmt(e.coverage) << "," << e.steps << ","
        << fmt(e.replan_fraction) << "," << e.invocations << "\n";
  }
}

std::vector<EpisodeResult> read_episodes_csv(std::istream& in) {
  std::vector<EpisodeResult> out;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') {
      continue;
    }
    if (!header) {
      header = true;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 9) {
      throw FormatError("episode CSV row has " + std::to_string(f.size()) + " fields");
    }
    EpisodeResult e;
    e.method = f[0];
    e.p = std::stod(f[1]);
    e.seed = std::stoull(f[2]);
    e.episode = std::stoull(f[3]);
    e.success = f[4] == "1";
    e.coverage = std::stod(f[5]);
    e.steps = std::stoull(f[6]);
    e.replan_fraction = std::stod(f[7]);
    e.invocations = std::stoull(f[8]);
    out.push_back(e);
  }
  return out;
}

void write_table_csv(std::ostream& out, const ResultTable& table, std::uint64_t config_hash) {
  out << "# config_hash=" << hex_hash(config_hash) << "\n";
  out << "method,p,coverage_mean,coverage_std,success_mean,success_std,invocations_mean,"
         "steps_mean,replan_mean,seeds,episodes\n";
  for (const auto& r : table.rows) {
    out << r.method << "," << fmt(r.p) << "," << fmt(r.coverage_mean) << ","
        << fmt(r.coverage_std) << "," << fmt(r.success_mean) << "," << fmt(r.success_std)
        << "," << fmt(r.invocations_mean) << "," << fmt(r.steps_mean) << ","
        << fmt(r.replan_mean) << "," << r.seeds << "," << r.episodes << "\n";
  }
}

void write_table_markdown(std::ostream& out, const ResultTable& table,
                          std::uint64_t config_hash) {
  out << "<!-- config_hash=" << hex_hash(config_hash) << " -->\n";
  out << "| method | P | coverage | success | calls/episode | steps | replan |\n";
  out << "|---|---|---|---|---|---|---|\n";
  for (const auto& r : table.rows) {
    out << "| " << r.method << " | " << short_num(r.p) << " | " << fixed(r.coverage_mean, 3)
        << " ± " << fixed(r.coverage_std, 3) << " | " << fixed(r.success_mean, 3) << " ± "
        << fixed(r.success_std, 3) << " | " << fixed(r.invocations_mean, 1) << " | "
        << fixed(r.steps_mean, 1) << " | " << fixed(r.replan_mean, 3) << " |\n";
  }
}

std::vector<ThresholdOutcome> check_thresholds(const ResultTable& table,
                                               const std::vector<Threshold>& thresholds) {
  std::vector<ThresholdOutcome> out;
  for (const auto& t : thresholds) {
    const auto& row = table.at(t.method, t.p);
    const double v = t.metric == "success" ? row.success_mean : row.coverage_mean;
    const bool pass = (!t.min || v >= *t.min) && (!t.max || v <= *t.max);
    out.push_back({t, v, pass});
  }
  return out;
}

}  // namespace diffpush::bench
