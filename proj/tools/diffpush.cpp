#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "diffpush/bench/charts.hpp"
#include "diffpush/bench/config.hpp"
#include "diffpush/bench/evaluate.hpp"
#include "diffpush/bench/sweep.hpp"
#include "diffpush/bench/train.hpp"
#include "diffpush/binary_io.hpp"
#include "diffpush/env/dataset.hpp"
#include "diffpush/errors.hpp"

namespace fs = std::filesystem;
using namespace diffpush;
using namespace diffpush::bench;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
};

// "a.b.c=value" with value parsed as JSON, falling back to a string.
void apply_override(Json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw UsageError("override '" + assignment + "' is not key.path=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) {
    value = text;
  }
  std::string pointer = "/" + path;
  for (auto& c : pointer) {
    if (c == '.') c = '/';
  }
  j[Json::json_pointer(pointer)] = value;
}

ExperimentConfig load_config(const Common& c) {
  Json j = c.config_path.empty() ? ExperimentConfig{}.to_json()
                                 : Json::parse(binary::read_file(c.config_path));
  for (const auto& o : c.overrides) {
    apply_override(j, o);
  }
  auto config = ExperimentConfig::from_json(j);
  config.validate();
  return config;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "experiment config JSON");
  cmd->add_option("-s,--set", c.overrides, "override a config field, e.g. training.steps=500");
}

void write_text(const fs::path& path, const std::string& text) {
  binary::write_file(path.string(), text);
}

void persist_config(const fs::path& dir, const ExperimentConfig& config) {
  fs::create_directories(dir);
  write_text(dir / "config.json", config.to_json().dump(2) + "\n");
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

MethodSpec pick_method(const ExperimentConfig& config, const std::string& name) {
  const auto methods = config.resolve_methods();
  if (name.empty()) {
    return methods.front();
  }
  for (const auto& m : methods) {
    if (m.name == name) {
      return m;
    }
  }
  throw ConfigError("no method named '" + name + "' in the config");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion-policy push benchmark"};
  app.require_subcommand(1);

  Common gen_c, train_c, eval_c, sweep_c, trace_c;
  std::string demos_out = "demos.bin";
  auto* gen = app.add_subcommand("gen-data", "roll the expert and write demonstrations");
  add_common(gen, gen_c);
  gen->add_option("-o,--out", demos_out, "demonstration file");

  std::string train_demos = "demos.bin", models_dir = "models";
  auto* train = app.add_subcommand("train", "train the final and weak checkpoints");
  add_common(train, train_c);
  train->add_option("-d,--demos", train_demos, "demonstration file");
  train->add_option("-o,--out", models_dir, "model directory");

  std::string eval_models = "models", results_dir = "results";
  auto* eval = app.add_subcommand("eval", "evaluate every configured method");
  add_common(eval, eval_c);
  eval->add_option("-m,--models", eval_models, "model directory");
  eval->add_option("-o,--out", results_dir, "results directory");

  std::string sweep_models = "models", sweep_out = "sweep", sweep_axis = "guidance_w",
              sweep_method;
  std::vector<double> sweep_values;
  auto* sweep = app.add_subcommand("sweep", "one-dimensional sweep of a method parameter");
  add_common(sweep, sweep_c);
  sweep->add_option("-m,--models", sweep_models, "model directory");
  sweep->add_option("-o,--out", sweep_out, "output directory");
  sweep->add_option("-a,--axis", sweep_axis, "guidance_w | tau | lambda | p");
  sweep->add_option("-v,--values", sweep_values, "axis values")->required();
  sweep->add_option("--method", sweep_method, "base method name (default: first)");

  std::string trace_models = "models", trace_out = "trace.csv", trace_method;
  double trace_p = 0.0;
  std::uint64_t trace_seed = 0;
  std::size_t trace_episode = 0;
  auto* trace = app.add_subcommand("trace", "per-step similarity log of one episode");
  add_common(trace, trace_c);
  trace->add_option("-m,--models", trace_models, "model directory");
  trace->add_option("-o,--out", trace_out, "trace CSV");
  trace->add_option("--method", trace_method, "method name (default: first)");
  trace->add_option("-p,--p", trace_p, "perturbation level");
  trace->add_option("--seed", trace_seed, "evaluation seed");
  trace->add_option("--episode", trace_episode, "episode index");

  CLI11_PARSE(app, argc, argv);

  auto log = [](const std::string& s) { std::cerr << s << std::endl; };
  try {
    if (*gen) {
      const auto config = load_config(gen_c);
      auto demos = env::generate_dataset(config.dataset, config.env);
      demos.config_hash = config.hash();
      env::save_demos(demos_out, demos);
      std::cout << "wrote " << demos.episodes.size() << " episodes to " << demos_out << "\n";
      return 0;
    }
    if (*train) {
      const auto config = load_config(train_c);
      const auto demos = env::load_demos(train_demos);
      const auto result = train_models(config, demos, [](const LossPoint& p) {
        std::fprintf(stderr, "step %zu lr %.3g train %.5f held %.5f\n", p.step, p.lr,
                     p.train_loss, p.held_loss);
      });
      save_models(models_dir, config, result, demos.stats);
      std::printf("initial held loss %.6f final %.6f ratio %.4f\n", result.initial_loss,
                  result.final_loss, result.final_loss / result.initial_loss);
      return 0;
    }
    if (*eval) {
      const auto config = load_config(eval_c);
      const auto models = load_models(eval_models, config);
      const auto methods = config.resolve_methods();
      const auto episodes = run_evaluation(config, models, methods, worker_count(), log);
      const auto table = aggregate(episodes);
      const auto h = config.hash();
      const fs::path dir(results_dir);
      persist_config(dir, config);
      {
        std::ofstream f(dir / "episodes.csv");
        write_episodes_csv(f, episodes, h);
        std::ofstream t(dir / "table.csv");
        write_table_csv(t, table, h);
        std::ofstream m(dir / "table.md");
        write_table_markdown(m, table, h);
      }
      write_text(dir / "coverage.svg", bar_chart_svg(table, "Coverage by method and P", h));
      write_table_markdown(std::cout, table, h);
      if (config.evaluation.write_traces) {
        for (const auto& m : methods) {
          for (double p : config.evaluation.p_values) {
            std::vector<executor::TraceRow> rows;
            run_cell(config, models, {m, p, config.evaluation.seeds.front(), 0, 1},
                     [&](std::size_t, const executor::TraceRow& r) { rows.push_back(r); });
            std::ofstream f(dir / ("trace_" + m.name + "_p" + short_num(p) + ".csv"));
            executor::write_trace_csv(f, rows, h);
          }
        }
      }
      bool ok = true;
      for (const auto& t : check_thresholds(table, config.evaluation.thresholds)) {
        std::printf("%s %s P=%g %s=%.4f\n", t.pass ? "PASS" : "FAIL",
                    t.threshold.method.c_str(), t.threshold.p, t.threshold.metric.c_str(),
                    t.value);
        ok = ok && t.pass;
      }
      return ok ? 0 : 1;
    }
    if (*sweep) {
      const auto config = load_config(sweep_c);
      const auto models = load_models(sweep_models, config);
      const auto axis = parse_sweep_axis(sweep_axis);
      const auto base = pick_method(config, sweep_method);
      const auto points =
          run_sweep(config, models, base, axis, sweep_values, worker_count());
      const auto h = config.hash();
      const fs::path dir(sweep_out);
      persist_config(dir, config);
      {
        std::ofstream f(dir / ("sweep_" + to_string(axis) + ".csv"));
        write_sweep_csv(f, axis, points, h);
      }
      write_sweep_csv(std::cout, axis, points, h);
      std::vector<Series> series;
      for (const auto& pt : points) {
        const std::string label = axis == SweepAxis::p ? base.name : "P=" + short_num(pt.p);
        auto it = std::find_if(series.begin(), series.end(),
                               [&](const Series& s) { return s.label == label; });
        if (it == series.end()) {
          series.push_back({label, {}, {}, {}});
          it = series.end() - 1;
        }
        it->x.push_back(pt.value);
        it->mean.push_back(pt.row.coverage_mean);
        it->std.push_back(pt.row.coverage_std);
      }
      write_text(dir / ("sweep_" + to_string(axis) + ".svg"),
                 line_chart_svg(series, base.name + " sweep", to_string(axis), "coverage", h));
      return 0;
    }
    if (*trace) {
      const auto config = load_config(trace_c);
      const auto models = load_models(trace_models, config);
      const auto m = pick_method(config, trace_method);
      std::vector<executor::TraceRow> rows;
      const auto result =
          run_cell(config, models, {m, trace_p, trace_seed, trace_episode, 1},
                   [&](std::size_t, const executor::TraceRow& r) { rows.push_back(r); });
      std::ofstream f(trace_out);
      executor::write_trace_csv(f, rows, config.hash());
      std::printf("%s P=%g seed=%llu episode=%zu success=%d coverage=%.4f steps=%zu\n",
                  m.name.c_str(), trace_p, static_cast<unsigned long long>(trace_seed),
                  trace_episode, result.front().success ? 1 : 0, result.front().coverage,
                  result.front().steps);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
