#include "diffpush/env/dataset.hpp"

#include <cmath>

#include "diffpush/binary_io.hpp"
#include "diffpush/env/observation.hpp"
#include "diffpush/errors.hpp"

namespace diffpush::env {

namespace {

constexpr double kMinStd = 1e-8;

void mean_std(const std::vector<std::vector<double>>& columns, std::vector<double>& mean,
              std::vector<double>& stdev) {
  mean.assign(columns.size(), 0.0);
  stdev.assign(columns.size(), 1.0);
  for (std::size_t d = 0; d < columns.size(); ++d) {
    const auto& c = columns[d];
    if (c.empty()) {
      continue;
    }
    double sum = 0.0;
    for (double v : c) {
      sum += v;
    }
    const double m = sum / static_cast<double>(c.size());
    double sq = 0.0;
    for (double v : c) {
      sq += (v - m) * (v - m);
    }
    const double s = std::sqrt(sq / static_cast<double>(c.size()));
    mean[d] = m;
    stdev[d] = s < kMinStd ? 1.0 : s;
  }
}

void write_vec(binary::Writer& w, const std::vector<double>& v) {
  for (double x : v) {
    w.f64(x);
  }
}

std::vector<double> read_vec(binary::Reader& r, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) {
    x = r.f64();
  }
  return v;
}

}  // namespace

std::uint64_t demo_episode_seed(std::uint64_t dataset_seed, std::size_t index) {
  return derive_seed(derive_seed(dataset_seed, "demo"), index);
}

std::int32_t demo_episode_side(std::uint64_t episode_seed) {
  return Rng(derive_seed(episode_seed, "side")).bernoulli(0.5) ? 1 : -1;
}

DemoSet generate_dataset(const DatasetConfig& config, const EnvConfig& env_config,
                         const ExpertConfig& expert) {
  if (config.num_episodes == 0 || config.horizon == 0 || config.history_len == 0) {
    throw ConfigError("dataset needs positive episode count, horizon and history");
  }
  if (!(config.action_noise >= 0.0)) {
    throw ConfigError("dataset action noise must be >= 0");
  }
  DemoSet set;
  set.horizon = config.horizon;
  set.history_len = config.history_len;
  const auto max_attempts = static_cast<std::size_t>(
      std::ceil(config.max_attempt_factor * static_cast<double>(config.num_episodes)));
  std::size_t attempt = 0;
  while (set.episodes.size() < config.num_episodes) {
    if (attempt >= max_attempts) {
      throw GenerationError("expert succeeded in only " +
                            std::to_string(set.episodes.size()) + " of " +
                            std::to_string(attempt) + " episodes");
    }
    EpisodeRecord rec;
    rec.seed = demo_episode_seed(config.seed, attempt++);
    rec.side = demo_episode_side(rec.seed);
    PushEnv env(env_config, {}, rec.seed);
    Rng noise(derive_seed(rec.seed, "demo_noise"));
    while (!env.done()) {
      const Vec2 a = expert_action(env.state(), env.config(), rec.side, expert);
      rec.observations.push_back(env.observe());
      rec.actions.push_back(a);
      if (config.action_noise > 0.0) {
        env.step({a.x + config.action_noise * noise.normal(),
                  a.y + config.action_noise * noise.normal()});
      } else {
        env.step(a);
      }
    }
    if (env.success()) {
      set.episodes.push_back(std::move(rec));
    }
  }
  set.stats = compute_stats(set.episodes);
  return set;
}

NormStats compute_stats(std::span<const EpisodeRecord> episodes) {
  std::vector<std::vector<double>> obs(kObsDim), act(kActionDim);
  for (const auto& e : episodes) {
    for (const auto& o : e.observations) {
      for (std::size_t d = 0; d < kObsDim; ++d) {
        obs[d].push_back(o[d]);
      }
    }
    for (const auto& a : e.actions) {
      act[0].push_back(a.x);
      act[1].push_back(a.y);
    }
  }
  NormStats s;
  mean_std(obs, s.obs_mean, s.obs_std);
  mean_std(act, s.act_mean, s.act_std);
  return s;
}

TrainingPairs make_training_pairs(const DemoSet& demos) {
  const std::size_t h = demos.horizon;
  const std::size_t wdim = kObsDim * demos.history_len;
  std::size_t rows = 0;
  for (const auto& e : demos.episodes) {
    rows += e.actions.size();
  }
  TrainingPairs out{numerics::Tensor::matrix(rows, wdim),
                    numerics::Tensor::matrix(rows, h * kActionDim)};
  std::size_t row = 0;
  for (const auto& e : demos.episodes) {
    ObservationWindow window(demos.history_len, 0);
    const std::size_t len = e.actions.size();
    for (std::size_t t = 0; t < len; ++t) {
      window.push(e.observations[t]);
      const auto flat = window.current();
      auto w = out.windows.row(row);
      for (std::size_t j = 0; j < wdim; ++j) {
        w[j] = demos.stats.norm_obs(flat[j], j % kObsDim);
      }
      auto c = out.chunks.row(row);
      for (std::size_t i = 0; i < h; ++i) {
        const Vec2 a = e.actions[std::min(t + i, len - 1)];
        c[2 * i] = demos.stats.norm_act(a.x, 0);
        c[2 * i + 1] = demos.stats.norm_act(a.y, 1);
      }
      ++row;
    }
  }
  return out;
}

std::string encode_demos(const DemoSet& demos) {
  binary::Writer w;
  w.magic("DEMO");
  w.u32(kDemoVersion);
  w.u64(demos.config_hash);
  w.u32(kObsDim);
  w.u32(kActionDim);
  w.u32(demos.horizon);
  w.u32(demos.history_len);
  write_vec(w, demos.stats.obs_mean);
  write_vec(w, demos.stats.obs_std);
  write_vec(w, demos.stats.act_mean);
  write_vec(w, demos.stats.act_std);
  w.u64(demos.episodes.size());
  for (const auto& e : demos.episodes) {
    w.u64(e.seed);
    w.u32(static_cast<std::uint32_t>(e.side));
    w.u32(static_cast<std::uint32_t>(e.actions.size()));
    for (std::size_t t = 0; t < e.actions.size(); ++t) {
      for (double v : e.observations[t]) {
        w.f64(v);
      }
      w.f64(e.actions[t].x);
      w.f64(e.actions[t].y);
    }
  }
  return w.take();
}

DemoSet decode_demos(std::string_view bytes) {
  binary::Reader r(bytes);
  r.expect_magic("DEMO");
  if (const auto v = r.u32(); v != kDemoVersion) {
    throw FormatError("unsupported dataset version " + std::to_string(v));
  }
  DemoSet d;
  d.config_hash = r.u64();
  if (r.u32() != kObsDim || r.u32() != kActionDim) {
    throw FormatError("dataset dimensions do not match this environment");
  }
  d.horizon = r.u32();
  d.history_len = r.u32();
  d.stats.obs_mean = read_vec(r, kObsDim);
  d.stats.obs_std = read_vec(r, kObsDim);
  d.stats.act_mean = read_vec(r, kActionDim);
  d.stats.act_std = read_vec(r, kActionDim);
  const std::uint64_t count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    EpisodeRecord e;
    e.seed = r.u64();
    e.side = static_cast<std::int32_t>(r.u32());
    const std::uint32_t len = r.u32();
    if (r.remaining() / (8 * (kObsDim + kActionDim)) < len) {
      throw FormatError("dataset truncated");
    }
    for (std::uint32_t t = 0; t < len; ++t) {
      Observation o;
      for (double& v : o) {
        v = r.f64();
      }
      e.observations.push_back(o);
      const double x = r.f64();
      e.actions.push_back({x, r.f64()});
    }
    d.episodes.push_back(std::move(e));
  }
  if (!r.at_end()) {
    throw FormatError("trailing bytes after dataset");
  }
  return d;
}

void save_demos(const std::string& path, const DemoSet& demos) {
  binary::write_file(path, encode_demos(demos));
}

DemoSet load_demos(const std::string& path) { return decode_demos(binary::read_file(path)); }

}  // namespace diffpush::env
