#include "harood/radar_sim.hpp"

#include <cmath>
#include <complex>
#include <random>
#include <string>

#include "harood/dataset_store.hpp"
#include "harood/parallel.hpp"
#include "harood/rdi_preproc.hpp"

namespace harood {

namespace {

constexpr double kTwoPi = 2.0 * EIGEN_PI;

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double random_sign(std::mt19937_64& rng) { return uniform_int(rng, 0, 1) ? 1.0 : -1.0; }

// Scatterer whose range and velocity are carried from frame to frame.
struct Mover {
  double range;
  double velocity;
  double lo, hi;

  // Advances one frame, bouncing off the [lo, hi] walls.
  void advance(double dt) {
    range += velocity * dt;
    if (range > hi) {
      range = 2 * hi - range;
      velocity = -velocity;
    } else if (range < lo) {
      range = 2 * lo - range;
      velocity = -velocity;
    }
  }
};

struct Oscillator {
  double offset;  // range offset from the owning body, m
  double amplitude;
  double amp_scale;
  double freq;
  double phase0;
};

Scatterer oscillating(double range, double velocity, const Oscillator& o, double t) {
  Scatterer s;
  s.range = range + o.offset;
  s.radial_velocity = velocity;
  s.amplitude = o.amplitude;
  s.micro_motion_amp = o.amp_scale;
  s.micro_motion_freq = o.freq;
  s.micro_motion_phase = std::fmod(o.phase0 + kTwoPi * o.freq * t, kTwoPi);
  return s;
}

Scenario make_scenario(SceneKind kind, int n_frames, const RadarConfig& config, std::uint64_t seed) {
  Scenario sc;
  sc.kind = kind;
  sc.n_frames = n_frames;
  sc.seed = seed;
  sc.trajectory.resize(n_frames);
  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(kind) + 1));
  const double dt = config.frame_period;

  auto limbs = [&](int n, double offset, double amp_lo, double amp_hi, double mm_lo, double mm_hi,
                   double f_lo, double f_hi) {
    std::vector<Oscillator> out;
    for (int i = 0; i < n; ++i)
      out.push_back({uniform(rng, -offset, offset), uniform(rng, amp_lo, amp_hi), uniform(rng, mm_lo, mm_hi),
                     uniform(rng, f_lo, f_hi), uniform(rng, 0.0, kTwoPi)});
    return out;
  };

  switch (kind) {
    case SceneKind::sit:
    case SceneKind::stand: {
      const bool sit = kind == SceneKind::sit;
      const double base = uniform(rng, 1.3, 3.7);
      // Sitting: larger, slower torso oscillation; standing: small sway.
      const Oscillator torso = sit ? Oscillator{0.0, uniform(rng, 0.8, 1.2), uniform(rng, 0.03, 0.05),
                                                uniform(rng, 0.25, 0.45), uniform(rng, 0.0, kTwoPi)}
                                   : Oscillator{0.0, uniform(rng, 0.8, 1.2), uniform(rng, 0.004, 0.01),
                                                uniform(rng, 0.6, 1.2), uniform(rng, 0.0, kTwoPi)};
      // Seated hands work at the desk in front of the torso.
      const auto parts = sit ? limbs(uniform_int(rng, 2, 4), 0.15, 0.2, 0.4, 0.01, 0.03, 1.0, 2.5)
                             : limbs(uniform_int(rng, 2, 4), 0.4, 0.2, 0.5, 0.002, 0.006, 0.3, 1.0);
      for (int f = 0; f < n_frames; ++f) {
        const double t = f * dt;
        auto& frame = sc.trajectory[f];
        frame.push_back(oscillating(base, 0.0, torso, t));
        for (const auto& p : parts) frame.push_back(oscillating(base, 0.0, p, t));
      }
      break;
    }
    case SceneKind::walk: {
      Mover body{uniform(rng, 1.3, 3.7), random_sign(rng) * uniform(rng, 0.5, 1.5), 1.2, 3.8};
      const double amplitude = uniform(rng, 0.8, 1.2);
      const double gait = uniform(rng, 1.5, 2.2);
      auto parts = limbs(uniform_int(rng, 2, 4), 0.1, 0.2, 0.4, 0.05, 0.1, gait, gait);
      for (std::size_t i = 0; i < parts.size(); ++i) parts[i].phase0 = (i % 2) * EIGEN_PI;
      for (int f = 0; f < n_frames; ++f) {
        const double t = f * dt;
        auto& frame = sc.trajectory[f];
        frame.push_back({body.range, body.velocity, amplitude, 0.0, 0.0, 0.0});
        for (const auto& p : parts) frame.push_back(oscillating(body.range, body.velocity, p, t));
        body.advance(dt);
      }
      break;
    }
    case SceneKind::fan: {
      const double base = uniform(rng, 1.0, 3.9);
      const double housing = uniform(rng, 0.3, 0.6);
      const double freq = uniform(rng, 15.0, 25.0);
      const double blade_amp = uniform(rng, 0.005, 0.01);
      std::vector<Oscillator> blades;
      for (int b = 0; b < 3; ++b)
        blades.push_back({0.02 * (b - 1), uniform(rng, 0.2, 0.4), blade_amp, freq, kTwoPi * b / 3.0});
      for (int f = 0; f < n_frames; ++f) {
        const double t = f * dt;
        auto& frame = sc.trajectory[f];
        frame.push_back({base, 0.0, housing, 0.0, 0.0, 0.0});
        for (const auto& b : blades) frame.push_back(oscillating(base, 0.0, b, t));
      }
      break;
    }
    case SceneKind::toy_car: {
      Mover car{uniform(rng, 1.2, 3.8), random_sign(rng) * uniform(rng, 1.8, 2.8), 1.05, 3.95};
      const double amplitude = uniform(rng, 0.3, 0.8);
      const double radius = uniform(rng, 0.025, 0.035);
      // A rolling wheel rim point moves at v * (1 + sin), so it oscillates
      // with amplitude equal to the wheel radius at |v| / (2 pi r).
      std::vector<Oscillator> wheels;
      for (int w = 0; w < 4; ++w)
        wheels.push_back({w < 2 ? -0.08 : 0.08, uniform(rng, 0.1, 0.2), radius,
                          std::abs(car.velocity) / (kTwoPi * radius), uniform(rng, 0.0, kTwoPi)});
      const Oscillator motor{0.02, 0.1, uniform(rng, 0.0005, 0.0015), uniform(rng, 25.0, 35.0), 0.0};
      for (int f = 0; f < n_frames; ++f) {
        const double t = f * dt;
        auto& frame = sc.trajectory[f];
        frame.push_back({car.range, car.velocity, amplitude, 0.0, 0.0, 0.0});
        frame.push_back(oscillating(car.range, car.velocity, motor, t));
        for (const auto& w : wheels) frame.push_back(oscillating(car.range, car.velocity, w, t));
        car.advance(dt);
      }
      break;
    }
    case SceneKind::swinging: {
      // Pendulum-like items: the bulk velocity flips sign every half period.
      struct Swing {
        double center, amplitude, swing, freq, phase;
        Oscillator flutter;
      };
      std::vector<Swing> items;
      const int n = uniform_int(rng, 1, 3);
      for (int i = 0; i < n; ++i)
        items.push_back({uniform(rng, 1.3, 3.7), uniform(rng, 0.3, 0.7), uniform(rng, 0.1, 0.25),
                         uniform(rng, 0.4, 0.9), uniform(rng, 0.0, kTwoPi),
                         {0.0, 0.0, uniform(rng, 0.01, 0.03), uniform(rng, 1.0, 3.0), uniform(rng, 0.0, kTwoPi)}});
      // Points along the suspension share the phase, scaled by their distance from the pivot.
      constexpr double kAlong[] = {0.25, 0.5, 0.75, 1.0};
      for (int f = 0; f < n_frames; ++f) {
        const double t = f * dt;
        auto& frame = sc.trajectory[f];
        for (const auto& s : items) {
          const double ph = kTwoPi * s.freq * t + s.phase;
          for (double a : kAlong) {
            const double range = s.center + a * s.swing * std::sin(ph);
            const double velocity = a * kTwoPi * s.freq * s.swing * std::cos(ph);
            Oscillator flutter = s.flutter;
            flutter.amplitude = s.amplitude * (a == 1.0 ? 1.0 : 0.3);
            flutter.amp_scale *= a;
            frame.push_back(oscillating(range, velocity, flutter, t));
          }
        }
      }
      break;
    }
    case SceneKind::stationary_clutter: {
      ScattererSet objects;
      const int n = uniform_int(rng, 2, 5);
      for (int i = 0; i < n; ++i) objects.push_back({uniform(rng, 1.0, 4.0), 0.0, uniform(rng, 0.3, 1.5), 0.0, 0.0, 0.0});
      for (int f = 0; f < n_frames; ++f) sc.trajectory[f] = objects;
      break;
    }
    case SceneKind::robot_vacuum: {
      Mover robot{uniform(rng, 1.3, 3.7), random_sign(rng) * uniform(rng, 0.2, 0.4), 1.1, 3.9};
      const double amplitude = uniform(rng, 0.3, 0.6);
      const Oscillator roller{0.05, 0.15, uniform(rng, 0.0005, 0.0015), uniform(rng, 30.0, 45.0), 0.0};
      // Two side brushes with three arms each sweep their tips around the hub.
      const double spin = uniform(rng, 2.0, 4.0), reach = uniform(rng, 0.06, 0.08);
      std::vector<Oscillator> arms;
      for (int side = 0; side < 2; ++side)
        for (int arm = 0; arm < 3; ++arm)
          arms.push_back({side ? 0.1 : -0.1, 0.08, reach, spin, kTwoPi * arm / 3.0 + side * 0.5});
      for (int f = 0; f < n_frames; ++f) {
        const double t = f * dt;
        auto& frame = sc.trajectory[f];
        frame.push_back({robot.range, robot.velocity, amplitude, 0.0, 0.0, 0.0});
        frame.push_back(oscillating(robot.range, robot.velocity, roller, t));
        for (const auto& a : arms) frame.push_back(oscillating(robot.range, robot.velocity, a, t));
        robot.advance(dt);
      }
      break;
    }
    default:
      throw Error("unknown scene kind");
  }
  return sc;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void RadarConfig::validate() const {
  if (n_rx < 1) throw ConfigError("n_rx must be >= 1");
  if (!is_power_of_two(n_chirps) || !is_power_of_two(n_samples))
    throw ConfigError("n_chirps and n_samples must be powers of two");
  if (!(bandwidth > 0) || !(carrier_freq > 0)) throw ConfigError("bandwidth and carrier must be positive");
  if (!(chirp_period > 0) || !(frame_period > 0)) throw ConfigError("chirp and frame periods must be positive");
  if (n_chirps * chirp_period > frame_period) throw ConfigError("chirps do not fit into the frame period");
  if (!(noise_std >= 0)) throw ConfigError("noise_std must be non-negative");
}

void check_scatterer(const Scatterer& s, const RadarConfig& config) {
  if (!(s.range > 0) || !(s.range < config.max_range()))
    throw RangeViolation("scatterer range " + std::to_string(s.range) + " m outside (0, " +
                         std::to_string(config.max_range()) + ")");
  if (!(std::abs(s.radial_velocity) < config.max_velocity()))
    throw RangeViolation("scatterer velocity " + std::to_string(s.radial_velocity) + " m/s exceeds +/-" +
                         std::to_string(config.max_velocity()));
}

RawFrameCube simulate_frame(const ScattererSet& scatterers, const RadarConfig& config, std::uint64_t noise_seed) {
  config.validate();
  for (const auto& s : scatterers) check_scatterer(s, config);

  const int nc = config.n_chirps, ns = config.n_samples;
  RawFrameCube cube;
  cube.channels.assign(config.n_rx, Matrix<double>::Zero(nc, ns));

  const double lambda = config.wavelength();
  std::vector<std::complex<double>> rx_rotation(config.n_rx);
  for (int rx = 0; rx < config.n_rx; ++rx) rx_rotation[rx] = std::polar(1.0, 0.1 * rx);

  std::vector<std::complex<double>> tone(ns);
  for (const auto& s : scatterers) {
    for (int m = 0; m < nc; ++m) {
      const double t = m * config.chirp_period;
      const double r = s.range + s.radial_velocity * t +
                       s.micro_motion_amp * std::sin(kTwoPi * s.micro_motion_freq * t + s.micro_motion_phase);
      const double fast_step = kTwoPi * 2.0 * r * config.bandwidth / (kSpeedOfLight * ns);
      const double slow_phase = 2.0 * kTwoPi * r / lambda;
      const std::complex<double> step = std::polar(1.0, fast_step);
      std::complex<double> z = std::polar(s.amplitude, slow_phase);
      for (int n = 0; n < ns; ++n) {
        tone[n] = z;
        z *= step;
      }
      for (int rx = 0; rx < config.n_rx; ++rx) {
        auto row = cube.channels[rx].row(m);
        for (int n = 0; n < ns; ++n) row[n] += (tone[n] * rx_rotation[rx]).real();
      }
    }
  }

  if (config.noise_std > 0) {
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> noise(0.0, config.noise_std);
    for (auto& ch : cube.channels)
      for (int m = 0; m < nc; ++m)
        for (int n = 0; n < ns; ++n) ch(m, n) += noise(rng);
  }
  return cube;
}

Scenario generate_scenario(SceneKind kind, int n_frames, const RadarConfig& config, std::uint64_t seed) {
  if (n_frames < 1) throw Error("scenario needs at least one frame");
  if (static_cast<std::uint32_t>(kind) >= kNumSceneKinds) throw Error("unknown scene kind");
  config.validate();
  return make_scenario(kind, n_frames, config, seed);
}

int DatasetRecipe::total(Split split) const {
  int n = 0;
  if (auto it = counts.find(split); it != counts.end())
    for (const auto& [kind, c] : it->second) n += c;
  return n;
}

int DatasetRecipe::total_in_distribution() const {
  int n = 0;
  for (const auto& [split, kinds] : counts)
    for (const auto& [kind, c] : kinds)
      if (is_in_distribution(kind)) n += c;
  return n;
}

DatasetRecipe DatasetRecipe::benchmark() {
  using K = SceneKind;
  DatasetRecipe r;
  r.counts[Split::train] = {{K::sit, 900}, {K::stand, 900}, {K::walk, 900}};
  r.counts[Split::oe] = {{K::sit, 100}, {K::stand, 100}, {K::walk, 100}, {K::fan, 300}, {K::toy_car, 300}};
  r.counts[Split::calibration] = {{K::sit, 350}, {K::stand, 350}, {K::walk, 350}};
  r.counts[Split::test] = {{K::sit, 200},     {K::stand, 200},   {K::walk, 200},
                           {K::fan, 120},     {K::toy_car, 120}, {K::swinging, 120},
                           {K::stationary_clutter, 120}, {K::robot_vacuum, 120}};
  return r;
}

namespace {

void validate_recipe(const DatasetRecipe& recipe) {
  if (recipe.samples_per_recording < 1) throw ConfigError("samples_per_recording must be >= 1");
  if (recipe.total_in_distribution() == 0) throw ConfigError("dataset recipe contains no in-distribution frames");
  for (const auto& [split, kinds] : recipe.counts)
    for (const auto& [kind, c] : kinds) {
      if (c < 0) throw ConfigError("negative frame count in recipe");
      if (c == 0) continue;
      if (split == Split::train && !is_in_distribution(kind))
        throw ConfigError("train split may only hold activity classes, got " + std::string(to_string(kind)));
      if (split == Split::oe && !is_in_distribution(kind) && kind != SceneKind::fan && kind != SceneKind::toy_car)
        throw ConfigError("outlier-exposure split may only use fan and toy_car disturbers, got " +
                          std::string(to_string(kind)));
    }
}

struct RecordingJob {
  Split split;
  SceneKind kind;
  int samples;
  std::uint64_t seed;
};

}  // namespace

DatasetManifest build_dataset(const DatasetRecipe& recipe, const RadarConfig& config,
                              const PreprocessConfig& preprocess, const std::filesystem::path& output_dir,
                              std::uint64_t seed, int workers) {
  validate_recipe(recipe);
  config.validate();

  std::vector<RecordingJob> jobs;
  for (const auto& [split, kinds] : recipe.counts)
    for (const auto& [kind, count] : kinds) {
      const std::uint64_t stream =
          mix_seed(seed, static_cast<std::uint64_t>(split) * kNumSceneKinds + static_cast<std::uint64_t>(kind));
      int remaining = count;
      for (std::uint64_t r = 0; remaining > 0; ++r) {
        const int n = std::min(remaining, recipe.samples_per_recording);
        jobs.push_back({split, kind, n, mix_seed(stream, r)});
        remaining -= n;
      }
    }

  std::vector<std::vector<SampleRecord>> produced(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t i) {
    const RecordingJob& job = jobs[i];
    RecordingProcessor processor(config, preprocess);
    const int n_frames = processor.warmup_frames() + job.samples;
    const Scenario scenario = generate_scenario(job.kind, n_frames, config, job.seed);
    for (int f = 0; f < n_frames; ++f) {
      const RawFrameCube cube = simulate_frame(scenario.trajectory[f], config, mix_seed(job.seed, 1000003ULL + f));
      if (auto sample = processor.push(cube)) {
        SampleRecord rec;
        rec.macro = std::move(sample->first);
        rec.micro = std::move(sample->second);
        rec.label = job.kind;
        rec.split = job.split;
        produced[i].push_back(std::move(rec));
      }
    }
  });

  std::vector<SampleRecord> records;
  std::uint32_t next_id = 0;
  for (auto& batch : produced)
    for (auto& rec : batch) {
      rec.id = next_id++;
      records.push_back(std::move(rec));
    }

  nlohmann::json snapshot = {
      {"radar",
       {{"n_rx", config.n_rx},
        {"n_chirps", config.n_chirps},
        {"n_samples", config.n_samples},
        {"carrier_freq", config.carrier_freq},
        {"bandwidth", config.bandwidth},
        {"chirp_period", config.chirp_period},
        {"frame_period", config.frame_period},
        {"noise_std", config.noise_std}}},
      {"preprocess",
       {{"erespd_window", preprocess.erespd_window},
        {"erespd_decay", preprocess.erespd_decay},
        {"sinc_length", preprocess.sinc_length},
        {"sinc_cutoff", preprocess.sinc_cutoff}}},
      {"samples_per_recording", recipe.samples_per_recording}};
  return write_samples(records, output_dir, seed, snapshot);
}

}  // namespace harood
