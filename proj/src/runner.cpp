#include "ionwalk/runner.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "ionwalk/dynamics.hpp"
#include "ionwalk/error.hpp"
#include "ionwalk/readout.hpp"
#include "ionwalk/rng.hpp"
#include "ionwalk/sideband.hpp"

#ifndef IONWALK_VERSION
#define IONWALK_VERSION "0.0.0"
#endif

namespace ionwalk {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::Config, msg); }

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::InvalidArgument:
      return kExitConfig;
    case ErrorKind::InvalidPhysics:
      return kExitPhysics;
    case ErrorKind::Truncation:
      return kExitTruncation;
    case ErrorKind::NoBracket:
    case ErrorKind::IllConditioned:
    case ErrorKind::NormDrift:
    case ErrorKind::DimensionMismatch:
      return kExitNumerical;
  }
  return kExitInternal;
}

Json default_config() {
  const DriveParams p = DriveParams::trapped_ion_defaults();
  Json c;
  c["omega_z_hz"] = p.omega_z / kTwoPi;
  c["delta_hz"] = p.delta / kTwoPi;
  c["eta"] = p.eta;
  c["drive_amp_h_hz"] = nullptr;  // null: calibrate against target_nbar
  c["force_ratio"] = p.force_ratio;
  c["phase"] = p.phase;
  c["t_d_us"] = nullptr;          // null: 2 pi / delta
  c["dt_ns"] = p.dt * 1e9;
  c["n_max"] = p.n_max;
  c["duration_scale"] = p.duration_scale;
  c["target_nbar"] = kDefaultTargetNbar;
  c["steps"] = 3;
  c["seed"] = 1;
  c["threads"] = 1;
  c["walk"] = {{"step_delta", nullptr}};
  c["sweep"] = {{"scales", {0.96, 0.97, 0.98, 0.99, 1.0, 1.01, 1.02, 1.03, 1.04}}};
  c["positions"] = {{"state", "phase"}};
  c["readout"] = {
      {"omega_hz", 500e3},  {"decay_rate", 0.0},     {"flop_points", 100},
      {"flop_step_us", 1.0}, {"n_fit_max", 10},      {"shots", 0},
      {"estimator", "fit"},  {"source", "exact"},    {"fock_rows", 40},
      {"method", "nnls"},    {"bootstrap", 100},     {"window_us", 100.0},
      {"bright_rate_hz", 200e3}, {"dark_rate_hz", 1e3}};
  c["thermal"] = {{"nbar0", 0.0}, {"samples", 0}};
  c["impulsive"] = {{"kick", nullptr}, {"directions", Json::array()}};
  c["limits"] = {{"max_steps", 6}};
  c["rabi"] = {{"n_max", 64}};
  return c;
}

namespace {

void merge_into(Json& base, const Json& over, const std::string& path) {
  if (!over.is_object()) config_error("config: expected an object at '" + (path.empty() ? "<root>" : path) + "'");
  for (auto it = over.begin(); it != over.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) config_error("config: unknown key '" + key + "'");
    Json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_into(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

}  // namespace

Json merge_config(const Json& base, const Json& overrides) {
  Json out = base;
  merge_into(out, overrides, "");
  return out;
}

std::string config_hash(const Json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

namespace {

template <typename T>
T get(const Json& c, const char* key) {
  try {
    return c.at(key).get<T>();
  } catch (const Json::exception& e) {
    config_error(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

DriveParams drive_params(const Json& c) {
  DriveParams p = DriveParams::trapped_ion_defaults();
  p.omega_z = kTwoPi * get<double>(c, "omega_z_hz");
  p.delta = kTwoPi * get<double>(c, "delta_hz");
  p.eta = get<double>(c, "eta");
  p.force_ratio = get<double>(c, "force_ratio");
  p.phase = get<double>(c, "phase");
  p.dt = get<double>(c, "dt_ns") * 1e-9;
  p.n_max = get<std::size_t>(c, "n_max");
  p.duration_scale = get<double>(c, "duration_scale");
  p.t_d = c.at("t_d_us").is_null() ? (p.delta != 0.0 ? kTwoPi / std::abs(p.delta) : 0.0)
                                   : get<double>(c, "t_d_us") * 1e-6;
  p.drive_amp_h = c.at("drive_amp_h_hz").is_null() ? 0.0 : kTwoPi * get<double>(c, "drive_amp_h_hz");
  p.validate();
  return p;
}

DriveParams calibrated(const Json& c) {
  DriveParams p = drive_params(c);
  if (c.at("drive_amp_h_hz").is_null()) p = calibrate_step(p, get<double>(c, "target_nbar"));
  return p;
}

double step_delta(const Json& c) {
  const Json& w = c.at("walk");
  return w.at("step_delta").is_null() ? std::sqrt(get<double>(c, "target_nbar"))
                                      : get<double>(w, "step_delta");
}

ReadoutKnobs readout_knobs(const Json& c) {
  const Json& r = c.at("readout");
  ReadoutKnobs k;
  const std::string est = get<std::string>(r, "estimator");
  if (est == "fit") k.estimator = PositionEstimator::MixtureFit;
  else if (est == "projector") k.estimator = PositionEstimator::Projector;
  else config_error("config: readout.estimator must be 'fit' or 'projector'");
  const std::string src = get<std::string>(r, "source");
  if (src == "exact") k.source = PopulationSource::Exact;
  else if (src == "flopping") k.source = PopulationSource::Flopping;
  else config_error("config: readout.source must be 'exact' or 'flopping'");
  k.fock_rows = get<std::size_t>(r, "fock_rows");
  k.sideband.eta = get<double>(c, "eta");
  k.sideband.omega = kTwoPi * get<double>(r, "omega_hz");
  k.sideband.decay_rate = get<double>(r, "decay_rate");
  k.flop_points = get<std::size_t>(r, "flop_points");
  k.flop_step = get<double>(r, "flop_step_us") * 1e-6;
  k.n_fit_max = get<std::size_t>(r, "n_fit_max");
  k.shots = get<std::uint64_t>(r, "shots");
  k.seed = get<std::uint64_t>(c, "seed");
  return k;
}

std::string wall_clock() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

Json provenance(const Json& c) {
  return {{"tool", "ionwalk"},
          {"version", IONWALK_VERSION},
          {"config_hash", config_hash(c)},
          {"seed", c.at("seed")},
          {"wall_clock", wall_clock()}};
}

// CSV writer: '#' provenance lines, a column header, then LF-terminated rows.
class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path, const Json& prov, const std::string& header)
      : out_(path, std::ios::binary) {
    if (!out_) config_error("cannot open output file " + path.string());
    out_ << "# tool=" << prov["tool"].get<std::string>()
         << " version=" << prov["version"].get<std::string>()
         << " config_hash=" << prov["config_hash"].get<std::string>()
         << " seed=" << prov["seed"].dump()
         << " wall_clock=" << prov["wall_clock"].get<std::string>() << '\n';
    out_ << header << '\n';
    out_ << std::setprecision(17);
  }
  template <typename... Ts>
  void row(const Ts&... values) {
    bool first = true;
    ((out_ << (first ? "" : ",") << values, first = false), ...);
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

Json positions_json(const PositionDistribution& d) {
  Json j = Json::object();
  for (const auto& [i, p] : d) j[std::to_string(i)] = p;
  return j;
}

Json report_json(const WalkReport& r) {
  return {{"steps", r.steps},
          {"p_h", r.coin.p_h},
          {"p_t", r.coin.p_t},
          {"n_bar", r.n_bar},
          {"norm", r.norm},
          {"positions", positions_json(r.positions)}};
}

void write_positions(CsvFile& csv, std::size_t step, const JointState& s, double delta,
                     const ReadoutKnobs& base) {
  const int reach = static_cast<int>(step);
  for (auto est : {PositionEstimator::MixtureFit, PositionEstimator::Projector}) {
    ReadoutKnobs k = base;
    k.estimator = est;
    const char* name = est == PositionEstimator::MixtureFit ? "fit" : "projector";
    for (Coin c : {Coin::H, Coin::T}) {
      for (const auto& [i, p] : position_distribution(s, c, delta, -reach, reach, k)) {
        csv.row(step, i, c == Coin::H ? "H" : "T", name, p);
      }
    }
  }
}

WalkOptions walk_options(const Json& c, std::size_t fock) {
  WalkOptions o;
  o.initial_fock = fock;
  o.readout = readout_knobs(c);
  return o;
}

bool thermal_requested(const Json& c) {
  const Json& t = c.at("thermal");
  return get<double>(t, "nbar0") > 0.0 || get<std::size_t>(t, "samples") > 0;
}

Json thermal_json(const ThermalReport& t) {
  Json counts = Json::object();
  for (const auto& [n, k] : t.fock_counts) counts[std::to_string(n)] = k;
  return {{"mean", report_json(t.mean)}, {"fock_counts", counts}, {"sample_mean_n", t.sample_mean_n}};
}

Json run_walk(const Json& c, const std::filesystem::path& dir, const Json& prov) {
  const auto steps = get<std::size_t>(c, "steps");
  const LineWalkState q = line_walk(steps, coin_toss(), LineWalkState::localized(Coin::T));
  const WalkReport r = report(q, steps);
  const PositionDistribution classical = classical_walk(steps);
  CsvFile csv(dir / "walk.csv", prov, "position,quantum,classical");
  const int reach = static_cast<int>(steps);
  for (int i = -reach; i <= reach; ++i) {
    const auto qi = r.positions.find(i);
    const auto ci = classical.find(i);
    csv.row(i, qi == r.positions.end() ? 0.0 : qi->second, ci == classical.end() ? 0.0 : ci->second);
  }
  const SpreadStatistics sq = spread_statistics(r.positions);
  const SpreadStatistics sc = spread_statistics(classical);
  return {{"quantum", report_json(r)},
          {"classical", {{"positions", positions_json(classical)}, {"variance", sc.variance}}},
          {"quantum_variance", sq.variance},
          {"quantum_mean", sq.mean}};
}

Json run_phase(const Json& c, const std::filesystem::path& dir, const Json& prov) {
  const auto steps = get<std::size_t>(c, "steps");
  const auto n_max = get<std::size_t>(c, "n_max");
  const double delta = step_delta(c);
  const WalkResult w = run_phase_walk(steps, delta, n_max, walk_options(c, 0));
  CsvFile csv(dir / "positions.csv", prov, "step,i,coin,estimator,probability");
  write_positions(csv, steps, w.state, delta, readout_knobs(c));
  Json rep = {{"walk", report_json(w.report)}, {"step_delta", delta}};
  if (thermal_requested(c)) {
    const Json& t = c.at("thermal");
    auto fn = [&](std::size_t fock) {
      WalkOptions o = walk_options(c, fock);
      o.estimate_positions = false;
      return run_phase_walk(steps, delta, n_max, o).report;
    };
    rep["thermal"] = thermal_json(thermal_ensemble(fn, get<double>(t, "nbar0"), get<std::size_t>(t, "samples"),
                                                   get<std::uint64_t>(c, "seed"), get<unsigned>(c, "threads")));
  }
  return rep;
}

Json drive_json(const DriveParams& p) {
  return {{"omega_z", p.omega_z}, {"delta", p.delta},     {"eta", p.eta},
          {"drive_amp_h", p.drive_amp_h}, {"drive_amp_h_hz", p.drive_amp_h / kTwoPi},
          {"force_ratio", p.force_ratio}, {"phase", p.phase}, {"t_d", p.t_d},
          {"dt", p.dt},           {"n_max", p.n_max},     {"duration_scale", p.duration_scale}};
}

Json run_dynamics(const Json& c, const std::filesystem::path& dir, const Json& prov) {
  const auto steps = get<std::size_t>(c, "steps");
  const DriveParams p = calibrated(c);
  DynamicsOptions opts;
  opts.walk = walk_options(c, 0);
  opts.target_nbar = get<double>(c, "target_nbar");
  const DynamicsWalkResult w = run_dynamics_walk(steps, p, opts);
  CsvFile csv(dir / "positions.csv", prov, "step,i,coin,estimator,probability");
  write_positions(csv, steps, w.state, std::sqrt(opts.target_nbar), opts.walk.readout);
  Json per_step = Json::array();
  for (const auto& s : w.steps) per_step.push_back({{"p_h", s.p_h}, {"n_bar", s.n_bar}});
  Json rep = {{"walk", report_json(w.report)}, {"per_step", per_step}, {"drive", drive_json(p)}};
  if (thermal_requested(c)) {
    const Json& t = c.at("thermal");
    auto fn = [&](std::size_t fock) {
      DynamicsOptions o = opts;
      o.walk.initial_fock = fock;
      o.walk.estimate_positions = false;
      return run_dynamics_walk(steps, p, o).report;
    };
    rep["thermal"] = thermal_json(thermal_ensemble(fn, get<double>(t, "nbar0"), get<std::size_t>(t, "samples"),
                                                   get<std::uint64_t>(c, "seed"), get<unsigned>(c, "threads")));
  }
  return rep;
}

Json run_sweep(const Json& c, const std::filesystem::path& dir, const Json& prov) {
  const DriveParams p = calibrated(c);
  const auto scales = get<std::vector<double>>(c.at("sweep"), "scales");
  const auto points = duration_sweep(scales, p, get<unsigned>(c, "threads"));
  CsvFile csv(dir / "sweep.csv", prov, "scale,P_H,P_T");
  Json rows = Json::array();
  for (const auto& pt : points) {
    csv.row(pt.scale, pt.p_h, pt.p_t);
    rows.push_back({{"scale", pt.scale}, {"p_h", pt.p_h}, {"p_t", pt.p_t}});
  }
  return {{"sweep", rows}, {"drive", drive_json(p)}};
}

Json run_positions(const Json& c, const std::filesystem::path& dir, const Json& prov) {
  const auto steps = get<std::size_t>(c, "steps");
  const std::string source = get<std::string>(c.at("positions"), "state");
  JointState state;
  double delta = step_delta(c);
  WalkOptions o = walk_options(c, 0);
  o.estimate_positions = false;
  if (source == "phase") {
    state = run_phase_walk(steps, delta, get<std::size_t>(c, "n_max"), o).state;
  } else if (source == "dynamics") {
    DynamicsOptions d;
    d.walk = o;
    d.target_nbar = get<double>(c, "target_nbar");
    delta = std::sqrt(d.target_nbar);
    state = run_dynamics_walk(steps, calibrated(c), d).state;
  } else {
    config_error("config: positions.state must be 'phase' or 'dynamics'");
  }
  CsvFile csv(dir / "positions.csv", prov, "step,i,coin,estimator,probability");
  write_positions(csv, steps, state, delta, readout_knobs(c));
  const int reach = static_cast<int>(steps);
  const PositionDistribution total = position_distribution_total(state, delta, -reach, reach, readout_knobs(c));
  return {{"state", source}, {"positions", positions_json(total)}, {"step_delta", delta}};
}

Json run_rabi(const Json& c, const std::filesystem::path& dir, const Json& prov) {
  const double eta = get<double>(c, "eta");
  const double omega = kTwoPi * get<double>(c.at("readout"), "omega_hz");
  const RabiCurve curve = sideband_rabi_curve(eta, omega, get<std::size_t>(c.at("rabi"), "n_max"));
  CsvFile csv(dir / "rabi.csv", prov, "n,omega_exact,omega_ld");
  for (std::size_t n = 0; n < curve.exact.size(); ++n) {
    csv.row(n, curve.exact[n] / kTwoPi, curve.ld[n] / kTwoPi);
  }
  Json zero = curve.zero_n ? Json(*curve.zero_n) : Json(nullptr);
  return {{"eta", eta}, {"peak_n", curve.peak_n}, {"zero_n", zero}, {"units", "Hz"}};
}

Json run_limits(const Json& c, const std::filesystem::path& dir, const Json& prov) {
  const DriveParams p = calibrated(c);
  const StepLimitStudy study =
      step_limit_study(p, get<std::size_t>(c.at("limits"), "max_steps"), get<double>(c, "target_nbar"));
  CsvFile csv(dir / "limits.csv", prov, "step,n_bar,fidelity,P_H,var_min,var_max");
  Json rows = Json::array();
  for (const auto& r : study.records) {
    csv.row(r.step, r.n_bar, r.fidelity, r.p_h, r.dominant_branch.min_variance, r.dominant_branch.max_variance);
    rows.push_back({{"step", r.step}, {"n_bar", r.n_bar}, {"fidelity", r.fidelity}, {"p_h", r.p_h},
                    {"var_min", r.dominant_branch.min_variance}, {"var_max", r.dominant_branch.max_variance}});
  }
  return {{"records", rows}, {"truncated", study.truncated}, {"diagnostic", study.diagnostic},
          {"drive", drive_json(p)}};
}

Json run_readout(const Json& c, const std::filesystem::path& dir, const Json& prov) {
  const ReadoutKnobs k = readout_knobs(c);
  const Json& r = c.at("readout");
  const double nbar = get<double>(c, "target_nbar");
  const MotionalVector v = coherent_state(std::sqrt(nbar), get<std::size_t>(c, "n_max"));
  const std::vector<double> times = uniform_times(k.flop_points, k.flop_step);
  FlopTrace trace = add_shot_noise(simulate_bsb_flopping(v, times, k.sideband), k.shots, k.seed);
  ExtractionOptions opts;
  opts.seed = k.seed;
  opts.bootstrap_resamples = get<int>(r, "bootstrap");
  const std::string method = get<std::string>(r, "method");
  if (method == "nnls") opts.method = ExtractionMethod::Nnls;
  else if (method == "fourier") opts.method = ExtractionMethod::Fourier;
  else config_error("config: readout.method must be 'nnls' or 'fourier'");
  const PopulationEstimate est = extract_populations(trace, k.n_fit_max, k.sideband, opts);

  CsvFile csv(dir / "flop.csv", prov, "t_us,p_ideal,counts");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (trace.counts.empty()) csv.row(times[i] * 1e6, trace.p_t[i], "");
    else csv.row(times[i] * 1e6, trace.p_t[i], trace.counts[i]);
  }
  double l1 = 0.0;
  Json truth = Json::array();
  for (std::size_t n = 0; n < est.p_n.size(); ++n) {
    const double p = std::norm(v.amp[static_cast<Eigen::Index>(n)]);
    truth.push_back(p);
    l1 += std::abs(p - est.p_n[n]);
  }
  return {{"p_true", truth},          {"p_est", est.p_n},   {"sigma", est.sigma_n},
          {"residual", est.residual}, {"condition", est.condition_number}, {"l1_error", l1},
          {"shots_per_point", k.shots}};
}

Json run_impulsive(const Json& c, const std::filesystem::path&, const Json&) {
  const auto steps = get<std::size_t>(c, "steps");
  const Json& im = c.at("impulsive");
  const double kick = im.at("kick").is_null() ? std::sqrt(get<double>(c, "target_nbar")) : get<double>(im, "kick");
  const auto directions = get<std::vector<double>>(im, "directions");
  WalkOptions o = walk_options(c, 0);
  o.estimate_positions = false;
  const std::size_t n_max = impulsive_n_max(steps, kick);
  const WalkResult w = impulsive_walk(steps, kick, n_max, directions, o);
  const PositionDistribution line =
      line_walk(steps, coin_toss(), LineWalkState::localized(Coin::T)).positions();
  const double sq = spread_statistics(line).stddev;
  const double sc = spread_statistics(classical_walk(steps)).stddev;
  return {{"walk", report_json(w.report)},
          {"n_max", n_max},
          {"norm_drift", std::abs(w.report.norm - 1.0)},
          {"sigma_quantum", sq},
          {"sigma_classical", sc},
          {"sigma_ratio", sc > 0.0 ? sq / sc : 0.0}};
}

}  // namespace

Json run(const RunRequest& request) {
  using Handler = Json (*)(const Json&, const std::filesystem::path&, const Json&);
  static const std::map<std::string, Handler> handlers = {
      {"walk", run_walk},           {"phase-walk", run_phase},     {"dynamics-walk", run_dynamics},
      {"sweep-duration", run_sweep}, {"positions", run_positions}, {"rabi-curve", run_rabi},
      {"limits", run_limits},       {"readout-roundtrip", run_readout}, {"impulsive", run_impulsive}};
  const auto it = handlers.find(request.subcommand);
  if (it == handlers.end()) config_error("unknown subcommand '" + request.subcommand + "'");

  const Json& c = request.config;
  std::filesystem::create_directories(request.out_dir);
  const Json prov = provenance(c);
  Json rep = it->second(c, request.out_dir, prov);
  rep["subcommand"] = request.subcommand;
  rep["provenance"] = prov;
  rep["config"] = c;
  std::ofstream(request.out_dir / "report.json", std::ios::binary) << rep.dump(2) << '\n';
  return rep;
}

ThermalReport thermal_ensemble(const std::function<WalkReport(std::size_t)>& run_from_fock,
                               double nbar0, std::size_t samples, std::uint64_t seed,
                               unsigned threads) {
  if (nbar0 < 0.0) throw Error(ErrorKind::InvalidArgument, "thermal_ensemble: nbar0 must be non-negative");
  ThermalReport out;
  if (nbar0 == 0.0 || samples == 0) {
    out.fock_counts[0] = std::max<std::size_t>(samples, 1);
    out.mean = run_from_fock(0);
    return out;
  }
  // Thermal occupation P(n) = (1 - q) q^n, q = nbar0 / (1 + nbar0).
  const double success = 1.0 / (1.0 + nbar0);
  double total_n = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    CounterRng rng(seed, k);
    std::geometric_distribution<std::size_t> draw(success);
    const std::size_t n = draw(rng);
    ++out.fock_counts[n];
    total_n += static_cast<double>(n);
  }
  out.sample_mean_n = total_n / static_cast<double>(samples);

  std::vector<std::pair<std::size_t, std::size_t>> groups(out.fock_counts.begin(), out.fock_counts.end());
  std::vector<WalkReport> reports(groups.size());
  threads = std::max(1u, threads);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t g = w; g < groups.size(); g += threads) reports[g] = run_from_fock(groups[g].first);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  // Merge in ascending n so the sum order is fixed.
  WalkReport& m = out.mean;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double w = static_cast<double>(groups[g].second) / static_cast<double>(samples);
    const WalkReport& r = reports[g];
    m.coin.p_h += w * r.coin.p_h;
    m.coin.p_t += w * r.coin.p_t;
    m.n_bar += w * r.n_bar;
    m.norm += w * r.norm - (g == 0 ? 1.0 : 0.0);
    m.steps = r.steps;
    for (const auto& [i, p] : r.positions) m.positions[i] += w * p;
  }
  return out;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  auto error_line = [&](const std::string& kind, int code, const std::string& msg) {
    err << Json{{"error", kind}, {"exit_code", code}, {"message", msg}}.dump() << '\n';
    return code;
  };

  CLI::App app{"Trapped-ion phase-space quantum walk simulator"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<double> eta, delta_hz, dt_ns, duration_scale, nbar0;
  std::optional<std::size_t> steps, nmax, samples;
  std::optional<std::uint64_t> shots;
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--seed", seed, "RNG seed");
  app.add_option("--threads", threads, "Worker threads for sweeps and ensembles");
  app.add_option("--eta", eta, "Lamb-Dicke parameter");
  app.add_option("--delta-hz", delta_hz, "Drive detuning in Hz");
  app.add_option("--steps", steps, "Number of walk steps");
  app.add_option("--nmax", nmax, "Fock cutoff (rabi-curve: curve length)");
  app.add_option("--dt-ns", dt_ns, "Integrator step in ns");
  app.add_option("--duration-scale", duration_scale, "Relative drive duration");
  app.add_option("--shots", shots, "Shots per flop point");
  app.add_option("--nbar0", nbar0, "Thermal initial occupation");
  app.add_option("--samples", samples, "Thermal ensemble samples");
  const std::pair<const char*, const char*> subcommands[] = {
      {"walk", "Discrete line walk and classical comparator"},
      {"phase-walk", "Coherent-state walk with exact displacements"},
      {"dynamics-walk", "Walk under the full time-dependent drive"},
      {"sweep-duration", "Three-step P_H versus drive duration scale"},
      {"positions", "Position distribution from the readout chain"},
      {"rabi-curve", "Blue-sideband couplings versus n"},
      {"limits", "Per-step fidelity and energy growth"},
      {"readout-roundtrip", "Synthetic flopping trace and population fit"},
      {"impulsive", "Impulsive-kick walk for many steps"}};
  for (const auto& [name, help] : subcommands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return error_line("usage", kExitConfig, e.what());
  }

  try {
    RunRequest req;
    req.subcommand = app.get_subcommands().front()->get_name();
    req.out_dir = out_dir;
    Json cfg = default_config();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) config_error("cannot read config file " + config_path);
      Json user;
      try {
        user = Json::parse(in);
      } catch (const Json::parse_error& e) {
        config_error(std::string("config: invalid JSON: ") + e.what());
      }
      cfg = merge_config(cfg, user);
    }
    Json flags = Json::object();
    if (seed) flags["seed"] = *seed;
    if (threads) flags["threads"] = *threads;
    if (eta) flags["eta"] = *eta;
    if (delta_hz) flags["delta_hz"] = *delta_hz;
    if (steps) flags["steps"] = *steps;
    if (nmax) {
      if (req.subcommand == "rabi-curve") flags["rabi"]["n_max"] = *nmax;
      else flags["n_max"] = *nmax;
    }
    if (dt_ns) flags["dt_ns"] = *dt_ns;
    if (duration_scale) flags["duration_scale"] = *duration_scale;
    if (shots) flags["readout"]["shots"] = *shots;
    if (nbar0) flags["thermal"]["nbar0"] = *nbar0;
    if (samples) flags["thermal"]["samples"] = *samples;
    req.config = merge_config(cfg, flags);

    const Json rep = run(req);
    out << "wrote " << (req.out_dir / "report.json").string() << '\n';
    (void)rep;
    return kExitOk;
  } catch (const Error& e) {
    return error_line(to_string(e.kind()), exit_code_for(e.kind()), e.what());
  } catch (const std::exception& e) {
    return error_line("internal", kExitInternal, e.what());
  }
}

}  // namespace ionwalk
