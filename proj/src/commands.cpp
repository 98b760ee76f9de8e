#include "lwir/commands.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "lwir/errors.hpp"
#include "lwir/evaluation.hpp"
#include "lwir/hash.hpp"
#include "lwir/pipeline.hpp"
#include "lwir/retrieval.hpp"

namespace lwir {
namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr const char* kDefaultTGrid = "280:320:5";

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void say(const CommandOptions& o, const std::string& s) {
  if (o.log) o.log(s);
}

std::string num(double v) { return std::isnan(v) ? "" : format_double(v); }

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
  if (!f) throw IoError("cannot write " + p.string());
}

KeyValueConfig load_or_empty(const std::string& path) {
  return path.empty() ? KeyValueConfig{} : KeyValueConfig::load(path);
}

// Refuses an existing path unless forced. A forced rerun first removes the
// files the previous manifest lists, so the directory only holds this run.
void prepare_out(const std::string& dir, bool force) {
  const fs::path p(dir);
  std::error_code ec;
  if (fs::exists(p, ec)) {
    if (!force) throw ConfigError("output path '" + dir + "' exists (pass --force to overwrite)");
    if (!fs::is_directory(p, ec)) throw ConfigError("output path '" + dir + "' is not a directory");
    if (fs::exists(p / kManifestFile)) {
      try {
        for (const auto& f : RunManifest::load(dir).outputs) fs::remove(p / f, ec);
      } catch (const Error&) {
      }
      fs::remove(p / kManifestFile, ec);
    }
  }
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

void finish(RunManifest& m, const std::string& dir) {
  m.finished = now_utc();
  write_text(fs::path(dir) / kManifestFile, m.to_config().to_text());
}

void output(RunManifest& m, const std::string& dir, const std::string& name, const std::string& text) {
  write_text(fs::path(dir) / name, text);
  m.outputs.push_back(name);
}

// Runs fn(i) for i in [0, n) on `workers` threads. Results are written by
// index, so the outcome does not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  const int w = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int t = 0; t < w; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

void verify_dataset_hashes(const std::string& dir, const RunManifest& m) {
  for (const auto& [name, hash] : m.dataset_hashes) {
    const auto p = (fs::path(dir) / name).string();
    if (!fs::exists(p)) throw DataError("dataset " + p + " listed in the manifest is missing");
    if (hex64(file_hash(p)) != hash) throw DataError("dataset " + p + " does not match its manifest hash " + hash);
  }
}

std::uint64_t split_seed_of(const Checkpoint& ck) {
  return static_cast<std::uint64_t>(ck.manifest.get_int_or("split_seed", 42));
}

// Records to score: the simulated test split when `path` is the dataset the
// model was trained on, every record otherwise.
struct Selection {
  std::vector<std::size_t> indices;
  bool test_split = false;
};

Selection select_records(const Dataset& ds, const std::string& path, const Checkpoint& ck) {
  Selection s;
  const bool trained_on = ck.manifest.has("data.simulated_hash") &&
                          ck.manifest.get("data.simulated_hash") == hex64(file_hash(path));
  if (trained_on) {
    s.indices = split(ds.records.size(), split_seed_of(ck)).test;
    s.test_split = true;
  } else {
    for (std::size_t i = 0; i < ds.records.size(); ++i) s.indices.push_back(i);
  }
  return s;
}

struct PixelTes {
  double eps_bar = kNaN;
  double t_true = kNaN;
  double t_hat = kNaN;
  double emissivity_mae = kNaN;
  int valid_bands = 0;
  TesResult result;
};

PixelTes retrieve_one(const SampleRecord& r, const ComponentPrediction& p, const Dataset& ds,
                      std::optional<double> eps_bar, const TemperatureGrid& tg, TesCriterion crit, BandWindow w,
                      std::size_t index) {
  PixelTes out;
  if (eps_bar) {
    out.eps_bar = *eps_bar;
  } else if (r.labeled()) {
    out.eps_bar = ds.material(r.material_id()).eps_bar;
  } else {
    throw ConfigError("record " + std::to_string(index) + " is unlabelled; pass --eps-bar");
  }
  const auto& total = r.total();
  const TesInput in{Eigen::Map<const Eigen::VectorXd>(total.vec().data(), static_cast<Eigen::Index>(total.size())),
                    p.down, p.up, p.tau};
  try {
    out.result = grid_search_temperature(in, out.eps_bar, tg, crit, w);
    out.t_hat = out.result.t_hat;
    out.valid_bands = out.result.emissivity.valid_count;
  } catch (const DataError&) {
    return out;
  }
  if (r.labeled()) {
    out.t_true = r.temperature();
    out.emissivity_mae = emissivity_mae(out.result.emissivity, ds.material(r.material_id()).emissivity, w);
  }
  return out;
}

std::vector<PixelTes> retrieve_all(const Dataset& ds, std::span<const std::size_t> idx, const Checkpoint& ck,
                                   std::optional<double> eps_bar, const TemperatureGrid& tg, TesCriterion crit,
                                   BandWindow w, int workers) {
  const auto rr = select(ds.records, idx);
  const auto preds = predict_components(ck.state.net, ck.stats, geometries_of(rr), workers);
  std::vector<PixelTes> out(rr.size());
  parallel_for(rr.size(), workers,
               [&](std::size_t i) { out[i] = retrieve_one(*rr[i], preds[i], ds, eps_bar, tg, crit, w, idx[i]); });
  return out;
}

std::vector<double> labelled_maes(const std::vector<PixelTes>& px) {
  std::vector<double> m;
  for (const auto& p : px) {
    if (!std::isnan(p.emissivity_mae)) m.push_back(p.emissivity_mae);
  }
  return m;
}

std::string join_hex(const KeyValueConfig& c) { return hex64(fnv1a(c.to_text())); }

}  // namespace

// ---------------------------------------------------------------------------

KeyValueConfig RunManifest::to_config() const {
  KeyValueConfig c;
  c.set("command", command);
  c.set("config_hash", config_hash);
  c.set("seed", std::to_string(seed));
  c.set("version", version);
  c.set("started", started);
  c.set("finished", finished);
  for (const auto& [name, hash] : dataset_hashes) c.add("dataset." + name, hash);
  for (const auto& o : outputs) c.add("output", o);
  for (const auto& [k, v] : extra.entries()) c.add("param." + k, v);
  return c;
}

RunManifest RunManifest::from_config(const KeyValueConfig& c) {
  RunManifest m;
  m.command = c.get("command");
  m.config_hash = c.get_or("config_hash", "");
  m.seed = static_cast<std::uint64_t>(c.get_int_or("seed", 0));
  m.version = c.get_or("version", "");
  m.started = c.get_or("started", "");
  m.finished = c.get_or("finished", "");
  for (const auto& [k, v] : c.entries()) {
    if (k.rfind("dataset.", 0) == 0) m.dataset_hashes.emplace_back(k.substr(8), v);
  }
  m.outputs = c.get_all("output");
  m.extra = c.with_prefix("param.");
  return m;
}

RunManifest RunManifest::load(const std::string& dir) {
  const auto p = (fs::path(dir) / kManifestFile).string();
  if (!fs::exists(p)) throw DataError("no " + std::string(kManifestFile) + " in " + dir);
  return from_config(KeyValueConfig::load(p));
}

// ---------------------------------------------------------------------------

void cmd_simulate(const std::string& config_path, const std::string& out_dir, const CommandOptions& opt) {
  auto kv = load_or_empty(config_path);
  if (opt.seed) kv.set("seed", std::to_string(*opt.seed));
  const auto sc = SimulateConfig::from_config(kv);
  prepare_out(out_dir, opt.force);

  RunManifest m;
  m.command = "simulate";
  m.started = now_utc();
  m.seed = sc.seed;
  const auto cfg_text = sc.to_config();
  m.config_hash = join_hex(cfg_text);
  for (const auto& [k, v] : cfg_text.entries()) m.extra.add(k, v);

  say(opt, "simulating " + std::to_string(sc.material_ids.size()) + " materials");
  const auto data = simulate(sc);
  const auto write = [&](const Dataset& ds, const char* name) {
    const auto p = (fs::path(out_dir) / name).string();
    write_dataset(ds, p);
    m.outputs.push_back(name);
    m.dataset_hashes.emplace_back(name, hex64(file_hash(p)));
    m.extra.set(std::string("records.") + name, std::to_string(ds.records.size()));
    say(opt, std::string("wrote ") + name + " (" + std::to_string(ds.records.size()) + " records)");
  };
  write(data.simulated, kSimulatedFile);
  if (data.field) write(*data.field, kFieldFile);
  finish(m, out_dir);
}

void cmd_train(const std::string& config_path, const std::string& data_dir, const std::string& out_dir,
               const CommandOptions& opt) {
  const auto kv = load_or_empty(config_path);
  KeyValueConfig tkv;
  std::optional<std::uint64_t> split_seed;
  std::optional<std::string> expect_hash;
  for (const auto& [k, v] : kv.entries()) {
    if (k == "split_seed") {
      split_seed = static_cast<std::uint64_t>(parse_int(v, "split_seed"));
    } else if (k == "data.config_hash") {
      expect_hash = v;
    } else {
      tkv.set(k, v);
    }
  }
  if (opt.seed) tkv.set("seed", std::to_string(*opt.seed));
  if (opt.mode) tkv.set("mode", *opt.mode);
  if (opt.epochs) tkv.set("epochs", std::to_string(*opt.epochs));
  const auto cfg = TrainConfig::from_config(tkv);
  if (!split_seed) split_seed = cfg.seed;

  const auto dm = RunManifest::load(data_dir);
  verify_dataset_hashes(data_dir, dm);
  const auto sim_path = (fs::path(data_dir) / kSimulatedFile).string();
  const auto field_path = (fs::path(data_dir) / kFieldFile).string();
  const auto sim = read_dataset(sim_path);
  std::optional<Dataset> field;
  if (fs::exists(field_path)) field = read_dataset(field_path);
  if (expect_hash && sim.metadata.get_or("config_hash", "") != *expect_hash) {
    throw DataError("dataset config hash " + sim.metadata.get_or("config_hash", "(none)") +
                    " does not match the expected " + *expect_hash);
  }
  if (cfg.mode == TrainMode::mixed && !field) throw DataError("mixed training needs " + field_path);

  const auto prep = prepare_training(sim, field ? &*field : nullptr, *split_seed);

  KeyValueConfig extra;
  const auto cfg_kv = cfg.to_config();
  for (const auto& [k, v] : cfg_kv.entries()) {
    if (k != "epochs") extra.set("train." + k, v);
  }
  extra.set("split_seed", std::to_string(*split_seed));
  extra.set("data.simulated_hash", hex64(file_hash(sim_path)));
  extra.set("data.config_hash", sim.metadata.get_or("config_hash", ""));
  if (field) extra.set("data.field_hash", hex64(file_hash(field_path)));

  auto state = TrainState::fresh(cfg);
  if (!opt.from_checkpoint.empty()) {
    auto ck = load_checkpoint(opt.from_checkpoint);
    if (!ck.resumable) throw DataError(opt.from_checkpoint + " holds no optimizer state and cannot be resumed");
    if (!(ck.stats == prep.stats)) throw DataError(opt.from_checkpoint + " was trained on different data");
    for (const auto& [k, v] : extra.entries()) {
      if (ck.manifest.get_or(k, "") != v) {
        throw DataError("cannot resume " + opt.from_checkpoint + ": " + k + " was '" + ck.manifest.get_or(k, "") +
                        "', now '" + v + "'");
      }
    }
    if (ck.state.epochs_done > cfg.epochs) {
      throw ConfigError("checkpoint is at epoch " + std::to_string(ck.state.epochs_done) + ", beyond epochs = " +
                        std::to_string(cfg.epochs));
    }
    state = std::move(ck.state);
    say(opt, "resuming at epoch " + std::to_string(state.epochs_done));
  }
  prepare_out(out_dir, opt.force);

  RunManifest m;
  m.command = "train";
  m.started = now_utc();
  m.seed = cfg.seed;
  KeyValueConfig hashed = cfg_kv;
  hashed.set("split_seed", std::to_string(*split_seed));
  m.config_hash = join_hex(hashed);
  m.dataset_hashes.emplace_back(kSimulatedFile, extra.get("data.simulated_hash"));
  if (field) m.dataset_hashes.emplace_back(kFieldFile, extra.get("data.field_hash"));
  for (const auto& [k, v] : hashed.entries()) m.extra.set(k, v);
  if (!opt.from_checkpoint.empty()) m.extra.set("resumed_from", opt.from_checkpoint);

  say(opt, "training " + to_string(cfg.mode) + " for " + std::to_string(cfg.epochs) + " epochs on " +
               std::to_string(prep.set.sim_train.size()) + " simulated + " +
               std::to_string(prep.set.field_train.size()) + " field records");
  auto report = train(state, prep.set, prep.stats, cfg, [&](const TrainState&, const EpochLog& e) {
    std::ostringstream s;
    s << "epoch " << e.epoch << "/" << cfg.epochs << " loss1_train " << e.loss1_train << " loss2_train "
      << e.loss2_train << " loss_val " << e.loss_val << " (" << e.seconds << " s)";
    say(opt, s.str());
  });
  report.checkpoint = kModelFile;

  save_model((fs::path(out_dir) / kModelFile).string(), state.best_network(), prep.stats, extra);
  m.outputs.push_back(kModelFile);
  save_checkpoint((fs::path(out_dir) / kCheckpointFile).string(), state, prep.stats, true, extra);
  m.outputs.push_back(kCheckpointFile);
  output(m, out_dir, "report.csv", report.to_csv());
  m.extra.set("best_epoch", std::to_string(state.best_epoch));
  m.extra.set("best_val", num(state.best_val));
  m.extra.set("initial_loss1_val", num(state.initial_loss1_val));
  m.extra.set("optimizer", report.optimizer);
  finish(m, out_dir);
}

void cmd_retrieve(const std::string& checkpoint, const std::string& data, const std::string& out_dir,
                  const CommandOptions& opt) {
  const auto ck = load_checkpoint(checkpoint);
  std::string path = data;
  if (fs::is_directory(data)) {
    verify_dataset_hashes(data, RunManifest::load(data));
    path = (fs::path(data) / kSimulatedFile).string();
    if (!fs::exists(path)) path = (fs::path(data) / kFieldFile).string();
  }
  const auto ds = read_dataset(path);
  const auto sel = select_records(ds, path, ck);
  const auto crit = parse_tes_criterion(opt.criterion.value_or("mae"));
  const auto tg = TemperatureGrid::parse(opt.t_grid.value_or(kDefaultTGrid));
  if (opt.eps_bar && !(*opt.eps_bar > 0.0 && *opt.eps_bar < 1.0)) throw ConfigError("--eps-bar must be in (0, 1)");
  const auto window = BandWindow::restricted();
  prepare_out(out_dir, opt.force);

  RunManifest m;
  m.command = "retrieve";
  m.started = now_utc();
  m.seed = opt.seed.value_or(0);
  KeyValueConfig params;
  params.set("checkpoint", checkpoint);
  params.set("data", path);
  params.set("criterion", to_string(crit));
  params.set("t_grid", tg.to_string());
  params.set("eps_bar", opt.eps_bar ? format_double(*opt.eps_bar) : "material");
  params.set("window_um", format_double(window.lo_um) + ":" + format_double(window.hi_um));
  params.set("records", sel.test_split ? "test_split" : "all");
  m.config_hash = join_hex(params);
  m.extra = params;
  m.dataset_hashes.emplace_back(fs::path(path).filename().string(), hex64(file_hash(path)));

  say(opt, "retrieving " + std::to_string(sel.indices.size()) + " records");
  const auto px = retrieve_all(ds, sel.indices, ck, opt.eps_bar, tg, crit, window, opt.workers);

  std::ostringstream pix, scores, eps;
  pix << "index,record,material_id,range_m,angle_deg,eps_bar,t_true,t_hat,abs_error,emissivity_mae,valid_bands\n";
  scores << "index,temperature,mae,norm_mae,score\n";
  eps << "x,y,series,value\n";
  const auto& grid = SpectralGrid::standard();
  std::size_t within = 0, labelled = 0;
  for (std::size_t i = 0; i < px.size(); ++i) {
    const auto& r = ds.records[sel.indices[i]];
    const auto& p = px[i];
    const double err = std::abs(p.t_hat - p.t_true);
    pix << i << ',' << sel.indices[i] << ',' << (r.labeled() ? std::to_string(r.material_id()) : "") << ','
        << num(r.geometry().range_m) << ',' << num(r.geometry().angle_deg) << ',' << num(p.eps_bar) << ','
        << num(p.t_true) << ',' << num(p.t_hat) << ',' << num(err) << ',' << num(p.emissivity_mae) << ','
        << p.valid_bands << '\n';
    for (const auto& row : p.result.table) {
      scores << i << ',' << num(row.temperature) << ',' << num(row.mae) << ',' << num(row.norm_mae) << ','
             << num(row.score) << '\n';
    }
    if (p.result.emissivity.values.size() == static_cast<Eigen::Index>(grid.size())) {
      for (std::size_t b = 0; b < grid.size(); ++b) {
        eps << num(grid[b]) << ',' << i << ",estimate," << num(p.result.emissivity.values(static_cast<Eigen::Index>(b)))
            << '\n';
      }
      if (r.labeled()) {
        const auto& truth = ds.material(r.material_id()).emissivity;
        for (std::size_t b = 0; b < grid.size(); ++b) eps << num(grid[b]) << ',' << i << ",truth," << num(truth[b]) << '\n';
      }
    }
    if (!std::isnan(p.t_true)) {
      ++labelled;
      if (err <= tg.step + 1e-9) ++within;
    }
  }
  output(m, out_dir, "tes_pixels.csv", pix.str());
  output(m, out_dir, "tes_scores.csv", scores.str());
  output(m, out_dir, "tes_emissivity.csv", eps.str());

  std::ostringstream sum;
  sum << "metric,value\nrecords," << px.size() << "\nlabelled," << labelled << '\n';
  if (labelled > 0) {
    const auto maes = labelled_maes(px);
    const auto purity = purity_classification(maes);
    sum << "t_within_one_step," << num(static_cast<double>(within) / static_cast<double>(labelled)) << '\n'
        << "emissivity_mae_below_0.02," << num(purity[0]) << '\n'
        << "emissivity_mae_below_0.01," << num(purity[1]) << '\n';
  }
  output(m, out_dir, "summary.csv", sum.str());
  finish(m, out_dir);
}

void cmd_evaluate(const std::string& checkpoint, const std::string& data_dir, const std::string& out_dir,
                  const CommandOptions& opt) {
  const auto ck = load_checkpoint(checkpoint);
  const auto sim_path = (fs::path(data_dir) / kSimulatedFile).string();
  if (!fs::exists(sim_path)) {
    throw DataError("evaluation needs simulated ground truth; " + sim_path + " is missing");
  }
  verify_dataset_hashes(data_dir, RunManifest::load(data_dir));
  const auto sim = read_dataset(sim_path);
  const auto sel = select_records(sim, sim_path, ck);
  const auto rr = select(sim.records, sel.indices);
  const auto atm = AtmosphereModel::from_config(sim.metadata.with_prefix("atmosphere."));
  const std::uint64_t seed = opt.seed.value_or(42);
  prepare_out(out_dir, opt.force);

  RunManifest m;
  m.command = "evaluate";
  m.started = now_utc();
  m.seed = seed;
  m.extra.set("checkpoint", checkpoint);
  m.extra.set("records", sel.test_split ? "test_split" : "all");
  m.extra.set("blackbody_noise", format_double(kDefaultEmitNoise));
  m.extra.set("blackbody_noise_model", "sigma * L_total * z added to L_emit");
  m.config_hash = join_hex(m.extra);
  m.dataset_hashes.emplace_back(kSimulatedFile, hex64(file_hash(sim_path)));

  std::vector<std::pair<std::string, std::string>> checks;  // name, detail ("" = pass)
  const auto check = [&](const std::string& name, bool ok, const std::string& detail) {
    checks.emplace_back(name, ok ? "" : detail);
  };

  say(opt, "component errors on " + std::to_string(rr.size()) + " records");
  const auto preds = predict_components(ck.state.net, ck.stats, geometries_of(rr), opt.workers);
  const auto t_true = component_errors(preds, rr, sim.materials, TargetMode::true_target);
  const auto t_false = component_errors(preds, rr, sim.materials, TargetMode::false_target);
  output(m, out_dir, "component_errors.csv", error_tables_csv(t_true, t_false));
  bool same = true;
  for (Component c : {Component::tau, Component::down, Component::up}) {
    same = same && t_true[c].mae == t_false[c].mae && t_true[c].rmse == t_false[c].rmse;
  }
  check("false_target_atmosphere_identical", same, "atmospheric rows differ between target modes");
  check("false_target_surface_differs",
        t_false[Component::emit].mae != t_true[Component::emit].mae &&
            t_false[Component::total].mae != t_true[Component::total].mae,
        "L_emit/L_total rows unchanged under false target");

  say(opt, "residual fields");
  const auto predictor = network_predictor(ck.state.net, ck.stats, opt.workers);
  const auto& grass = sim.material(kGrassMaterialId);
  bool down_const = true;
  for (FixedAxis fx : {FixedAxis::range, FixedAxis::angle}) {
    const double v = default_fixed_value(fx);
    const auto fields = residual_fields(predictor, atm, grass, 310.0, fx, v);
    for (const auto& f : fields) {
      const std::string name = std::string("residual_") + (fx == FixedAxis::range ? "range" : "angle") +
                               format_double(v) + "_" + to_string(f.component) + ".csv";
      output(m, out_dir, name, residual_field_csv(f));
      if (f.component == Component::down) {
        for (Eigen::Index i = 1; i < f.predicted.rows(); ++i) down_const = down_const && f.predicted.row(i) == f.predicted.row(0);
      }
    }
  }
  check("downwelling_geometry_invariant", down_const, "predicted L_down varies with geometry");

  say(opt, "purity");
  const auto tg = TemperatureGrid::parse(kDefaultTGrid);
  std::ostringstream pur;
  pur << "set,records,mae_below_0.02,mae_below_0.01\n";
  {
    const auto px = retrieve_all(sim, sel.indices, ck, std::nullopt, tg, TesCriterion::mae, BandWindow::restricted(),
                                 opt.workers);
    const auto maes = labelled_maes(px);
    const auto p = purity_classification(maes);
    pur << "simulated," << maes.size() << ',' << num(p[0]) << ',' << num(p[1]) << '\n';
  }
  const auto field_path = (fs::path(data_dir) / kFieldFile).string();
  if (fs::exists(field_path)) {
    const auto field = read_dataset(field_path);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < field.records.size(); ++i) {
      if (field.records[i].labeled()) idx.push_back(i);
    }
    if (!idx.empty()) {
      m.dataset_hashes.emplace_back(kFieldFile, hex64(file_hash(field_path)));
      const auto px = retrieve_all(field, idx, ck, std::nullopt, tg, TesCriterion::mae, BandWindow::restricted(),
                                   opt.workers);
      const auto maes = labelled_maes(px);
      const auto p = purity_classification(maes);
      pur << "field," << maes.size() << ',' << num(p[0]) << ',' << num(p[1]) << '\n';
    }
  }
  output(m, out_dir, "purity.csv", pur.str());

  say(opt, "equivalent blackbody temperature");
  std::vector<BlackbodyTemperature> clean, noisy;
  std::vector<double> truth;
  Rng rng(seed);
  double worst = 0.0;
  for (const auto* r : rr) {
    const auto& eps = sim.material(r->material_id()).emissivity;
    clean.push_back(equivalent_blackbody_temperature(r->emit(), r->tau(), eps));
    noisy.push_back(equivalent_blackbody_temperature(with_sensor_noise(r->emit(), r->total(), kDefaultEmitNoise, rng),
                                                     r->tau(), eps));
    truth.push_back(r->temperature());
    const auto& c = clean.back();
    for (Eigen::Index b = 0; b < c.kelvin.size(); ++b) {
      if (c.valid[static_cast<std::size_t>(b)]) worst = std::max(worst, std::abs(c.kelvin(b) - r->temperature()));
    }
  }
  check("blackbody_clean_exact", worst < 1e-8, "clean T(lambda) off by " + format_double(worst) + " K");
  const auto s = summarize_blackbody(noisy, truth);
  {
    std::ostringstream bb;
    bb << "x,y,series,value\n";
    const auto& grid = SpectralGrid::standard();
    for (std::size_t b = 0; b < grid.size(); ++b) {
      bb << num(grid[b]) << ",0,per_band_mae," << num(s.per_band_mae(static_cast<Eigen::Index>(b))) << '\n';
    }
    output(m, out_dir, "blackbody_bands.csv", bb.str());
    std::ostringstream pm;
    pm << "record,material_id,t_true,mae\n";
    for (std::size_t i = 0; i < rr.size(); ++i) {
      pm << sel.indices[i] << ',' << rr[i]->material_id() << ',' << num(truth[i]) << ',' << num(s.per_record_mae[i])
         << '\n';
    }
    output(m, out_dir, "blackbody_records.csv", pm.str());
  }

  std::ostringstream ck_csv;
  ck_csv << "check,passed,detail\n";
  std::string failed;
  for (const auto& [name, detail] : checks) {
    ck_csv << name << ',' << (detail.empty() ? "true" : "false") << ',' << detail << '\n';
    if (!detail.empty()) failed += (failed.empty() ? "" : ", ") + name;
  }
  output(m, out_dir, "checks.csv", ck_csv.str());
  m.extra.set("checks_failed", failed.empty() ? "none" : failed);
  finish(m, out_dir);
  if (!failed.empty()) throw NumericalError("evaluation invariant check failed: " + failed);
}

}  // namespace lwir
