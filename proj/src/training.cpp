#include "lwir/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lwir/errors.hpp"
#include "lwir/hash.hpp"
#include "lwir/rng.hpp"

namespace lwir {
namespace {

constexpr char kMagic[8] = {'L', 'W', 'I', 'R', 'N', 'N', '1', '\n'};
constexpr int kFormatVersion = 1;
constexpr std::size_t kEvalChunk = 64;

std::vector<std::vector<std::size_t>> batches_of(const std::vector<std::size_t>& order, int batch_size) {
  std::vector<std::vector<std::size_t>> out;
  const std::size_t bs = static_cast<std::size_t>(batch_size);
  for (std::size_t i = 0; i < order.size(); i += bs) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + bs)));
  }
  if (out.size() > 1 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back().front());
    out.pop_back();
  }
  return out;
}

std::vector<std::size_t> shuffled(std::size_t n, Rng rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(idx);
  return idx;
}

double parameter_norm(const HybridNetwork& net) {
  double s = 0.0;
  for (const nn::Param* p : net.params()) s += p->value.squaredNorm();
  return std::sqrt(s);
}

// Mean loss over `samples`, evaluated in chunks in inference mode.
double mean_loss(HybridNetwork& net, LossKind kind, const std::vector<LossSample>& samples,
                 const NormalizationStats& stats) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (std::size_t i = 0; i < samples.size(); i += kEvalChunk) {
    const std::size_t end = std::min(samples.size(), i + kEvalChunk);
    std::vector<NetInput> in;
    std::vector<const LossSample*> batch;
    for (std::size_t j = i; j < end; ++j) {
      in.push_back(samples[j].input);
      batch.push_back(&samples[j]);
    }
    const auto pred = net.forward(in, Mode::infer);
    acc += evaluate_loss(kind, pred, batch, stats, false).value * static_cast<double>(end - i);
  }
  return acc / static_cast<double>(samples.size());
}

}  // namespace

void adam_update(HybridNetwork& net, AdamState& st, const TrainConfig& cfg) {
  auto params = net.params();
  if (st.m.empty()) {
    for (const nn::Param* p : params) {
      st.m.push_back(nn::Mat::Zero(p->value.rows(), p->value.cols()));
      st.v.push_back(nn::Mat::Zero(p->value.rows(), p->value.cols()));
    }
  }
  ++st.step;
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(st.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto g = params[k]->grad.array();
    auto m = st.m[k].array();
    auto v = st.v[k].array();
    m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
    v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g.square();
    params[k]->value.array() -= cfg.learning_rate * (m / c1) / ((v / c2).sqrt() + cfg.adam_eps);
  }
}

namespace {

std::vector<Eigen::VectorXd> snapshot(const HybridNetwork& net) {
  std::vector<Eigen::VectorXd> out;
  for (const nn::Param* p : net.params()) {
    out.emplace_back(Eigen::Map<const Eigen::VectorXd>(p->value.data(), p->value.size()));
  }
  for (const Eigen::VectorXd* b : net.buffers()) out.push_back(*b);
  return out;
}

void restore(HybridNetwork& net, const std::vector<Eigen::VectorXd>& snap) {
  auto params = net.params();
  auto buffers = net.buffers();
  if (snap.size() != params.size() + buffers.size()) throw DataError("snapshot does not match the network");
  std::size_t k = 0;
  for (nn::Param* p : params) Eigen::Map<Eigen::VectorXd>(p->value.data(), p->value.size()) = snap[k++];
  for (Eigen::VectorXd* b : buffers) *b = snap[k++];
}

}  // namespace

std::string to_string(TrainMode m) { return m == TrainMode::mixed ? "mixed" : "ill_posed_only"; }

TrainMode parse_train_mode(const std::string& s) {
  if (s == "mixed") return TrainMode::mixed;
  if (s == "ill_posed_only" || s == "ill-posed-only" || s == "ill-posed" || s == "ill_posed") return TrainMode::ill_posed_only;
  throw ConfigError("unknown training mode '" + s + "' (expected mixed or ill_posed_only)");
}

void TrainConfig::validate() const {
  if (epochs <= 0) throw ConfigError("epochs must be positive");
  if (batch_size <= 1) throw ConfigError("batch_size must be at least 2");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("adam_beta1 must be in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("adam_beta2 must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (sim_to_field_ratio <= 0) throw ConfigError("sim_to_field_ratio must be positive");
}

KeyValueConfig TrainConfig::to_config() const {
  KeyValueConfig c;
  c.set("epochs", std::to_string(epochs));
  c.set("batch_size", std::to_string(batch_size));
  c.set("learning_rate", format_double(learning_rate));
  c.set("adam_beta1", format_double(adam_beta1));
  c.set("adam_beta2", format_double(adam_beta2));
  c.set("adam_eps", format_double(adam_eps));
  c.set("seed", std::to_string(seed));
  c.set("mode", to_string(mode));
  c.set("sim_to_field_ratio", std::to_string(sim_to_field_ratio));
  c.set("input_prescale", input_prescale ? "true" : "false");
  return c;
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& c) {
  c.require_known({"epochs", "batch_size", "learning_rate", "adam_beta1", "adam_beta2", "adam_eps", "seed", "mode",
                   "sim_to_field_ratio", "input_prescale"});
  TrainConfig t;
  t.epochs = static_cast<int>(c.get_int_or("epochs", t.epochs));
  t.batch_size = static_cast<int>(c.get_int_or("batch_size", t.batch_size));
  t.learning_rate = c.get_double_or("learning_rate", t.learning_rate);
  t.adam_beta1 = c.get_double_or("adam_beta1", t.adam_beta1);
  t.adam_beta2 = c.get_double_or("adam_beta2", t.adam_beta2);
  t.adam_eps = c.get_double_or("adam_eps", t.adam_eps);
  t.seed = static_cast<std::uint64_t>(c.get_int_or("seed", static_cast<std::int64_t>(t.seed)));
  if (c.has("mode")) t.mode = parse_train_mode(c.get("mode"));
  t.sim_to_field_ratio = static_cast<int>(c.get_int_or("sim_to_field_ratio", t.sim_to_field_ratio));
  t.input_prescale = c.get_bool_or("input_prescale", t.input_prescale);
  t.validate();
  return t;
}

EpochPlan epoch_plan(std::size_t n_sim, std::size_t n_field, const TrainConfig& cfg, int epoch) {
  EpochPlan plan;
  const auto e = static_cast<std::uint64_t>(epoch);
  if (cfg.mode == TrainMode::mixed) {
    if (n_field == 0) throw DataError("mixed training needs field-like training records");
    const std::size_t want = n_field * static_cast<std::size_t>(cfg.sim_to_field_ratio);
    if (n_sim < want) {
      throw DataError("simulated pool has " + std::to_string(n_sim) + " records but phase 1 needs " +
                      std::to_string(want) + " (" + std::to_string(cfg.sim_to_field_ratio) + " x " +
                      std::to_string(n_field) + ")");
    }
    auto order = shuffled(n_sim, Rng::derived(cfg.seed, 2 * e));
    order.resize(want);
    plan.sim_batches = batches_of(order, cfg.batch_size);
  } else if (n_field == 0) {
    throw DataError("ill-posed training needs field-like training records");
  }
  plan.field_batches = batches_of(shuffled(n_field, Rng::derived(cfg.seed, 2 * e + 1)), cfg.batch_size);
  return plan;
}

std::vector<LossSample> make_loss_samples(const RecordRefs& records, std::span<const MaterialSpec> materials,
                                          const NormalizationStats& stats) {
  std::vector<LossSample> out;
  out.reserve(records.size());
  for (const SampleRecord* r : records) {
    if (!r->labeled()) continue;
    const int id = r->material_id();
    if (id < 0 || static_cast<std::size_t>(id) >= materials.size() || materials[id].id != id) {
      throw DataError("record references unknown material id " + std::to_string(id));
    }
    out.push_back(make_loss_sample(*r, materials[id].emissivity, stats));
  }
  return out;
}

TrainState TrainState::fresh(const TrainConfig& cfg) {
  TrainState s{HybridNetwork(NetworkOptions{cfg.input_prescale})};
  s.net.init_params(cfg.seed);
  return s;
}

HybridNetwork TrainState::best_network() const {
  HybridNetwork out = net;
  if (!best.empty()) restore(out, best);
  return out;
}

std::string TrainReport::to_csv() const {
  std::ostringstream os;
  os << "epoch,loss1_train,loss2_train,loss_val,seconds,loss1_val,loss2_val\n";
  for (const auto& e : epochs) {
    os << e.epoch << ',' << format_double(e.loss1_train) << ',' << format_double(e.loss2_train) << ','
       << format_double(e.loss_val) << ',' << format_double(e.seconds) << ',' << format_double(e.loss1_val) << ','
       << format_double(e.loss2_val) << '\n';
  }
  return os.str();
}

ValidationLoss validation_loss(HybridNetwork& net, const TrainingSet& data, const NormalizationStats& stats) {
  return {mean_loss(net, LossKind::loss1, data.sim_val, stats), mean_loss(net, LossKind::loss2, data.field_val, stats)};
}

double selection_metric(const ValidationLoss& v, TrainMode mode) {
  if (mode == TrainMode::ill_posed_only) return v.loss2;
  double s = 0.0;
  if (!std::isnan(v.loss1)) s += v.loss1;
  if (!std::isnan(v.loss2)) s += v.loss2;
  return s;
}

TrainReport train(TrainState& state, const TrainingSet& data, const NormalizationStats& stats,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  using clock = std::chrono::steady_clock;
  cfg.validate();
  if (state.net.options().input_prescale != cfg.input_prescale) {
    throw ConfigError("input_prescale differs from the network being trained");
  }
  const auto start = clock::now();
  TrainReport report;
  std::ostringstream opt;
  opt << "adam(lr=" << format_double(cfg.learning_rate) << ", beta1=" << format_double(cfg.adam_beta1)
      << ", beta2=" << format_double(cfg.adam_beta2) << ", eps=" << format_double(cfg.adam_eps) << ")";
  report.optimizer = opt.str();

  if (state.epochs_done == 0 && std::isnan(state.initial_loss1_val)) {
    state.initial_loss1_val = validation_loss(state.net, data, stats).loss1;
  }
  report.initial_loss1_val = state.initial_loss1_val;

  auto run_batch = [&](LossKind kind, const std::vector<LossSample>& pool, const std::vector<std::size_t>& idx,
                       int epoch, int batch_no) {
    std::vector<NetInput> in;
    std::vector<const LossSample*> batch;
    in.reserve(idx.size());
    batch.reserve(idx.size());
    for (std::size_t i : idx) {
      in.push_back(pool[i].input);
      batch.push_back(&pool[i]);
    }
    const auto pred = state.net.forward(in, Mode::train);
    LossResult r;
    try {
      r = evaluate_loss(kind, pred, batch, stats, true);
    } catch (const NumericalError&) {
      throw NumericalError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                           std::to_string(batch_no) + " (parameter norm " +
                           format_double(parameter_norm(state.net)) + ")");
    }
    state.net.zero_grad();
    state.net.backward(r.grad);
    adam_update(state.net, state.adam, cfg);
    return r.value;
  };

  for (int epoch = state.epochs_done; epoch < cfg.epochs; ++epoch) {
    const auto t0 = clock::now();
    const auto plan = epoch_plan(data.sim_train.size(), data.field_train.size(), cfg, epoch);
    EpochLog log;
    log.epoch = epoch + 1;
    int batch_no = 0;
    double acc = 0.0;
    std::size_t seen = 0;
    for (const auto& b : plan.sim_batches) {
      acc += run_batch(LossKind::loss1, data.sim_train, b, epoch, ++batch_no) * static_cast<double>(b.size());
      seen += b.size();
    }
    if (seen > 0) log.loss1_train = acc / static_cast<double>(seen);
    acc = 0.0;
    seen = 0;
    for (const auto& b : plan.field_batches) {
      acc += run_batch(LossKind::loss2, data.field_train, b, epoch, ++batch_no) * static_cast<double>(b.size());
      seen += b.size();
    }
    if (seen > 0) log.loss2_train = acc / static_cast<double>(seen);

    const auto v = validation_loss(state.net, data, stats);
    log.loss1_val = v.loss1;
    log.loss2_val = v.loss2;
    log.loss_val = selection_metric(v, cfg.mode);
    state.epochs_done = epoch + 1;
    if (log.loss_val < state.best_val) {
      state.best_val = log.loss_val;
      state.best_epoch = epoch + 1;
      state.best = snapshot(state.net);
    }
    log.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    report.epochs.push_back(log);
    if (on_epoch) on_epoch(state, log);
  }
  report.best_epoch = state.best_epoch;
  report.best_val = state.best_val;
  report.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
  return report;
}

// ---- checkpoints -----------------------------------------------------------

namespace {

void write_doubles(std::ostream& out, const double* p, std::size_t n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::istream& in, double* p, std::size_t n, const std::string& path) {
  in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw FormatError("truncated checkpoint '" + path + "'");
}

// Manifest keys written by write_checkpoint itself.
bool reserved_manifest_key(const std::string& k) {
  static const char* const kKeys[] = {"format",        "version",    "architecture_hash", "input_prescale",
                                      "parameter_count", "grid_first_um", "grid_step_um", "grid_bands",
                                      "epoch",         "resumable",  "adam_step",         "adam_moments",
                                      "initial_loss1_val", "best_val", "best_epoch",      "best_snapshot"};
  return k.starts_with("stats.") || std::find(std::begin(kKeys), std::end(kKeys), k) != std::end(kKeys);
}

void write_checkpoint(const std::string& path, const TrainState& state, const NormalizationStats& stats,
                      bool resumable, const KeyValueConfig& extra) {
  const auto& grid = SpectralGrid::standard();
  const auto& net = state.net;
  if (resumable && state.adam.m.empty() && state.adam.step != 0) {
    throw DataError("optimizer state is missing");
  }
  KeyValueConfig m;
  m.add("format", "LWIRNN1");
  m.add("version", std::to_string(kFormatVersion));
  m.add("architecture_hash", hex64(net.architecture_hash()));
  m.add("input_prescale", net.options().input_prescale ? "true" : "false");
  m.add("parameter_count", std::to_string(net.parameter_count()));
  m.add("grid_first_um", format_double(grid.first()));
  m.add("grid_step_um", format_double(grid.step()));
  m.add("grid_bands", std::to_string(grid.size()));
  m.add("epoch", std::to_string(state.epochs_done));
  const auto stats_cfg = stats.to_config();
  for (const auto& [k, v] : stats_cfg.entries()) m.add("stats." + k, v);
  m.add("resumable", resumable ? "true" : "false");
  if (resumable) {
    m.add("adam_step", std::to_string(state.adam.step));
    m.add("adam_moments", state.adam.m.empty() ? "false" : "true");
    m.add("initial_loss1_val", format_double(state.initial_loss1_val));
    m.add("best_val", format_double(state.best_val));
    m.add("best_epoch", std::to_string(state.best_epoch));
    m.add("best_snapshot", state.best.empty() ? "false" : "true");
  }
  for (const auto& [k, v] : extra.entries()) {
    if (reserved_manifest_key(k)) throw ConfigError("checkpoint extra key '" + k + "' is reserved");
    m.add(k, v);
  }
  const std::string manifest = m.to_text();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out.write(kMagic, sizeof kMagic);
  const auto len = static_cast<std::uint64_t>(manifest.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  for (const nn::Param* p : net.params()) write_doubles(out, p->value.data(), static_cast<std::size_t>(p->size()));
  for (const Eigen::VectorXd* b : net.buffers()) write_doubles(out, b->data(), static_cast<std::size_t>(b->size()));
  if (resumable) {
    for (const auto& x : state.adam.m) write_doubles(out, x.data(), static_cast<std::size_t>(x.size()));
    for (const auto& x : state.adam.v) write_doubles(out, x.data(), static_cast<std::size_t>(x.size()));
    for (const auto& x : state.best) write_doubles(out, x.data(), static_cast<std::size_t>(x.size()));
  }
  out.flush();
  if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainState& state, const NormalizationStats& stats,
                     bool resumable, const KeyValueConfig& extra) {
  write_checkpoint(path, state, stats, resumable, extra);
}

void save_model(const std::string& path, const HybridNetwork& net, const NormalizationStats& stats,
                const KeyValueConfig& extra) {
  write_checkpoint(path, TrainState(net), stats, false, extra);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint '" + path + "'");
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw FormatError("'" + path + "' is not an LWIRNN1 checkpoint (bad magic)");
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (1u << 24)) throw FormatError("truncated or corrupt manifest in '" + path + "'");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw FormatError("truncated checkpoint '" + path + "'");

  try {
    const auto m = KeyValueConfig::parse(text);
    if (m.get("format") != "LWIRNN1" || m.get_int("version") != kFormatVersion) {
      throw FormatError("unsupported checkpoint version in '" + path + "'");
    }
    const SpectralGrid grid(m.get_double("grid_first_um"), m.get_double("grid_step_um"),
                            static_cast<std::size_t>(m.get_int("grid_bands")));
    if (!(grid == SpectralGrid::standard())) throw FormatError("checkpoint '" + path + "' uses a different grid");
    const bool prescale = m.get_bool_or("input_prescale", false);
    Checkpoint ck{TrainState(HybridNetwork(NetworkOptions{prescale})), NormalizationStats::from_config(m.with_prefix("stats.")), m, {}, false};
    auto& net = ck.state.net;
    if (hex64(net.architecture_hash()) != m.get("architecture_hash")) {
      throw FormatError("architecture hash mismatch in '" + path + "'");
    }
    for (nn::Param* p : net.params()) read_doubles(in, p->value.data(), static_cast<std::size_t>(p->size()), path);
    for (Eigen::VectorXd* b : net.buffers()) read_doubles(in, b->data(), static_cast<std::size_t>(b->size()), path);
    for (const auto& [k, v] : m.entries()) {
      if (!reserved_manifest_key(k)) ck.extra.add(k, v);
    }
    ck.state.epochs_done = static_cast<int>(m.get_int("epoch"));
    ck.resumable = m.get_bool_or("resumable", false);
    if (ck.resumable) {
      auto& st = ck.state;
      st.adam.step = m.get_int("adam_step");
      st.initial_loss1_val = m.get_double("initial_loss1_val");
      st.best_val = m.get_double("best_val");
      st.best_epoch = static_cast<int>(m.get_int("best_epoch"));
      if (m.get_bool_or("adam_moments", false)) {
        for (int pass = 0; pass < 2; ++pass) {
          auto& dst = pass == 0 ? st.adam.m : st.adam.v;
          for (const nn::Param* p : net.params()) {
            nn::Mat x(p->value.rows(), p->value.cols());
            read_doubles(in, x.data(), static_cast<std::size_t>(x.size()), path);
            dst.push_back(std::move(x));
          }
        }
      }
      if (m.get_bool_or("best_snapshot", false)) {
        for (const nn::Param* p : net.params()) {
          Eigen::VectorXd x(p->size());
          read_doubles(in, x.data(), static_cast<std::size_t>(x.size()), path);
          st.best.push_back(std::move(x));
        }
        for (const Eigen::VectorXd* b : net.buffers()) {
          Eigen::VectorXd x(b->size());
          read_doubles(in, x.data(), static_cast<std::size_t>(x.size()), path);
          st.best.push_back(std::move(x));
        }
      }
    }
    in.peek();
    if (!in.eof()) throw FormatError("trailing bytes in checkpoint '" + path + "'");
    return ck;
  } catch (const ConfigError& e) {
    throw FormatError("bad checkpoint manifest in '" + path + "': " + e.what());
  }
}

}  // namespace lwir
