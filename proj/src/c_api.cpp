#include "lwir.h"

#include <cmath>
#include <cstring>
#include <memory>
#include <mutex>
#include <new>
#include <string>

#include "lwir/commands.hpp"
#include "lwir/errors.hpp"
#include "lwir/evaluation.hpp"
#include "lwir/retrieval.hpp"
#include "lwir/training.hpp"

struct lwir_dataset {
  lwir::Dataset ds;
};

struct lwir_model {
  lwir::Checkpoint ck;
};

struct lwir_options {
  lwir::CommandOptions opt;
};

namespace {

thread_local std::string g_last_error;

std::mutex g_log_mu;
lwir_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

lwir_status fail(lwir_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

// Maps exceptions to status codes; every entry point goes through here.
template <class Fn>
lwir_status guard(Fn fn) {
  g_last_error.clear();
  try {
    fn();
    return LWIR_OK;
  } catch (const lwir::Error& e) {
    return fail(static_cast<lwir_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(LWIR_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(LWIR_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(LWIR_ERR_INTERNAL, "unknown error");
  }
}

struct InvalidArgument : lwir::Error {
  explicit InvalidArgument(const std::string& what) : lwir::Error(LWIR_ERR_INVALID_ARGUMENT, what) {}
};

void need(const void* p, const char* name) {
  if (p == nullptr) throw InvalidArgument(std::string(name) + " is NULL");
}

const lwir::SpectralGrid& grid() { return lwir::SpectralGrid::standard(); }

Eigen::VectorXd vec(const double* p) {
  return Eigen::Map<const Eigen::VectorXd>(p, static_cast<Eigen::Index>(grid().size()));
}

lwir::TesInput tes_input(const double* total, const double* down, const double* up, const double* tau) {
  need(total, "total");
  need(down, "down");
  need(up, "up");
  need(tau, "tau");
  return {vec(total), vec(down), vec(up), vec(tau)};
}

const lwir::SampleRecord& record_at(const lwir_dataset* ds, size_t i) {
  need(ds, "dataset");
  if (i >= ds->ds.records.size()) {
    throw InvalidArgument("record index " + std::to_string(i) + " out of range (" +
                          std::to_string(ds->ds.records.size()) + " records)");
  }
  return ds->ds.records[i];
}

lwir::CommandOptions options_of(const lwir_options* o) {
  lwir::CommandOptions opt = o ? o->opt : lwir::CommandOptions{};
  opt.log = [](const std::string& line) {
    std::lock_guard lock(g_log_mu);
    if (g_log_fn) g_log_fn(line.c_str(), g_log_user);
  };
  return opt;
}

std::string str(const char* s) { return s ? s : ""; }

}  // namespace

extern "C" {

const char* lwir_version(void) { return lwir::kVersion; }

const char* lwir_last_error(void) { return g_last_error.c_str(); }

const char* lwir_status_string(lwir_status s) {
  switch (s) {
    case LWIR_OK: return "ok";
    case LWIR_ERR_CONFIG: return "configuration error";
    case LWIR_ERR_DATA: return "data error";
    case LWIR_ERR_NUMERICAL: return "numerical error";
    case LWIR_ERR_DOMAIN: return "domain error";
    case LWIR_ERR_IO: return "i/o error";
    case LWIR_ERR_INVALID_ARGUMENT: return "invalid argument";
    case LWIR_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

size_t lwir_band_count(void) { return grid().size(); }

lwir_status lwir_wavelengths(double* out_um) {
  return guard([&] {
    need(out_um, "out_um");
    for (size_t i = 0; i < grid().size(); ++i) out_um[i] = grid()[i];
  });
}

lwir_status lwir_planck(double wavelength_um, double temperature_k, double* out) {
  return guard([&] {
    need(out, "out");
    *out = lwir::planck_radiance(wavelength_um, temperature_k);
  });
}

lwir_status lwir_inverse_planck(double wavelength_um, double radiance, double* out_k) {
  return guard([&] {
    need(out_k, "out_k");
    *out_k = lwir::inverse_planck(wavelength_um, radiance);
  });
}

lwir_status lwir_invert_emissivity(const double* total, const double* down, const double* up, const double* tau,
                                   double temperature_k, double* eps_out, uint8_t* valid_out) {
  return guard([&] {
    need(eps_out, "eps_out");
    const auto e = lwir::invert_emissivity(tes_input(total, down, up, tau), temperature_k, grid());
    for (size_t i = 0; i < grid().size(); ++i) {
      eps_out[i] = e.values(static_cast<Eigen::Index>(i));
      if (valid_out) valid_out[i] = e.valid[i] ? 1 : 0;
    }
  });
}

lwir_status lwir_grid_search_temperature(const double* total, const double* down, const double* up,
                                         const double* tau, double eps_bar, double t_min, double t_max, double t_step,
                                         const char* criterion, int window, double* t_hat, double* eps_out) {
  return guard([&] {
    need(t_hat, "t_hat");
    const lwir::TemperatureGrid tg{t_min, t_max, t_step};
    tg.validate();
    const auto crit = lwir::parse_tes_criterion(criterion ? criterion : "mae");
    const auto w = window ? lwir::BandWindow::restricted() : lwir::BandWindow::full();
    const auto r = lwir::grid_search_temperature(tes_input(total, down, up, tau), eps_bar, tg, crit, w, grid());
    *t_hat = r.t_hat;
    if (eps_out) {
      for (size_t i = 0; i < grid().size(); ++i) eps_out[i] = r.emissivity.values(static_cast<Eigen::Index>(i));
    }
  });
}

lwir_status lwir_dataset_read(const char* path, lwir_dataset** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    auto h = std::make_unique<lwir_dataset>();
    h->ds = lwir::read_dataset(path);
    *out = h.release();
  });
}

lwir_status lwir_dataset_write(const lwir_dataset* ds, const char* path) {
  return guard([&] {
    need(ds, "dataset");
    need(path, "path");
    lwir::write_dataset(ds->ds, path);
  });
}

void lwir_dataset_free(lwir_dataset* ds) { delete ds; }

lwir_status lwir_dataset_size(const lwir_dataset* ds, size_t* out) {
  return guard([&] {
    need(ds, "dataset");
    need(out, "out");
    *out = ds->ds.records.size();
  });
}

lwir_status lwir_dataset_record(const lwir_dataset* ds, size_t index, lwir_record_info* out) {
  return guard([&] {
    need(out, "out");
    const auto& r = record_at(ds, index);
    lwir_record_info info{};
    info.range_m = r.geometry().range_m;
    info.angle_deg = r.geometry().angle_deg;
    info.labeled = r.labeled() ? 1 : 0;
    info.material_id = r.labeled() ? r.material_id() : -1;
    info.temperature = r.labeled() ? r.temperature() : std::nan("");
    info.field_like = r.source() == lwir::Source::field_like ? 1 : 0;
    for (auto c : lwir::kAllComponents) info.has_component[static_cast<int>(c)] = r.has(c) ? 1 : 0;
    *out = info;
  });
}

lwir_status lwir_dataset_spectrum(const lwir_dataset* ds, size_t index, lwir_component c, double* out) {
  return guard([&] {
    need(out, "out");
    if (c < LWIR_TAU || c > LWIR_TOTAL) throw InvalidArgument("unknown component");
    const auto& s = record_at(ds, index).component(static_cast<lwir::Component>(c));
    std::memcpy(out, s.vec().data(), s.size() * sizeof(double));
  });
}

lwir_status lwir_dataset_emissivity(const lwir_dataset* ds, int32_t material_id, double* out) {
  return guard([&] {
    need(ds, "dataset");
    need(out, "out");
    const auto& s = ds->ds.material(material_id).emissivity;
    std::memcpy(out, s.vec().data(), s.size() * sizeof(double));
  });
}

lwir_status lwir_model_load(const char* path, lwir_model** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    *out = new lwir_model{lwir::load_checkpoint(path)};
  });
}

void lwir_model_free(lwir_model* m) { delete m; }

lwir_status lwir_model_parameter_count(const lwir_model* m, size_t* out) {
  return guard([&] {
    need(m, "model");
    need(out, "out");
    *out = m->ck.state.net.parameter_count();
  });
}

lwir_status lwir_model_predict(const lwir_model* m, const double* range_m, const double* angle_deg, size_t n,
                               int workers, double* down, double* up, double* tau) {
  return guard([&] {
    need(m, "model");
    if (n == 0) return;
    need(range_m, "range_m");
    need(angle_deg, "angle_deg");
    need(down, "down");
    need(up, "up");
    need(tau, "tau");
    std::vector<lwir::Geometry> geoms(n);
    for (size_t i = 0; i < n; ++i) {
      geoms[i] = {range_m[i], angle_deg[i]};
      geoms[i].validate();
    }
    const auto p = lwir::predict_components(m->ck.state.net, m->ck.stats, geoms, workers);
    const size_t b = grid().size();
    for (size_t i = 0; i < n; ++i) {
      std::memcpy(down + i * b, p[i].down.data(), b * sizeof(double));
      std::memcpy(up + i * b, p[i].up.data(), b * sizeof(double));
      std::memcpy(tau + i * b, p[i].tau.data(), b * sizeof(double));
    }
  });
}

lwir_status lwir_options_new(lwir_options** out) {
  return guard([&] {
    need(out, "out");
    *out = new lwir_options{};
  });
}

void lwir_options_free(lwir_options* o) { delete o; }

lwir_status lwir_options_set(lwir_options* o, const char* key, const char* value) {
  return guard([&] {
    need(o, "options");
    need(key, "key");
    need(value, "value");
    const std::string k = key, v = value;
    auto& opt = o->opt;
    if (k == "seed") {
      const auto s = lwir::parse_int(v, "seed");
      if (s < 0) throw lwir::ConfigError("seed must be non-negative");
      opt.seed = static_cast<std::uint64_t>(s);
    } else if (k == "force") {
      if (v != "0" && v != "1" && v != "true" && v != "false") throw lwir::ConfigError("force must be true or false");
      opt.force = v == "1" || v == "true";
    } else if (k == "workers") {
      const auto w = lwir::parse_int(v, "workers");
      if (w < 1) throw lwir::ConfigError("workers must be at least 1");
      opt.workers = static_cast<int>(w);
    } else if (k == "mode") {
      lwir::parse_train_mode(v);
      opt.mode = v;
    } else if (k == "epochs") {
      const auto e = lwir::parse_int(v, "epochs");
      if (e < 1) throw lwir::ConfigError("epochs must be at least 1");
      opt.epochs = static_cast<int>(e);
    } else if (k == "from_checkpoint") {
      opt.from_checkpoint = v;
    } else if (k == "criterion") {
      lwir::parse_tes_criterion(v);
      opt.criterion = v;
    } else if (k == "t_grid") {
      lwir::TemperatureGrid::parse(v);
      opt.t_grid = v;
    } else if (k == "eps_bar") {
      opt.eps_bar = lwir::parse_double(v, "eps_bar");
    } else {
      throw lwir::ConfigError("unknown option '" + k + "'");
    }
  });
}

void lwir_set_log_callback(lwir_log_fn fn, void* user) {
  std::lock_guard lock(g_log_mu);
  g_log_fn = fn;
  g_log_user = user;
}

lwir_status lwir_cmd_simulate(const char* config_path, const char* out_dir, const lwir_options* opts) {
  return guard([&] {
    need(out_dir, "out_dir");
    lwir::cmd_simulate(str(config_path), out_dir, options_of(opts));
  });
}

lwir_status lwir_cmd_train(const char* config_path, const char* data_dir, const char* out_dir,
                           const lwir_options* opts) {
  return guard([&] {
    need(data_dir, "data_dir");
    need(out_dir, "out_dir");
    lwir::cmd_train(str(config_path), data_dir, out_dir, options_of(opts));
  });
}

lwir_status lwir_cmd_retrieve(const char* checkpoint, const char* data, const char* out_dir,
                              const lwir_options* opts) {
  return guard([&] {
    need(checkpoint, "checkpoint");
    need(data, "data");
    need(out_dir, "out_dir");
    lwir::cmd_retrieve(checkpoint, data, out_dir, options_of(opts));
  });
}

lwir_status lwir_cmd_evaluate(const char* checkpoint, const char* data_dir, const char* out_dir,
                              const lwir_options* opts) {
  return guard([&] {
    need(checkpoint, "checkpoint");
    need(data_dir, "data_dir");
    need(out_dir, "out_dir");
    lwir::cmd_evaluate(checkpoint, data_dir, out_dir, options_of(opts));
  });
}

}  // extern "C"
