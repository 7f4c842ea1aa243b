#include "aerotrack_c.h"

#include <cstring>
#include <string>

#include "aerotrack/errors.hpp"
#include "aerotrack/pipeline.hpp"

struct at_pipeline {
  aerotrack::Pipeline pipeline{aerotrack::PipelineConfig::defaults()};
  std::string last_error;
};

namespace {

int guard(at_pipeline* p, const std::function<void()>& body) {
  try {
    body();
    p->last_error.clear();
    return AT_OK;
  } catch (const aerotrack::Error& e) {
    p->last_error = e.what();
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    p->last_error = e.what();
    return AT_ERR_INTERNAL;
  } catch (...) {
    p->last_error = "unknown error";
    return AT_ERR_INTERNAL;
  }
}

}  // namespace

extern "C" {

const char* at_version(void) { return "0.1.0"; }

at_pipeline* at_pipeline_new(void) {
  try {
    return new at_pipeline();
  } catch (...) {
    return nullptr;
  }
}

void at_pipeline_free(at_pipeline* p) { delete p; }

int at_pipeline_load_config(at_pipeline* p, const char* path) {
  if (!p || !path) return AT_ERR_CONFIG;
  return guard(p, [&] {
    auto cfg = aerotrack::PipelineConfig::load(path);
    p->pipeline = aerotrack::Pipeline(std::move(cfg));
  });
}

int at_pipeline_set(at_pipeline* p, const char* key, const char* value) {
  if (!p || !key || !value) return AT_ERR_CONFIG;
  return guard(p, [&] { p->pipeline.config().set(key, value); });
}

int at_pipeline_dump_config(const at_pipeline* p, char* buf, size_t cap, size_t* needed) {
  if (!p) return AT_ERR_CONFIG;
  const std::string dump = p->pipeline.config().dump();
  if (needed) *needed = dump.size() + 1;
  if (buf && cap > 0) {
    const size_t n = dump.size() < cap - 1 ? dump.size() : cap - 1;
    std::memcpy(buf, dump.data(), n);
    buf[n] = '\0';
  }
  return AT_OK;
}

int at_pipeline_run(at_pipeline* p, const char* stage) {
  if (!p || !stage) return AT_ERR_CONFIG;
  return guard(p, [&] { p->pipeline.run(stage); });
}

const char* at_pipeline_error(const at_pipeline* p) { return p ? p->last_error.c_str() : ""; }

int at_pipeline_metric(const at_pipeline* p, const char* name, double* out) {
  if (!p || !name || !out) return AT_ERR_CONFIG;
  const auto& metrics = p->pipeline.metrics();
  const auto it = metrics.find(name);
  if (it == metrics.end()) return AT_ERR_CONFIG;
  *out = it->second;
  return AT_OK;
}

}  // extern "C"
