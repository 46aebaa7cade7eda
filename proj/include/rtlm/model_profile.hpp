#pragma once

#include <array>
#include <string>

#include "error.hpp"

namespace rtlm {

// Per-LM calibration consumed by the scheduler and the latency model.
struct ModelProfile {
  std::string name = "custom";
  double eta = 0.05;              // seconds per output token
  double mu = 0.08;               // seconds per input token, deadline coefficient
  int batch_size = 11;            // C_f
  double tau = 35.0;              // malicious threshold, tokens
  double u_max = 0.0;             // normalization ceiling, set by profiling (0 = unset)
  double base_latency_gpu = 0.1;  // seconds
  double batch_setup = 0.05;      // seconds
  double cpu_slowdown = 5.0;      // gamma >= 1

  void validate() const {
    if (!(eta > 0.0) || !(mu > 0.0)) throw ConfigError("profile '" + name + "': eta and mu must be > 0");
    if (batch_size < 1) throw ConfigError("profile '" + name + "': batch size must be >= 1");
    if (!(tau > 0.0)) throw ConfigError("profile '" + name + "': tau must be > 0");
    if (u_max < 0.0) throw ConfigError("profile '" + name + "': u_max must be >= 0");
    if (base_latency_gpu < 0.0 || batch_setup < 0.0) {
      throw ConfigError("profile '" + name + "': latencies must be >= 0");
    }
    if (!(cpu_slowdown >= 1.0)) throw ConfigError("profile '" + name + "': cpu slowdown must be >= 1");
  }

  friend bool operator==(const ModelProfile&, const ModelProfile&) = default;
};

}  // namespace rtlm
