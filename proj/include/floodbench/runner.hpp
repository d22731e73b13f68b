#pragma once

#include "floodbench/config.hpp"

namespace floodbench {

// Subcommand bodies. Each validates its config, performs the work, and
// writes artifacts under the configured output locations; failures surface
// as the typed errors the CLI maps to exit codes.
void run_synth(const RunConfig& config);
void run_train(const RunConfig& config);
void run_ssl(const RunConfig& config);
void run_eval(const RunConfig& config);
void run_benchmark(const RunConfig& config);
void run_gradcheck(const RunConfig& config);

}  // namespace floodbench
