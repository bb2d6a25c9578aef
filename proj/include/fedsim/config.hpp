#pragma once

#include <string>
#include <vector>

#include "fedsim/engine.hpp"

namespace fedsim {

/// Parses the flat key-value experiment format.  Global keys come first;
/// each `[algorithm LABEL]` section opens one algorithm entry.  Errors carry
/// the offending line number (ParseError) or key (ValidationError).
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

/// Reads and parses a config file.
ExperimentConfig parse_config(const std::string& path);

/// Canonical text rendering; parse_config_text(encode_config(c)) reproduces
/// c exactly, including real values bit for bit.
std::string encode_config(const ExperimentConfig& config);

std::vector<std::string> preset_names();

/// The stored text of a named built-in experiment; throws UnknownPreset.
std::string preset_text(const std::string& name);

/// Parsed built-in experiment.
ExperimentConfig preset(const std::string& name);

/// Writes simulation output as CSV with header
/// replicate,round,algorithm,dist_true,dist_surrogate,grad_norm_sq,chi_square,eta_eff,t_eff
/// sorted by (replicate, round, algorithm); reals use the shortest decimal
/// form that round-trips.
void emit_csv(const std::vector<AlgorithmRun>& runs, const std::string& path);

/// CSV body as a string (same contract as emit_csv, without the file I/O).
std::string render_csv(const std::vector<AlgorithmRun>& runs);

}  // namespace fedsim
