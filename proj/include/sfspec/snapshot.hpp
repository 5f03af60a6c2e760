#pragma once

#include <string>
#include <vector>

#include "sfspec/optimizers.hpp"

namespace sfspec {

inline constexpr const char* kSnapshotFormat = "sfspec.param_state";
inline constexpr int kSnapshotVersion = 1;

/// JSON text holding every buffer of the state. Doubles are written in
/// shortest round-trip form, so loading reproduces the state bit for bit.
std::string serialize_state(const ParamState& s);
ParamState deserialize_state(const std::string& text);

std::string serialize_states(const std::vector<ParamState>& states);
std::vector<ParamState> deserialize_states(const std::string& text);

void save_snapshot(const std::string& path, const std::vector<ParamState>& states);
std::vector<ParamState> load_snapshot(const std::string& path);

}  // namespace sfspec
