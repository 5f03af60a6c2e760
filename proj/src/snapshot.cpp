#include "sfspec/snapshot.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "sfspec/errors.hpp"

namespace sfspec {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.values()}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  auto data = j.at("data").get<std::vector<double>>();
  if (rows == 0 && cols == 0 && data.empty()) return Matrix();
  if (data.size() != rows * cols) throw ConfigError("snapshot: matrix data does not match its shape");
  return Matrix(rows, cols, std::move(data));
}

json state_to_json(const ParamState& s) {
  json j;
  j["kind"] = std::string(to_string(s.kind));
  j["mode"] = std::string(to_string(s.mode));
  j["step"] = s.step;
  j["avg"] = json{{"weight_sum", s.avg.weight_sum}, {"t", s.avg.t}};
  j["live"] = matrix_to_json(s.live);
  j["z"] = matrix_to_json(s.z);
  j["mom"] = matrix_to_json(s.mom);
  j["v"] = matrix_to_json(s.v);
  j["x"] = s.x ? matrix_to_json(*s.x) : json(nullptr);
  return j;
}

ParamState state_from_json(const json& j) {
  ParamState s;
  s.kind = parse_optimizer_kind(j.at("kind").get<std::string>());
  const auto mode = j.at("mode").get<std::string>();
  if (mode != "train" && mode != "eval") throw ConfigError("snapshot: bad mode '" + mode + "'");
  s.mode = mode == "train" ? Mode::train : Mode::eval;
  s.step = j.at("step").get<std::int64_t>();
  s.avg.weight_sum = j.at("avg").at("weight_sum").get<double>();
  s.avg.t = j.at("avg").at("t").get<std::int64_t>();
  s.live = matrix_from_json(j.at("live"));
  s.z = matrix_from_json(j.at("z"));
  s.mom = matrix_from_json(j.at("mom"));
  s.v = matrix_from_json(j.at("v"));
  if (!j.at("x").is_null()) s.x = matrix_from_json(j.at("x"));
  if (!s.z.empty()) require_same_shape(s.live, s.z, "snapshot z");
  if (!s.mom.empty()) require_same_shape(s.live, s.mom, "snapshot mom");
  return s;
}

json envelope(json states) {
  return json{{"format", kSnapshotFormat}, {"version", kSnapshotVersion}, {"states", std::move(states)}};
}

json open_envelope(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("snapshot: ") + e.what());
  }
  if (j.value("format", "") != kSnapshotFormat) throw ConfigError("snapshot: unknown format tag");
  if (j.value("version", -1) != kSnapshotVersion) throw ConfigError("snapshot: unsupported version");
  return j.at("states");
}

}  // namespace

std::string serialize_state(const ParamState& s) { return serialize_states({s}); }

ParamState deserialize_state(const std::string& text) {
  auto states = deserialize_states(text);
  if (states.size() != 1) throw ConfigError("snapshot: expected exactly one state");
  return std::move(states.front());
}

std::string serialize_states(const std::vector<ParamState>& states) {
  json arr = json::array();
  for (const auto& s : states) arr.push_back(state_to_json(s));
  return envelope(std::move(arr)).dump();
}

std::vector<ParamState> deserialize_states(const std::string& text) {
  std::vector<ParamState> out;
  try {
    for (const auto& j : open_envelope(text)) out.push_back(state_from_json(j));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("snapshot: ") + e.what());
  }
  return out;
}

void save_snapshot(const std::string& path, const std::vector<ParamState>& states) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << serialize_states(states);
  if (!f) throw std::runtime_error("failed writing " + path);
}

std::vector<ParamState> load_snapshot(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return deserialize_states(ss.str());
}

}  // namespace sfspec
