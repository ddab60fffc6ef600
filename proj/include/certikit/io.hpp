#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "certikit/bounds.hpp"
#include "certikit/lagrangian.hpp"
#include "certikit/model.hpp"
#include "certikit/solver.hpp"

namespace certikit {

using Json = nlohmann::json;

/// ModelFile: versioned JSON document with dense and conv2d layers; the
/// readout carries activation "none", hidden layers "relu".
Network load_model(const std::string& path);
Network network_from_json(const Json& doc);
Json network_to_json(const Network& network);
void save_model(const Network& network, const std::string& path);

/// Input/target vectors: either a bare JSON array or {"values": [...]}.
Vector load_vector(const std::string& path);
Vector vector_from_json(const Json& doc, const std::string& field);

/// Bounds file: same container format as models, one array pair per block.
LayerBounds load_bounds(const std::string& path, const Network& network);
void save_bounds(const LayerBounds& bounds, const std::string& path);

DualState load_duals(const std::string& path, const Network& network);
void save_duals(const DualState& duals, const std::string& path);

/// Flat key-value config document mirroring SolverConfig; "preset": "mlp"
/// applies the MLP preset before the remaining keys override.
SolverConfig config_from_json(const Json& doc);
SolverConfig load_config(const std::string& path);
Json config_to_json(const SolverConfig& config);
/// FNV-1a digest of the canonical serialized config, for provenance.
std::string config_digest(const SolverConfig& config);

struct ReportRecord {
  std::string instance_id;
  std::string spec;  // "robustness", "latent", or "summary"
  std::optional<Index> target;
  std::optional<double> pgd_lower;
  std::optional<double> bound_initial;
  std::optional<double> bound_certified;
  std::optional<double> bound_estimate_final;
  std::optional<double> ibp_bound;
  int iterations = 0;
  double wall_time_s = 0.0;
  std::string verdict;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::optional<Vector> witness;

  Json to_json() const;
};

/// Single serialization point for JSONL reports.
class ReportWriter {
 public:
  explicit ReportWriter(const std::string& path);
  void write(const ReportRecord& record);

 private:
  std::ofstream out_;
};

}  // namespace certikit
