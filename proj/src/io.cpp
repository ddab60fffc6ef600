#include "certikit/io.hpp"

#include <iomanip>
#include <sstream>

namespace certikit {

namespace {

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  Json doc;
  try {
    in >> doc;
  } catch (const Json::parse_error& err) {
    throw Error("malformed JSON in " + path + ": " + err.what());
  }
  return doc;
}

const Json& require(const Json& doc, const std::string& field, const std::string& context) {
  auto it = doc.find(field);
  if (it == doc.end()) throw Error(context + ": missing field \"" + field + "\"");
  return *it;
}

Vector parse_vector(const Json& arr, const std::string& context) {
  if (!arr.is_array()) throw Error(context + ": expected an array");
  Vector v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw Error(context + "[" + std::to_string(i) + "]: not a number");
    v[static_cast<Index>(i)] = arr[i].get<double>();
  }
  return v;
}

Json vector_to_json(const Eigen::Ref<const Vector>& v) {
  Json arr = Json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Matrix parse_matrix(const Json& rows, const std::string& context) {
  if (!rows.is_array() || rows.empty()) throw Error(context + ": expected a non-empty 2-D array");
  const size_t cols = rows[0].is_array() ? rows[0].size() : 0;
  if (cols == 0) throw Error(context + ": rows must be non-empty arrays");
  Matrix m(rows.size(), cols);
  for (size_t r = 0; r < rows.size(); ++r) {
    if (!rows[r].is_array() || rows[r].size() != cols) {
      std::ostringstream os;
      os << context << " row " << r << ": has " << rows[r].size() << " entries, expected " << cols;
      throw Error(os.str());
    }
    for (size_t c = 0; c < cols; ++c)
      m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c].get<double>();
  }
  return m;
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index r = 0; r < m.rows(); ++r) rows.push_back(vector_to_json(m.row(r)));
  return rows;
}

AffineMap parse_layer(const Json& doc, const std::string& context, const std::string& activation) {
  const std::string got = require(doc, "activation", context).get<std::string>();
  if (got != activation)
    throw Error(context + ".activation: expected \"" + activation + "\", got \"" + got + "\"");
  const std::string type = require(doc, "type", context).get<std::string>();
  if (type == "dense") {
    return AffineMap::dense(parse_matrix(require(doc, "weights", context), context + ".weights"),
                            parse_vector(require(doc, "bias", context), context + ".bias"));
  }
  if (type == "conv2d") {
    const Json& kernel = require(doc, "kernel", context);
    const Json& stride = require(doc, "stride", context);
    const Json& padding = require(doc, "padding", context);
    const Json& shape = require(doc, "input_shape", context);
    if (!kernel.is_array() || kernel.empty()) throw Error(context + ".kernel: expected 4-D array");
    if (!stride.is_array() || stride.size() != 2) throw Error(context + ".stride: expected [sh, sw]");
    if (!padding.is_array() || padding.size() != 2)
      throw Error(context + ".padding: expected [ph, pw]");
    if (!shape.is_array() || shape.size() != 3)
      throw Error(context + ".input_shape: expected [c, h, w]");
    AffineMap::ConvSpec spec;
    spec.out_channels = static_cast<Index>(kernel.size());
    spec.in_channels = static_cast<Index>(kernel[0].size());
    spec.kernel_h = static_cast<Index>(kernel[0][0].size());
    spec.kernel_w = static_cast<Index>(kernel[0][0][0].size());
    spec.stride_h = stride[0].get<Index>();
    spec.stride_w = stride[1].get<Index>();
    spec.pad_h = padding[0].get<Index>();
    spec.pad_w = padding[1].get<Index>();
    if (shape[0].get<Index>() != spec.in_channels)
      throw Error(context + ".input_shape: channels do not match kernel");
    spec.in_h = shape[1].get<Index>();
    spec.in_w = shape[2].get<Index>();
    Vector flat(spec.out_channels * spec.in_channels * spec.kernel_h * spec.kernel_w);
    Index pos = 0;
    for (const Json& per_oc : kernel)
      for (const Json& per_ic : per_oc) {
        const Matrix plane = parse_matrix(per_ic, context + ".kernel");
        if (plane.rows() != spec.kernel_h || plane.cols() != spec.kernel_w)
          throw Error(context + ".kernel: ragged kernel planes");
        for (Index r = 0; r < spec.kernel_h; ++r)
          for (Index c = 0; c < spec.kernel_w; ++c) flat[pos++] = plane(r, c);
      }
    return AffineMap::conv2d(spec, std::move(flat),
                             parse_vector(require(doc, "bias", context), context + ".bias"));
  }
  throw Error(context + ".type: unknown layer type \"" + type + "\"");
}

Json layer_to_json(const AffineMap& map, const std::string& activation) {
  Json doc;
  doc["activation"] = activation;
  if (map.kind() == AffineMap::Kind::Dense) {
    doc["type"] = "dense";
    doc["weights"] = matrix_to_json(map.dense_weight());
    doc["bias"] = vector_to_json(map.bias());
    return doc;
  }
  const AffineMap::ConvSpec& spec = map.conv_spec();
  doc["type"] = "conv2d";
  Json kernel = Json::array();
  Index pos = 0;
  const Vector& flat = map.conv_kernel();
  for (Index oc = 0; oc < spec.out_channels; ++oc) {
    Json per_oc = Json::array();
    for (Index ic = 0; ic < spec.in_channels; ++ic) {
      Json plane = Json::array();
      for (Index r = 0; r < spec.kernel_h; ++r) {
        Json row = Json::array();
        for (Index c = 0; c < spec.kernel_w; ++c) row.push_back(flat[pos++]);
        plane.push_back(std::move(row));
      }
      per_oc.push_back(std::move(plane));
    }
    kernel.push_back(std::move(per_oc));
  }
  doc["kernel"] = std::move(kernel);
  doc["bias"] = vector_to_json(map.bias());
  doc["stride"] = Json::array({spec.stride_h, spec.stride_w});
  doc["padding"] = Json::array({spec.pad_h, spec.pad_w});
  doc["input_shape"] = Json::array({spec.in_channels, spec.in_h, spec.in_w});
  return doc;
}

}  // namespace

Network network_from_json(const Json& doc) {
  const int version = require(doc, "version", "model").get<int>();
  if (version != 1) throw Error("model.version: unsupported version " + std::to_string(version));
  const Index input_dim = require(doc, "input_dim", "model").get<Index>();
  const Json& layers = require(doc, "layers", "model");
  if (!layers.is_array()) throw Error("model.layers: expected an array");
  std::vector<AffineMap> hidden;
  for (size_t i = 0; i < layers.size(); ++i)
    hidden.push_back(parse_layer(layers[i], "model.layers[" + std::to_string(i) + "]", "relu"));
  AffineMap readout = parse_layer(require(doc, "readout", "model"), "model.readout", "none");
  return Network(input_dim, std::move(hidden), std::move(readout));
}

Network load_model(const std::string& path) { return network_from_json(load_json_file(path)); }

Json network_to_json(const Network& network) {
  Json doc;
  doc["version"] = 1;
  doc["input_dim"] = network.input_dim();
  Json layers = Json::array();
  for (const AffineMap& layer : network.hidden()) layers.push_back(layer_to_json(layer, "relu"));
  doc["layers"] = std::move(layers);
  doc["readout"] = layer_to_json(network.readout(), "none");
  return doc;
}

void save_model(const Network& network, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path);
  out << network_to_json(network).dump(2) << "\n";
}

Vector vector_from_json(const Json& doc, const std::string& field) {
  if (doc.is_array()) return parse_vector(doc, field);
  if (doc.is_object() && doc.contains("values")) return parse_vector(doc["values"], field);
  throw Error(field + ": expected an array or {\"values\": [...]}");
}

Vector load_vector(const std::string& path) {
  return vector_from_json(load_json_file(path), path);
}

LayerBounds load_bounds(const std::string& path, const Network& network) {
  const Json doc = load_json_file(path);
  const int version = require(doc, "version", "bounds").get<int>();
  if (version != 1) throw Error("bounds.version: unsupported version " + std::to_string(version));
  const Json& blocks = require(doc, "blocks", "bounds");
  if (!blocks.is_array()) throw Error("bounds.blocks: expected an array");
  std::vector<Vector> lower, upper;
  for (size_t b = 0; b < blocks.size(); ++b) {
    const std::string context = "bounds.blocks[" + std::to_string(b) + "]";
    lower.push_back(parse_vector(require(blocks[b], "lower", context), context + ".lower"));
    upper.push_back(parse_vector(require(blocks[b], "upper", context), context + ".upper"));
  }
  return import_bounds(lower, upper, network);
}

void save_bounds(const LayerBounds& bounds, const std::string& path) {
  Json doc;
  doc["version"] = 1;
  Json blocks = Json::array();
  for (size_t b = 0; b < bounds.lower.size(); ++b) {
    Json block;
    block["lower"] = vector_to_json(bounds.lower[b]);
    block["upper"] = vector_to_json(bounds.upper[b]);
    blocks.push_back(std::move(block));
  }
  doc["blocks"] = std::move(blocks);
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path);
  out << doc.dump(2) << "\n";
}

DualState load_duals(const std::string& path, const Network& network) {
  const Json doc = load_json_file(path);
  DualState state = DualState::zeros(network);
  auto fill = [&](const char* field, std::vector<Vector>& family) {
    const Json& arr = require(doc, field, "duals");
    if (!arr.is_array() || arr.size() != family.size())
      throw Error(std::string("duals.") + field + ": expected " +
                  std::to_string(family.size()) + " blocks");
    for (size_t i = 0; i < family.size(); ++i) {
      const std::string context = std::string("duals.") + field + "[" + std::to_string(i) + "]";
      Vector v = parse_vector(arr[i], context);
      if (v.size() != family[i].size())
        throw Error(context + ": has " + std::to_string(v.size()) + " entries, expected " +
                    std::to_string(family[i].size()));
      family[i] = std::move(v);
    }
  };
  fill("lambda_a", state.lambda_a);
  fill("lambda_b", state.lambda_b);
  fill("lambda_c", state.lambda_c);
  fill("lambda_d", state.lambda_d);
  Vector kappa = parse_vector(require(doc, "kappa", "duals"), "duals.kappa");
  if (kappa.size() != state.kappa.size())
    throw Error("duals.kappa: has " + std::to_string(kappa.size()) + " entries, expected " +
                std::to_string(state.kappa.size()));
  state.kappa = std::move(kappa);
  if (!state.nonnegative()) throw Error("duals: negative multiplier");
  return state;
}

void save_duals(const DualState& duals, const std::string& path) {
  Json doc;
  auto dump = [&](const char* field, const std::vector<Vector>& family) {
    Json arr = Json::array();
    for (const Vector& v : family) arr.push_back(vector_to_json(v));
    doc[field] = std::move(arr);
  };
  dump("lambda_a", duals.lambda_a);
  dump("lambda_b", duals.lambda_b);
  dump("lambda_c", duals.lambda_c);
  dump("lambda_d", duals.lambda_d);
  doc["kappa"] = vector_to_json(duals.kappa);
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path);
  out << doc.dump(2) << "\n";
}

SolverConfig config_from_json(const Json& doc) {
  SolverConfig config;
  if (doc.contains("preset")) {
    const std::string preset = doc["preset"].get<std::string>();
    if (preset == "mlp")
      config = SolverConfig::mlp_preset();
    else
      throw Error("config.preset: unknown preset \"" + preset + "\"");
  }
  auto get_to = [&](const char* key, auto& field) {
    if (doc.contains(key)) doc[key].get_to(field);
  };
  get_to("max_iters", config.max_iters);
  if (doc.contains("optimizer")) {
    const std::string name = doc["optimizer"].get<std::string>();
    if (name == "adam")
      config.optimizer = SolverConfig::Optimizer::Adam;
    else if (name == "rmsprop")
      config.optimizer = SolverConfig::Optimizer::RMSProp;
    else
      throw Error("config.optimizer: expected \"adam\" or \"rmsprop\", got \"" + name + "\"");
  }
  get_to("learning_rate", config.learning_rate);
  get_to("anneal_factor", config.anneal_factor);
  if (doc.contains("anneal_at")) {
    config.anneal_at.clear();
    for (const Json& f : doc["anneal_at"]) config.anneal_at.push_back(f.get<double>());
  }
  get_to("lr_scale_lambda_c", config.lr_scale_lambda_c);
  if (doc.contains("kappa_mode")) {
    const std::string mode = doc["kappa_mode"].get<std::string>();
    if (mode == "free")
      config.kappa_mode = SolverConfig::KappaMode::Free;
    else if (mode == "penalty")
      config.kappa_mode = SolverConfig::KappaMode::Penalty;
    else if (mode == "clamp_after")
      config.kappa_mode = SolverConfig::KappaMode::ClampAfter;
    else
      throw Error("config.kappa_mode: expected free/penalty/clamp_after, got \"" + mode + "\"");
  }
  get_to("kappa_penalty", config.kappa_penalty);
  get_to("kappa_clamp_fraction", config.kappa_clamp_fraction);
  get_to("use_lambda_d", config.use_lambda_d);
  get_to("lanczos_k", config.lanczos_k);
  get_to("lanczos_tol", config.lanczos_tol);
  get_to("seed", config.seed);
  get_to("certify_every", config.certify_every);
  get_to("stop_on_verified", config.stop_on_verified);
  get_to("dense_cap", config.dense_cap);
  config.validate();
  return config;
}

SolverConfig load_config(const std::string& path) {
  return config_from_json(load_json_file(path));
}

Json config_to_json(const SolverConfig& config) {
  Json doc;
  doc["max_iters"] = config.max_iters;
  doc["optimizer"] = config.optimizer == SolverConfig::Optimizer::Adam ? "adam" : "rmsprop";
  doc["learning_rate"] = config.learning_rate;
  doc["anneal_at"] = config.anneal_at;
  doc["anneal_factor"] = config.anneal_factor;
  doc["lr_scale_lambda_c"] = config.lr_scale_lambda_c;
  switch (config.kappa_mode) {
    case SolverConfig::KappaMode::Free: doc["kappa_mode"] = "free"; break;
    case SolverConfig::KappaMode::Penalty: doc["kappa_mode"] = "penalty"; break;
    case SolverConfig::KappaMode::ClampAfter: doc["kappa_mode"] = "clamp_after"; break;
  }
  doc["kappa_penalty"] = config.kappa_penalty;
  doc["kappa_clamp_fraction"] = config.kappa_clamp_fraction;
  doc["use_lambda_d"] = config.use_lambda_d;
  doc["lanczos_k"] = config.lanczos_k;
  doc["lanczos_tol"] = config.lanczos_tol;
  doc["seed"] = config.seed;
  doc["certify_every"] = config.certify_every;
  doc["stop_on_verified"] = config.stop_on_verified;
  doc["dense_cap"] = config.dense_cap;
  return doc;
}

std::string config_digest(const SolverConfig& config) {
  const std::string canonical = config_to_json(config).dump();
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << hash;
  return os.str();
}

Json ReportRecord::to_json() const {
  Json doc;
  doc["instance_id"] = instance_id;
  doc["spec"] = spec;
  doc["target"] = target ? Json(*target) : Json(nullptr);
  doc["pgd_lower"] = pgd_lower ? Json(*pgd_lower) : Json(nullptr);
  doc["bound_initial"] = bound_initial ? Json(*bound_initial) : Json(nullptr);
  doc["bound_certified"] = bound_certified ? Json(*bound_certified) : Json(nullptr);
  doc["bound_estimate_final"] = bound_estimate_final ? Json(*bound_estimate_final) : Json(nullptr);
  if (ibp_bound) doc["ibp_bound"] = *ibp_bound;
  doc["iterations"] = iterations;
  doc["wall_time_s"] = wall_time_s;
  doc["verdict"] = verdict;
  doc["seed"] = seed;
  doc["config_digest"] = config_digest;
  if (witness) doc["witness"] = vector_to_json(*witness);
  return doc;
}

ReportWriter::ReportWriter(const std::string& path) : out_(path) {
  if (!out_) throw Error("cannot write report: " + path);
}

void ReportWriter::write(const ReportRecord& record) {
  out_ << record.to_json().dump() << "\n";
  out_.flush();
}

}  // namespace certikit
