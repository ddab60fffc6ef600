// certikit — batch verification CLI over the first-order dual SDP solver.
//
// Subcommands: verify (linf robustness), verify-quad (latent-space quadratic
// spec), bounds (interval propagation export), attack (PGD only), certify
// (re-validate saved duals with the dense eigendecomposition).
//
// Exit codes: 0 verified, 1 falsified, 2 undecided, 3 file/format error,
// 4 usage or internal error.
#include <chrono>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "certikit/io.hpp"

namespace {

using namespace certikit;

constexpr int kExitVerified = 0;
constexpr int kExitFalsified = 1;
constexpr int kExitUndecided = 2;
constexpr int kExitFileError = 3;
constexpr int kExitInternal = 4;

int verdict_code(const std::string& verdict) {
  if (verdict == "verified") return kExitVerified;
  if (verdict == "falsified") return kExitFalsified;
  return kExitUndecided;
}

struct CommonOptions {
  std::string model_path;
  std::string config_path;
  std::string out_path;
  std::string instance_id = "instance";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int iters = -1;
  int workers = 1;
};

SolverConfig resolve_config(const CommonOptions& opts) {
  SolverConfig config = opts.config_path.empty() ? SolverConfig{} : load_config(opts.config_path);
  if (opts.seed_set) config.seed = opts.seed;
  if (opts.iters >= 0) config.max_iters = opts.iters;
  return config;
}

void add_common(CLI::App* cmd, CommonOptions& opts, bool with_out = true) {
  cmd->add_option("--model", opts.model_path, "model file (JSON)")->required();
  cmd->add_option("--config", opts.config_path, "solver config file (JSON)");
  if (with_out) cmd->add_option("--out", opts.out_path, "output report (JSONL)")->required();
  cmd->add_option("--id", opts.instance_id, "instance id recorded in reports");
  cmd->add_option("--seed", opts.seed, "seed override")->each([&](const std::string&) {
    opts.seed_set = true;
  });
  cmd->add_option("--iters", opts.iters, "max_iters override");
  cmd->add_option("--workers", opts.workers, "parallel workers over targets");
}

ReportRecord target_record(const CommonOptions& opts, const SolverConfig& config,
                           const TargetReport& target) {
  ReportRecord record;
  record.instance_id = opts.instance_id;
  record.spec = "robustness";
  record.target = target.target;
  record.pgd_lower = target.attack.value;
  if (target.result) {
    record.bound_initial = target.result->bound_initial;
    record.bound_certified = target.result->bound_certified;
    record.bound_estimate_final = target.result->final_estimate;
    record.iterations = target.result->iterations;
    record.wall_time_s = target.result->wall_time_s;
  }
  record.verdict = target.verdict;
  record.seed = config.seed;
  record.config_digest = config_digest(config);
  if (target.verdict == "falsified") record.witness = target.attack.witness;
  return record;
}

int run_verify(const CommonOptions& opts, const std::string& input_path, Index label, double eps,
               bool clip01, const std::string& save_duals_prefix) {
  const auto started = std::chrono::steady_clock::now();
  const Network network = load_model(opts.model_path);
  const Vector input = load_vector(input_path);
  const SolverConfig config = resolve_config(opts);
  AttackConfig attack;
  attack.seed = config.seed;

  const RobustnessReport report =
      verify_robustness(network, input, label, eps, clip01, config, attack, opts.workers);

  ReportWriter writer(opts.out_path);
  ReportRecord summary;
  summary.instance_id = opts.instance_id;
  summary.spec = "summary";
  summary.verdict = report.verdict;
  summary.seed = config.seed;
  summary.config_digest = config_digest(config);
  bool all_solved = !report.targets.empty();
  for (const TargetReport& target : report.targets) {
    const ReportRecord record = target_record(opts, config, target);
    writer.write(record);
    if (record.pgd_lower)
      summary.pgd_lower = std::max(summary.pgd_lower.value_or(-1e300), *record.pgd_lower);
    if (record.bound_certified) {
      summary.bound_certified =
          std::max(summary.bound_certified.value_or(-1e300), *record.bound_certified);
      summary.bound_initial =
          std::max(summary.bound_initial.value_or(-1e300), *record.bound_initial);
      summary.iterations += record.iterations;
    } else {
      all_solved = false;
    }
    if (!save_duals_prefix.empty() && target.result)
      save_duals(target.result->best_duals,
                 save_duals_prefix + "-target-" + std::to_string(target.target) + ".json");
  }
  if (!all_solved) {
    summary.bound_certified.reset();
    summary.bound_initial.reset();
  }
  summary.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  writer.write(summary);
  return verdict_code(report.verdict);
}

int run_verify_quad(const CommonOptions& opts, const std::string& target_path,
                    const std::string& center_path, const std::string& scale_path, double alpha,
                    double tau) {
  const Network decoder = load_model(opts.model_path);
  const Vector target = load_vector(target_path);
  const Vector center = load_vector(center_path);
  const Vector scale = scale_path.empty() ? Vector::Ones(decoder.input_dim())
                                          : load_vector(scale_path);
  const SolverConfig config = resolve_config(opts);

  const VerificationInstance instance =
      make_latent_instance(decoder, target, center, scale, alpha, tau, opts.instance_id);
  const LayerBounds bounds = interval_propagate(decoder, instance.box);
  Vector out_lo, out_hi;
  output_interval(decoder, bounds, out_lo, out_hi);
  const double ibp = ibp_quadratic_bound(out_lo, out_hi, target, tau);

  AttackConfig attack;
  attack.seed = config.seed;
  const AttackResult pgd = pgd_lower_bound(instance, attack);

  ReportRecord record;
  record.instance_id = opts.instance_id;
  record.spec = "latent";
  record.pgd_lower = pgd.value;
  record.ibp_bound = ibp;
  record.seed = config.seed;
  record.config_digest = config_digest(config);
  // Unlike multi-target robustness runs, the upper bound is the product here,
  // so the solve runs even when the attack already falsifies the spec.
  const SolveResult result = solve(instance, bounds, config);
  record.bound_initial = result.bound_initial;
  record.bound_certified = result.bound_certified;
  record.bound_estimate_final = result.final_estimate;
  record.iterations = result.iterations;
  record.wall_time_s = result.wall_time_s;
  if (pgd.value > 0.0) {
    record.verdict = "falsified";
    record.witness = pgd.witness;
  } else {
    record.verdict = result.verified ? "verified" : "undecided";
  }
  ReportWriter writer(opts.out_path);
  writer.write(record);
  return verdict_code(record.verdict);
}

int run_bounds(const CommonOptions& opts, const std::string& input_path, double eps, bool clip01) {
  const Network network = load_model(opts.model_path);
  const Vector input = load_vector(input_path);
  Vector lo = input.array() - eps;
  Vector hi = input.array() + eps;
  if (clip01) {
    lo = lo.cwiseMax(0.0).cwiseMin(1.0);
    hi = hi.cwiseMax(0.0).cwiseMin(1.0);
  }
  const LayerBounds bounds = interval_propagate(network, InputBox(lo, hi));
  save_bounds(bounds, opts.out_path);
  return 0;
}

int run_attack(const CommonOptions& opts, const std::string& input_path, Index label, double eps,
               bool clip01, Index only_target, int steps, int restarts) {
  const Network network = load_model(opts.model_path);
  const Vector input = load_vector(input_path);
  const SolverConfig config = resolve_config(opts);
  ReportWriter writer(opts.out_path);
  bool falsified = false;
  for (Index target = 0; target < network.output_dim(); ++target) {
    if (target == label) continue;
    if (only_target >= 0 && target != only_target) continue;
    const auto instance = make_robustness_instance(network, input, label, target, eps, clip01,
                                                   opts.instance_id);
    AttackConfig attack;
    attack.steps = steps;
    attack.restarts = restarts;
    attack.seed = config.seed + static_cast<std::uint64_t>(1000 * target);
    const AttackResult result = pgd_lower_bound(instance, attack);
    ReportRecord record;
    record.instance_id = opts.instance_id;
    record.spec = "robustness";
    record.target = target;
    record.pgd_lower = result.value;
    record.verdict = result.value > 0.0 ? "falsified" : "undecided";
    record.seed = config.seed;
    record.config_digest = config_digest(config);
    record.witness = result.witness;
    writer.write(record);
    falsified |= result.value > 0.0;
  }
  return falsified ? kExitFalsified : kExitUndecided;
}

int run_certify(const CommonOptions& opts, const std::string& input_path, Index label, double eps,
                bool clip01, Index target, const std::string& duals_path,
                const std::string& bounds_path) {
  const Network network = load_model(opts.model_path);
  const Vector input = load_vector(input_path);
  const SolverConfig config = resolve_config(opts);
  const auto instance =
      make_robustness_instance(network, input, label, target, eps, clip01, opts.instance_id);
  const LayerBounds bounds = bounds_path.empty() ? interval_propagate(network, instance.box)
                                                 : load_bounds(bounds_path, network);
  const DualState duals =
      duals_path.empty() ? init_duals(instance, bounds) : load_duals(duals_path, network);
  const DualObjective certified =
      dual_objective(duals, instance, bounds, EigenEstimate::Method::Dense, config);
  Json out;
  out["instance_id"] = opts.instance_id;
  out["target"] = target;
  out["bound_certified"] = certified.value;
  out["eig_min"] = certified.eig.value;
  out["verdict"] = certified.value < 0.0 ? "verified" : "undecided";
  std::cout << out.dump() << "\n";
  return certified.value < 0.0 ? kExitVerified : kExitUndecided;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"certified bounds on quadratic specifications over ReLU networks"};
  app.require_subcommand(1);

  CommonOptions opts;
  std::string input_path, target_path, center_path, scale_path, duals_path, bounds_path;
  std::string save_duals_prefix;
  Index label = 0;
  Index target = -1;
  double eps = 0.0;
  double alpha = 0.0;
  double tau = kDefaultLatentTau;
  bool clip01 = false;
  int steps = 100, restarts = 5;

  CLI::App* verify = app.add_subcommand("verify", "certify linf robustness across all targets");
  add_common(verify, opts);
  verify->add_option("--input", input_path, "input vector file")->required();
  verify->add_option("--label", label, "true label")->required();
  verify->add_option("--eps", eps, "linf radius")->required();
  verify->add_flag("--clip01", clip01, "clip the box to [0,1]");
  verify->add_option("--save-duals", save_duals_prefix, "write best duals per target");

  CLI::App* quad = app.add_subcommand("verify-quad", "certify a quadratic latent-space spec");
  add_common(quad, opts);
  quad->add_option("--target", target_path, "target output vector file")->required();
  quad->add_option("--center", center_path, "latent center file")->required();
  quad->add_option("--scale", scale_path, "latent scale file (default all ones)");
  quad->add_option("--alpha", alpha, "latent linf radius in scale units")->required();
  quad->add_option("--tau", tau, "reconstruction error threshold");

  CLI::App* bounds_cmd = app.add_subcommand("bounds", "export interval activation bounds");
  add_common(bounds_cmd, opts);
  bounds_cmd->add_option("--input", input_path, "input vector file")->required();
  bounds_cmd->add_option("--eps", eps, "linf radius")->required();
  bounds_cmd->add_flag("--clip01", clip01, "clip the box to [0,1]");

  CLI::App* attack_cmd = app.add_subcommand("attack", "PGD lower bounds only");
  add_common(attack_cmd, opts);
  attack_cmd->add_option("--input", input_path, "input vector file")->required();
  attack_cmd->add_option("--label", label, "true label")->required();
  attack_cmd->add_option("--eps", eps, "linf radius")->required();
  attack_cmd->add_flag("--clip01", clip01, "clip the box to [0,1]");
  attack_cmd->add_option("--target", target, "attack a single target label");
  attack_cmd->add_option("--steps", steps, "PGD steps");
  attack_cmd->add_option("--restarts", restarts, "PGD restarts");

  CLI::App* certify = app.add_subcommand("certify", "dense-certify saved duals");
  add_common(certify, opts, /*with_out=*/false);
  certify->add_option("--input", input_path, "input vector file")->required();
  certify->add_option("--label", label, "true label")->required();
  certify->add_option("--eps", eps, "linf radius")->required();
  certify->add_option("--target", target, "target label")->required();
  certify->add_flag("--clip01", clip01, "clip the box to [0,1]");
  certify->add_option("--duals", duals_path, "duals file (default: closed-form init)");
  certify->add_option("--bounds", bounds_path, "imported bounds file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInternal;
  }

  try {
    if (verify->parsed())
      return run_verify(opts, input_path, label, eps, clip01, save_duals_prefix);
    if (quad->parsed())
      return run_verify_quad(opts, target_path, center_path, scale_path, alpha, tau);
    if (bounds_cmd->parsed()) return run_bounds(opts, input_path, eps, clip01);
    if (attack_cmd->parsed())
      return run_attack(opts, input_path, label, eps, clip01, target, steps, restarts);
    if (certify->parsed())
      return run_certify(opts, input_path, label, eps, clip01, target, duals_path, bounds_path);
  } catch (const Error& e) {
    std::cerr << "certikit: " << e.what() << "\n";
    return kExitFileError;
  } catch (const Json::exception& e) {
    std::cerr << "certikit: malformed file: " << e.what() << "\n";
    return kExitFileError;
  } catch (const std::exception& e) {
    std::cerr << "certikit: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
