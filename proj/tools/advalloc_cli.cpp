// Command line front end: training runs, evaluation tables, policy probes,
// adversarial instance search, instance export, and experience replay.
// Configs and checkpoints are JSON, tables and curves CSV, experience JSONL.
// Exit code 0 on success; failures print one JSON error line to stderr.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "advalloc/baselines.hpp"
#include "advalloc/distributions.hpp"
#include "advalloc/env.hpp"
#include "advalloc/instance.hpp"
#include "advalloc/lp.hpp"
#include "advalloc/networks.hpp"
#include "advalloc/report.hpp"
#include "advalloc/skirental.hpp"
#include "advalloc/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace advalloc;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::string cur;
  int depth = 0;  // commas inside (...) belong to distribution specs
  for (char c : text) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  for (std::string& p : parts) {
    const auto a = p.find_first_not_of(" \t");
    const auto b = p.find_last_not_of(" \t");
    p = a == std::string::npos ? "" : p.substr(a, b - a + 1);
    if (p.empty()) throw std::runtime_error("empty entry in list: " + text);
  }
  return parts;
}

Mode parse_mode(const std::string& name) {
  if (name == "integral") return Mode::integral;
  if (name == "fractional") return Mode::fractional;
  throw std::runtime_error("unknown mode: " + name +
                           " (expected integral or fractional)");
}

// The run checkpoint bundles both players; a bare parameter file is also a
// valid policy source, so loading accepts either layout.
std::string train_checkpoint_json(int step, const ad::ParamVector& alg,
                                  const ad::ParamVector& adv) {
  json j;
  j["step"] = step;
  j["algorithm"] = json::parse(net::params_to_json(alg));
  j["adversary"] = json::parse(net::params_to_json(adv));
  return j.dump();
}

// Hidden widths are recovered from the stored segment shapes, so a
// checkpoint is self-describing.
net::AlgNetConfig alg_config_from(const ad::ParamVector& params) {
  net::AlgNetConfig cfg;
  cfg.hidden.clear();
  for (const ad::ParamSegment& seg : params.segments) {
    if (seg.name.size() < 3 || seg.name.substr(seg.name.size() - 2) != ".W") {
      continue;
    }
    cfg.hidden.push_back(seg.shape.at(0));
  }
  if (cfg.hidden.empty() || cfg.hidden.back() != 1) {
    throw std::runtime_error("parameter file is not an allocation policy");
  }
  cfg.hidden.pop_back();  // the final 1-wide head is implicit
  return cfg;
}

std::unique_ptr<SlotPolicy> load_policy(const std::string& name) {
  if (name == "greedy" || name == "msvv" || name == "balance") {
    return make_baseline(name);
  }
  if (!fs::exists(name)) {
    throw std::runtime_error("unknown policy (not a baseline name or file): " +
                             name);
  }
  json j = json::parse(read_file(name));
  if (j.contains("algorithm")) j = j.at("algorithm");
  ad::ParamVector params = net::params_from_json(j.dump());
  const net::AlgNetConfig cfg = alg_config_from(params);
  return std::make_unique<net::LearnedPolicy>(cfg, std::move(params),
                                              fs::path(name).stem().string());
}

struct PolicySet {
  std::vector<std::unique_ptr<SlotPolicy>> owned;
  std::vector<const SlotPolicy*> ptrs;
};

PolicySet load_policies(const std::string& list) {
  PolicySet set;
  for (const std::string& name : split_list(list)) {
    set.owned.push_back(load_policy(name));
    set.ptrs.push_back(set.owned.back().get());
  }
  return set;
}

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty()) {
    std::cout << content;
  } else {
    write_file(out_path, content);
  }
}

double elapsed_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// ---------------------------------------------------------------------------

int run_train(const std::string& config_path, const std::string& out_dir) {
  train::TrainConfig cfg;
  if (!config_path.empty()) {
    cfg = train::TrainConfig::from_json(read_file(config_path));
  }
  const fs::path out(out_dir);
  fs::create_directories(out);
  write_file(out / "run_config.json", cfg.to_json());

  train::TrainHooks hooks;
  hooks.on_checkpoint = [&](int step, const ad::ParamVector& alg,
                            const ad::ParamVector& adv) {
    write_file(out / ("checkpoint_" + std::to_string(step) + ".json"),
               train_checkpoint_json(step, alg, adv));
  };
  const auto t0 = std::chrono::steady_clock::now();
  const train::TrainResult res = train::train(cfg, hooks);
  const double secs = elapsed_since(t0);

  write_file(out / "history.csv", res.history.to_csv());
  res.experience.save((out / "experience.jsonl").string());
  write_file(out / "checkpoint_final.json",
             train_checkpoint_json(res.steps_completed, res.alg_params,
                                   res.adv_params));
  json meta;
  meta["steps_completed"] = res.steps_completed;
  meta["aborted"] = res.aborted;
  meta["abort_reason"] = res.abort_reason;
  meta["elapsed_seconds"] = secs;
  meta["experience_size"] = res.experience.entries.size();
  write_file(out / "meta.json", meta.dump(2));

  if (res.aborted) {
    std::cerr << json{{"error", "training aborted: " + res.abort_reason}}
                     .dump()
              << "\n";
    return 1;
  }
  std::cout << "train: " << res.steps_completed << " steps in " << secs
            << "s; experience size " << res.experience.entries.size() << "\n";
  return 0;
}

int run_train_ski(const std::string& config_path, const std::string& out_dir) {
  ski::SkiTrainConfig cfg;
  if (!config_path.empty()) {
    cfg = ski::SkiTrainConfig::from_json(read_file(config_path));
  }
  const fs::path out(out_dir);
  fs::create_directories(out);
  write_file(out / "run_config.json", cfg.to_json());

  const auto t0 = std::chrono::steady_clock::now();
  const ski::SkiTrainResult res = ski::ski_train(cfg);
  const double secs = elapsed_since(t0);

  write_file(out / "params.json", net::params_to_json(res.params));
  write_file(out / "history.csv", ski::ski_history_csv(res.history));

  json meta;
  meta["steps_completed"] = res.steps_completed;
  meta["aborted"] = res.aborted;
  meta["abort_reason"] = res.abort_reason;
  meta["elapsed_seconds"] = secs;
  if (!res.history.empty()) {
    meta["final_worst_cr"] = res.history.back().worst_cr;
  }
  for (const auto& [B, N] : {std::pair{5, 50}, std::pair{10, 100}}) {
    const std::string tag = "B" + std::to_string(B) + "_N" + std::to_string(N);
    meta["sup_distance_" + tag] =
        ski::strategy_sup_distance(res.net, res.params, B, N);

    std::ostringstream cdf;
    cdf << std::setprecision(10) << "alpha,cdf\n";
    const std::vector<double> inst = instantiate_cdf(res.net, res.params, B, N);
    for (int i = 1; i <= N; ++i) {
      cdf << double(i) / N << ',' << inst[i - 1] << '\n';
    }
    write_file(out / ("cdf_" + tag + ".csv"), cdf.str());

    const ski::DiscreteStrategy opt = ski::ski_optimal_strategy(B, N);
    const std::vector<double> cum = opt.cumulative();
    std::ostringstream sopt;
    sopt << std::setprecision(10) << "day,alpha,prob,cumulative\n";
    for (int i = 1; i <= N; ++i) {
      sopt << i << ',' << double(i) / N << ',' << opt.probs[i - 1] << ','
           << cum[i - 1] << '\n';
    }
    write_file(out / ("optimal_" + tag + ".csv"), sopt.str());
  }
  write_file(out / "meta.json", meta.dump(2));

  if (res.aborted) {
    std::cerr << json{{"error", "training aborted: " + res.abort_reason}}
                     .dump()
              << "\n";
    return 1;
  }
  std::cout << "train-ski: " << res.steps_completed << " steps in " << secs
            << "s; final worst ratio "
            << (res.history.empty() ? 0.0 : res.history.back().worst_cr)
            << "\n";
  return 0;
}

int run_eval(const std::string& policies, const std::string& distributions,
             int samples, int runs, const std::string& mode, uint64_t seed,
             const std::string& out_path) {
  const PolicySet set = load_policies(policies);
  std::vector<dist::DistributionSpec> specs;
  for (const std::string& d : split_list(distributions)) {
    specs.push_back(dist::DistributionSpec::parse(d));
  }
  std::mt19937_64 rng(seed);
  const auto records =
      report::eval_table(set.ptrs, specs, samples, runs, parse_mode(mode), rng);
  emit(out_path, report::eval_table_csv(records));
  return 0;
}

int run_probe(const std::string& kind_name, const std::string& policy_name,
              const std::string& spec_text, uint64_t seed,
              const std::string& out_path) {
  const std::unique_ptr<SlotPolicy> policy = load_policy(policy_name);
  json spec_json = json::object();
  if (!spec_text.empty()) {
    spec_json = spec_text.front() == '{' ? json::parse(spec_text)
                                         : json::parse(read_file(spec_text));
  }
  report::ProbeSpec spec;
  spec.kind = report::probe_kind_from_name(kind_name);
  spec.opponent_bid = spec_json.value("opponent_bid", spec.opponent_bid);
  spec.opponent_remaining =
      spec_json.value("opponent_remaining", spec.opponent_remaining);
  spec.fixed_bid = spec_json.value("fixed_bid", spec.fixed_bid);
  spec.budget = spec_json.value("budget", spec.budget);
  spec.grid = spec_json.value("grid", spec.grid);
  spec.runs = spec_json.value("runs", spec.runs);

  switch (spec.kind) {
    case report::ProbeKind::bid_sweep:
    case report::ProbeKind::budget_sweep:
      emit(out_path, report::curve_csv(report::probe_single_slot(*policy, spec)));
      return 0;
    case report::ProbeKind::contour:
      emit(out_path, report::contour_csv(report::contour_grid(*policy, spec)));
      return 0;
    case report::ProbeKind::spending: {
      AdWordsInstance inst;
      if (spec_json.contains("instance")) {
        inst = AdWordsInstance::load(spec_json.at("instance"));
      } else {
        const std::string d = spec_json.value("distribution",
                                              std::string("triangular(10,10)"));
        std::mt19937_64 gen(spec_json.value("seed", seed));
        inst = dist::sample(dist::DistributionSpec::parse(d), gen);
      }
      std::mt19937_64 rng(seed);
      emit(out_path, report::spending_csv(report::spending_trajectories(
                         *policy, inst, spec.runs, rng)));
      return 0;
    }
    default:
      throw std::runtime_error("probe kind not supported here: " + kind_name +
                               " (use the eval/replay subcommands)");
  }
}

int run_adv_search(const std::string& target, const std::string& diff,
                   train::AdvSearchConfig cfg, uint64_t seed,
                   const std::string& out_dir) {
  if (target.empty() == diff.empty()) {
    throw std::runtime_error("pass exactly one of --target or --diff");
  }
  const fs::path out(out_dir);
  fs::create_directories(out);
  std::mt19937_64 rng(seed);

  const auto t0 = std::chrono::steady_clock::now();
  train::AdvSearchResult res;
  json meta;
  if (!target.empty()) {
    const std::unique_ptr<SlotPolicy> policy = load_policy(target);
    res = train::adv_search_fixed(*policy, cfg, rng);
    meta["target"] = policy->name();
    meta["objective"] = "min_cr";
  } else {
    const std::vector<std::string> pair = split_list(diff);
    if (pair.size() != 2) {
      throw std::runtime_error("--diff expects two policies: A,B");
    }
    const std::unique_ptr<SlotPolicy> a = load_policy(pair[0]);
    const std::unique_ptr<SlotPolicy> b = load_policy(pair[1]);
    res = train::adv_search_diff(*a, *b, cfg, rng);
    meta["target"] = pair[0] + "-" + pair[1];
    meta["objective"] = "max_cr_gap";
  }
  const double secs = elapsed_since(t0);

  res.best_instance.save((out / "instance.json").string());
  std::ostringstream trace;
  trace << std::setprecision(10) << "step,objective\n";
  for (std::size_t i = 0; i < res.trace.size(); ++i) {
    trace << i + 1 << ',' << res.trace[i] << '\n';
  }
  write_file(out / "trace.csv", trace.str());
  meta["best_objective"] = res.best_objective;
  meta["steps"] = cfg.steps;
  meta["elapsed_seconds"] = secs;
  write_file(out / "meta.json", meta.dump(2));

  std::cout << "adv-search: best objective " << res.best_objective << " in "
            << secs << "s\n";
  return 0;
}

int run_export_instance(const std::string& distribution, uint64_t seed,
                        int count, const std::string& out_path) {
  if (count < 1) throw std::runtime_error("count must be at least 1");
  const dist::DistributionSpec spec = dist::DistributionSpec::parse(distribution);
  std::mt19937_64 rng(seed);
  if (count == 1) {
    dist::sample(spec, rng).save(out_path);
  } else {
    fs::create_directories(out_path);
    for (int k = 0; k < count; ++k) {
      dist::sample(spec, rng).save(
          (fs::path(out_path) / ("instance_" + std::to_string(k) + ".json"))
              .string());
    }
  }
  std::cout << "export-instance: wrote " << count << " from " << spec.name()
            << "\n";
  return 0;
}

int run_replay(const std::string& experience_path, const std::string& policies,
               int group, const std::string& out_path) {
  const train::ExperienceArray exp =
      train::ExperienceArray::load(experience_path);
  if (exp.entries.empty()) throw std::runtime_error("experience file is empty");
  std::vector<AdWordsInstance> instances;
  instances.reserve(exp.entries.size());
  for (const train::ExperienceEntry& e : exp.entries) {
    instances.push_back(e.instance);
  }
  const PolicySet set = load_policies(policies);
  emit(out_path,
       report::cr_trace_csv(report::cr_trace(set.ptrs, instances, group)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial online-allocation laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_dir, out_path;
  std::string policies, distributions, mode = "integral";
  std::string kind, policy, spec_text, target, diff, experience, distribution;
  int samples = 100, runs = 100, count = 1, group = 10;
  uint64_t seed = 0;
  train::AdvSearchConfig search_cfg;

  CLI::App* train_cmd = app.add_subcommand("train", "adversarial co-training");
  train_cmd->add_option("--config", config_path, "TrainConfig JSON path");
  train_cmd->add_option("--out", out_dir, "output directory")->required();

  CLI::App* ski_cmd =
      app.add_subcommand("train-ski", "ski-rental best-response training");
  ski_cmd->add_option("--config", config_path, "SkiTrainConfig JSON path");
  ski_cmd->add_option("--out", out_dir, "output directory")->required();

  CLI::App* eval_cmd = app.add_subcommand("eval", "policy-by-input CSV table");
  eval_cmd->add_option("--policies", policies, "baseline names or checkpoints")
      ->required();
  eval_cmd->add_option("--distributions", distributions, "input family specs")
      ->required();
  eval_cmd->add_option("--samples", samples, "instances per family");
  eval_cmd->add_option("--runs", runs, "integral rollouts per instance");
  eval_cmd->add_option("--mode", mode, "integral or fractional");
  eval_cmd->add_option("--seed", seed, "rng seed");
  eval_cmd->add_option("--out", out_path, "output CSV path (default stdout)");

  CLI::App* probe_cmd = app.add_subcommand("probe", "policy behavior probes");
  probe_cmd->add_option("--kind", kind, "bid_sweep|budget_sweep|contour|spending")
      ->required();
  probe_cmd->add_option("--policy", policy, "baseline name or checkpoint")
      ->required();
  probe_cmd->add_option("--spec", spec_text, "probe settings JSON (inline or path)");
  probe_cmd->add_option("--seed", seed, "rng seed");
  probe_cmd->add_option("--out", out_path, "output CSV path (default stdout)");

  CLI::App* search_cmd =
      app.add_subcommand("adv-search", "gradient search for hard instances");
  search_cmd->add_option("--target", target, "policy to attack");
  search_cmd->add_option("--diff", diff, "two policies A,B to separate");
  search_cmd->add_option("--steps", search_cfg.steps, "gradient steps");
  search_cmd->add_option("--restart-every", search_cfg.restart_every,
                         "reinitialize period");
  search_cmd->add_option("--batch", search_cfg.batch, "noise draws per step");
  search_cmd->add_option("--m", search_cfg.m, "slots");
  search_cmd->add_option("--n", search_cfg.n, "advertisers");
  search_cmd->add_option("--seed", seed, "rng seed");
  search_cmd->add_option("--out", out_dir, "output directory")->required();

  CLI::App* export_cmd =
      app.add_subcommand("export-instance", "sample instances to JSON");
  export_cmd->add_option("--distribution", distribution, "input family spec")
      ->required();
  export_cmd->add_option("--seed", seed, "rng seed");
  export_cmd->add_option("--count", count, "instances to write");
  export_cmd->add_option("--out", out_path, "file (count=1) or directory")
      ->required();

  CLI::App* replay_cmd =
      app.add_subcommand("replay", "batch-min CR trace over an experience file");
  replay_cmd->add_option("--experience", experience, "experience JSONL path")
      ->required();
  replay_cmd->add_option("--policies", policies,
                         "policies to trace (default greedy,msvv)");
  replay_cmd->add_option("--group", group, "instances per batch");
  replay_cmd->add_option("--out", out_path, "output CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0) std::cerr << json{{"error", e.what()}}.dump() << "\n";
    return code;
  }

  try {
    if (app.got_subcommand(train_cmd)) return run_train(config_path, out_dir);
    if (app.got_subcommand(ski_cmd)) return run_train_ski(config_path, out_dir);
    if (app.got_subcommand(eval_cmd)) {
      return run_eval(policies, distributions, samples, runs, mode, seed,
                      out_path);
    }
    if (app.got_subcommand(probe_cmd)) {
      return run_probe(kind, policy, spec_text, seed, out_path);
    }
    if (app.got_subcommand(search_cmd)) {
      return run_adv_search(target, diff, search_cfg, seed, out_dir);
    }
    if (app.got_subcommand(export_cmd)) {
      return run_export_instance(distribution, seed, count, out_path);
    }
    if (app.got_subcommand(replay_cmd)) {
      return run_replay(experience, policies.empty() ? "greedy,msvv" : policies,
                        group, out_path);
    }
    throw std::runtime_error("no subcommand");
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
}
