// Python bindings for the allocation laboratory: instances, input families,
// the offline optimum, policies and their evaluation, both training loops,
// and the fixed-target adversary search. Long-running calls release the GIL.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "advalloc/baselines.hpp"
#include "advalloc/distributions.hpp"
#include "advalloc/env.hpp"
#include "advalloc/instance.hpp"
#include "advalloc/lp.hpp"
#include "advalloc/networks.hpp"
#include "advalloc/report.hpp"
#include "advalloc/skirental.hpp"
#include "advalloc/trainer.hpp"

namespace py = pybind11;
using namespace advalloc;

namespace {

Mode parse_mode(const std::string& name) {
  if (name == "fractional") return Mode::fractional;
  if (name == "integral") return Mode::integral;
  throw std::invalid_argument("mode must be 'fractional' or 'integral'");
}

std::vector<std::vector<double>> nested_bids(const AdWordsInstance& inst) {
  std::vector<std::vector<double>> rows(inst.m);
  for (int j = 0; j < inst.m; ++j) {
    rows[j].assign(inst.bids.begin() + static_cast<size_t>(j) * inst.n,
                   inst.bids.begin() + static_cast<size_t>(j + 1) * inst.n);
  }
  return rows;
}

AdWordsInstance make_instance(const std::vector<std::vector<double>>& bids,
                              const std::vector<double>& budgets) {
  AdWordsInstance inst;
  inst.m = static_cast<int>(bids.size());
  inst.n = static_cast<int>(budgets.size());
  inst.budgets = budgets;
  inst.bids.reserve(static_cast<size_t>(inst.m) * inst.n);
  for (const auto& row : bids) {
    if (static_cast<int>(row.size()) != inst.n) {
      throw std::invalid_argument("every bid row needs one entry per budget");
    }
    inst.bids.insert(inst.bids.end(), row.begin(), row.end());
  }
  inst.validate();
  return inst;
}

// Owning policy handle shared with Python.
struct PolicyHandle {
  std::unique_ptr<SlotPolicy> policy;
  const SlotPolicy& ref() const {
    if (!policy) throw std::logic_error("empty policy handle");
    return *policy;
  }
};

py::dict record_dict(const EvalRecord& rec) {
  py::dict d;
  d["algorithm"] = rec.algorithm;
  d["distribution"] = rec.distribution;
  d["m"] = rec.m;
  d["n"] = rec.n;
  d["mode"] = mode_name(rec.mode);
  d["mean_revenue"] = rec.mean_revenue;
  d["std"] = rec.std_dev;
  d["opt"] = rec.opt;
  d["cr"] = rec.cr;
  d["count"] = rec.count;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() =
      "Learned online-allocation laboratory: AdWords instances, input "
      "families, the offline optimum, baseline and learned policies, "
      "adversarial training, and the ski-rental pipeline.";

  py::class_<AdWordsInstance>(mod, "Instance",
                              "An AdWords instance: m ad slots arriving in "
                              "row order, n advertiser budgets, bids in "
                              "[0, 1].")
      .def(py::init(&make_instance), py::arg("bids"), py::arg("budgets"))
      .def_readonly("m", &AdWordsInstance::m)
      .def_readonly("n", &AdWordsInstance::n)
      .def_property_readonly("bids", &nested_bids)
      .def_readonly("budgets", &AdWordsInstance::budgets)
      .def("bid",
           [](const AdWordsInstance& inst, int slot, int advertiser) {
             if (slot < 0 || slot >= inst.m || advertiser < 0 ||
                 advertiser >= inst.n) {
               throw std::out_of_range("bid index out of range");
             }
             return inst.bid(slot, advertiser);
           },
           py::arg("slot"), py::arg("advertiser"))
      .def("validate", &AdWordsInstance::validate)
      .def("to_json", &AdWordsInstance::to_json)
      .def_static("from_json", &AdWordsInstance::from_json, py::arg("text"))
      .def("save", &AdWordsInstance::save, py::arg("path"))
      .def_static("load", &AdWordsInstance::load, py::arg("path"))
      .def("__repr__", [](const AdWordsInstance& inst) {
        return "Instance(m=" + std::to_string(inst.m) +
               ", n=" + std::to_string(inst.n) + ")";
      });

  mod.def(
      "sample_instance",
      [](const std::string& spec, uint64_t seed) {
        std::mt19937_64 rng(seed);
        return dist::sample(dist::DistributionSpec::parse(spec), rng);
      },
      py::arg("spec"), py::arg("seed") = 0,
      "Draw one instance from a family spec such as 'triangular(5,5)', "
      "'thick_z(5,5)', 'powerlaw(5)', 'triangular_g(5)', or 'uniform(25,5)'.");

  mod.def(
      "offline_optimum",
      [](const AdWordsInstance& inst) {
        lp::OfflineOptimum opt = lp::offline_optimum(inst);
        py::dict d;
        d["value"] = opt.value;
        d["allocation"] = opt.allocation;
        d["budget_duals"] = opt.budget_duals;
        d["degenerate"] = opt.degenerate;
        return d;
      },
      py::arg("instance"),
      "LP offline optimum: value, row-major m*n allocation, budget duals.");

  py::class_<PolicyHandle>(mod, "Policy",
                           "An allocation rule; build with Policy.baseline "
                           "or Policy.learned.")
      .def_static(
          "baseline",
          [](const std::string& name) {
            PolicyHandle h;
            h.policy = make_baseline(name);
            return h;
          },
          py::arg("name"), "One of 'greedy', 'msvv', 'balance'.")
      .def_static(
          "learned",
          [](const std::string& params_json, std::vector<int> hidden,
             const std::string& name) {
            PolicyHandle h;
            h.policy = std::make_unique<net::LearnedPolicy>(
                net::AlgNetConfig{std::move(hidden)},
                net::params_from_json(params_json), name);
            return h;
          },
          py::arg("params_json"), py::arg("hidden") = std::vector<int>{32, 32},
          py::arg("name") = std::string("learned"),
          "Wrap trained allocation-network parameters (JSON checkpoint "
          "segment) as a policy.")
      .def("name", [](const PolicyHandle& h) { return h.ref().name(); })
      .def(
          "allocate",
          [](const PolicyHandle& h, const AdWordsInstance& inst,
             const std::vector<double>& remaining, int slot) {
            return h.ref().allocate(inst, remaining, slot);
          },
          py::arg("instance"), py::arg("remaining"), py::arg("slot"),
          "The allocation vector for one slot given remaining budgets.");

  mod.def(
      "evaluate",
      [](const PolicyHandle& policy, const AdWordsInstance& inst,
         const std::string& mode, int runs, uint64_t seed) {
        std::mt19937_64 rng(seed);
        EvalRecord rec;
        {
          py::gil_scoped_release release;
          rec = competitive_ratio(policy.ref(), inst, parse_mode(mode), runs,
                                  rng);
        }
        return record_dict(rec);
      },
      py::arg("policy"), py::arg("instance"),
      py::arg("mode") = std::string("integral"), py::arg("runs") = 100,
      py::arg("seed") = 0,
      "Mean revenue, spread, offline optimum, and competitive ratio of one "
      "policy on one instance.");

  mod.def(
      "eval_table",
      [](const std::vector<const PolicyHandle*>& policies,
         const std::vector<std::string>& distributions, int samples, int runs,
         const std::string& mode, uint64_t seed) {
        std::vector<const SlotPolicy*> ptrs;
        for (const PolicyHandle* h : policies) ptrs.push_back(&h->ref());
        std::vector<dist::DistributionSpec> specs;
        for (const std::string& d : distributions) {
          specs.push_back(dist::DistributionSpec::parse(d));
        }
        std::vector<EvalRecord> records;
        {
          py::gil_scoped_release release;
          std::mt19937_64 rng(seed);
          records = report::eval_table(ptrs, specs, samples, runs,
                                       parse_mode(mode), rng);
        }
        py::list out;
        for (const EvalRecord& rec : records) out.append(record_dict(rec));
        return out;
      },
      py::arg("policies"), py::arg("distributions"), py::arg("samples") = 100,
      py::arg("runs") = 100, py::arg("mode") = std::string("integral"),
      py::arg("seed") = 0,
      "Cross product of policies and families; every policy sees the same "
      "sampled instances.");

  mod.def(
      "eval_table_csv",
      [](const std::vector<const PolicyHandle*>& policies,
         const std::vector<std::string>& distributions, int samples, int runs,
         const std::string& mode, uint64_t seed) {
        std::vector<const SlotPolicy*> ptrs;
        for (const PolicyHandle* h : policies) ptrs.push_back(&h->ref());
        std::vector<dist::DistributionSpec> specs;
        for (const std::string& d : distributions) {
          specs.push_back(dist::DistributionSpec::parse(d));
        }
        py::gil_scoped_release release;
        std::mt19937_64 rng(seed);
        return report::eval_table_csv(report::eval_table(
            ptrs, specs, samples, runs, parse_mode(mode), rng));
      },
      py::arg("policies"), py::arg("distributions"), py::arg("samples") = 100,
      py::arg("runs") = 100, py::arg("mode") = std::string("integral"),
      py::arg("seed") = 0, "eval_table rendered as CSV.");

  mod.def(
      "train",
      [](const std::string& config_json) {
        train::TrainConfig cfg = config_json.empty()
                                     ? train::TrainConfig{}
                                     : train::TrainConfig::from_json(
                                           config_json);
        train::TrainResult res;
        {
          py::gil_scoped_release release;
          res = train::train(cfg);
        }
        py::dict d;
        d["alg_params_json"] = net::params_to_json(res.alg_params);
        d["adv_params_json"] = net::params_to_json(res.adv_params);
        d["history_csv"] = res.history.to_csv();
        d["experience_jsonl"] = res.experience.to_jsonl();
        d["steps_completed"] = res.steps_completed;
        d["aborted"] = res.aborted;
        d["abort_reason"] = res.abort_reason;
        return d;
      },
      py::arg("config_json") = std::string(),
      "Adversarial co-training of the allocation network; empty config "
      "means defaults. Returns parameters, history, and the experience "
      "array.");

  mod.def(
      "adv_search",
      [](const std::string& target, int steps, int restart_every, int batch,
         int m, int n, uint64_t seed) {
        train::AdvSearchConfig cfg;
        cfg.steps = steps;
        cfg.restart_every = restart_every;
        cfg.batch = batch;
        cfg.m = m;
        cfg.n = n;
        std::unique_ptr<SlotPolicy> policy = make_baseline(target);
        train::AdvSearchResult res;
        {
          py::gil_scoped_release release;
          std::mt19937_64 rng(seed);
          res = train::adv_search_fixed(*policy, cfg, rng);
        }
        py::dict d;
        d["instance_json"] = res.best_instance.to_json();
        d["best_objective"] = res.best_objective;
        d["trace"] = res.trace;
        return d;
      },
      py::arg("target"), py::arg("steps") = 5000,
      py::arg("restart_every") = 500, py::arg("batch") = 100,
      py::arg("m") = 25, py::arg("n") = 5, py::arg("seed") = 0,
      "Search the generator for the instance minimizing a fixed policy's "
      "fractional competitive ratio.");

  mod.def(
      "ski_optimal_strategy",
      [](int B, int N) { return ski::ski_optimal_strategy(B, N).probs; },
      py::arg("B"), py::arg("N"),
      "Optimal buy-day probabilities for buy cost B over an N-day horizon.");

  mod.def(
      "ski_optimal_cr",
      [](int B, int N) {
        return ski::strategy_cr(ski::ski_optimal_strategy(B, N));
      },
      py::arg("B"), py::arg("N"),
      "Worst-case ratio 1/(1-(1-1/B)^B) of the optimal strategy.");

  mod.def(
      "ski_train",
      [](const std::string& config_json) {
        ski::SkiTrainConfig cfg =
            config_json.empty() ? ski::SkiTrainConfig{}
                                : ski::SkiTrainConfig::from_json(config_json);
        ski::SkiTrainResult res;
        {
          py::gil_scoped_release release;
          res = ski::ski_train(cfg);
        }
        py::dict d;
        d["params_json"] = net::params_to_json(res.params);
        d["config_json"] = cfg.to_json();
        d["history_csv"] = ski::ski_history_csv(res.history);
        d["steps_completed"] = res.steps_completed;
        d["aborted"] = res.aborted;
        d["abort_reason"] = res.abort_reason;
        return d;
      },
      py::arg("config_json") = std::string(),
      "Best-response training of the buy-time CDF network; empty config "
      "means defaults.");

  mod.def(
      "ski_cdf",
      [](const std::string& config_json, const std::string& params_json,
         int B, int N) {
        const ski::SkiTrainConfig cfg =
            ski::SkiTrainConfig::from_json(config_json);
        return ski::instantiate_cdf(cfg.net, net::params_from_json(params_json),
                                    B, N);
      },
      py::arg("config_json"), py::arg("params_json"), py::arg("B"),
      py::arg("N"),
      "The trained network's cumulative buy probability at each of the N "
      "days of a (B, N) instantiation.");

  mod.def(
      "ski_sup_distance",
      [](const std::string& config_json, const std::string& params_json,
         int B, int N) {
        const ski::SkiTrainConfig cfg =
            ski::SkiTrainConfig::from_json(config_json);
        return ski::strategy_sup_distance(
            cfg.net, net::params_from_json(params_json), B, N);
      },
      py::arg("config_json"), py::arg("params_json"), py::arg("B"),
      py::arg("N"),
      "Sup distance between the instantiated CDF and the optimal strategy's "
      "cumulative.");
}
