#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>
#include <sstream>

#include "betaips/cli.hpp"
#include "betaips/errors.hpp"
#include "betaips/estimators.hpp"
#include "betaips/evaluation.hpp"
#include "betaips/io.hpp"
#include "betaips/learning.hpp"
#include "betaips/log.hpp"
#include "betaips/simulator.hpp"

namespace py = pybind11;
using namespace betaips;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

LoggedDataset dataset_from_arrays(const RowMatrix& contexts, const std::vector<std::size_t>& actions,
                                  const std::vector<double>& rewards,
                                  const std::vector<double>& propensities,
                                  std::size_t num_actions) {
  const auto n = static_cast<std::size_t>(contexts.rows());
  if (actions.size() != n || rewards.size() != n || propensities.size() != n) {
    throw ContractViolation("contexts, actions, rewards and propensities must have equal length");
  }
  LoggedDataset data(static_cast<std::size_t>(contexts.cols()), num_actions);
  data.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    data.add(contexts.row(static_cast<Eigen::Index>(i)).transpose(), actions[i], rewards[i],
             propensities[i]);
  }
  return data;
}

py::dict breakdown_dict(const EstimateBreakdown& b) {
  py::dict d;
  d["value"] = b.value;
  d["normalizer"] = b.normalizer;
  d["beta_used"] = b.beta_used ? py::cast(*b.beta_used) : py::none();
  d["sample_count"] = b.sample_count;
  d["baseline_fallback"] = b.baseline_fallback;
  d["weights"] = py::array_t<double>(static_cast<py::ssize_t>(b.weights.size()), b.weights.data());
  return d;
}

}  // namespace

PYBIND11_MODULE(_betaips, m) {
  m.doc() = "Baseline-corrected off-policy estimators and learning";
  set_warnings_enabled(false);

  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<DegenerateBaseline>(m, "DegenerateBaseline", PyExc_ArithmeticError);
  py::register_exception<DegenerateSupport>(m, "DegenerateSupport", PyExc_ArithmeticError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<LoggedDataset>(m, "LoggedDataset")
      .def(py::init(&dataset_from_arrays), py::arg("contexts"), py::arg("actions"),
           py::arg("rewards"), py::arg("propensities"), py::arg("num_actions"))
      .def("__len__", &LoggedDataset::size)
      .def_property_readonly("context_dim", &LoggedDataset::context_dim)
      .def_property_readonly("num_actions", &LoggedDataset::num_actions)
      .def_property_readonly("contexts", [](const LoggedDataset& d) { return RowMatrix(d.contexts()); })
      .def_property_readonly("actions", [](const LoggedDataset& d) {
        return std::vector<std::size_t>(d.actions().begin(), d.actions().end());
      })
      .def_property_readonly("rewards", [](const LoggedDataset& d) {
        return std::vector<double>(d.rewards().begin(), d.rewards().end());
      })
      .def_property_readonly("propensities", [](const LoggedDataset& d) {
        return std::vector<double>(d.propensities().begin(), d.propensities().end());
      })
      .def("slice", &LoggedDataset::slice, py::arg("begin"), py::arg("end"))
      .def("with_reward_shift", &LoggedDataset::with_reward_shift, py::arg("shift"))
      .def("mean_reward", &LoggedDataset::mean_reward)
      .def(py::self == py::self);

  py::class_<LinearSoftmaxPolicy>(m, "LinearSoftmaxPolicy")
      .def(py::init<std::size_t, std::size_t>(), py::arg("num_actions"), py::arg("context_dim"))
      .def(py::init<Matrix>(), py::arg("weights"))
      .def_property("weights", py::overload_cast<>(&LinearSoftmaxPolicy::weights, py::const_),
                    [](LinearSoftmaxPolicy& p, const Matrix& w) {
                      if (w.rows() != p.weights().rows() || w.cols() != p.weights().cols()) {
                        throw ContractViolation("weights shape mismatch");
                      }
                      p.weights() = w;
                    })
      .def_property_readonly("num_actions", &LinearSoftmaxPolicy::num_actions)
      .def_property_readonly("context_dim", &LinearSoftmaxPolicy::context_dim)
      .def("action_probabilities",
           [](const LinearSoftmaxPolicy& p, const Vector& x) { return action_probabilities(p, x); })
      .def("grad_prob", [](const LinearSoftmaxPolicy& p, const Vector& x,
                           std::size_t a) { return grad_prob(p, x, a); })
      .def("grad_log_prob", [](const LinearSoftmaxPolicy& p, const Vector& x,
                               std::size_t a) { return grad_log_prob(p, x, a); });

  py::class_<EnvironmentConfig>(m, "EnvironmentConfig")
      .def(py::init<>())
      .def_readwrite("context_dim", &EnvironmentConfig::context_dim)
      .def_readwrite("num_actions", &EnvironmentConfig::num_actions)
      .def_readwrite("inverse_temperature", &EnvironmentConfig::inverse_temperature)
      .def_readwrite("dataset_size", &EnvironmentConfig::dataset_size)
      .def_readwrite("seed", &EnvironmentConfig::seed);

  py::class_<Environment>(m, "Environment")
      .def(py::init<Matrix, Vector>(), py::arg("action_embeddings"), py::arg("action_biases"))
      .def_property_readonly("action_embeddings", &Environment::action_embeddings)
      .def_property_readonly("action_biases", &Environment::action_biases)
      .def("expected_rewards", [](const Environment& e, const Vector& x) { return e.expected_rewards(x); })
      .def("logging_policy_probs", [](const Environment& e, const Vector& x, double tau) {
        return logging_policy_probs(e, x, tau);
      });

  m.def("generate_environment", &generate_environment, py::arg("config"));
  m.def(
      "generate_logged_dataset",
      [](const Environment& env, const EnvironmentConfig& cfg) { return generate_logged_dataset(env, cfg); },
      py::arg("env"), py::arg("config"));
  m.def(
      "true_policy_value",
      [](const Environment& env, const LinearSoftmaxPolicy& policy, std::size_t num_contexts,
         std::uint64_t seed) {
        Rng rng = make_rng(seed, Stream::kTrueValue);
        return true_policy_value(env, policy, num_contexts, rng);
      },
      py::arg("env"), py::arg("policy"), py::arg("num_contexts"), py::arg("seed") = 0);

  // Estimators; modes use the CLI names (ips, snips, dr, beta_ips, ...).
  m.def(
      "estimate",
      [](const LoggedDataset& data, const LinearSoftmaxPolicy& policy, const std::string& mode) {
        return breakdown_dict(estimate_value(data, policy, parse_baseline_mode(mode)));
      },
      py::arg("data"), py::arg("policy"), py::arg("estimator"));
  m.def("ips_value", [](const LoggedDataset& d, const LinearSoftmaxPolicy& p) { return ips_value(d, p).value; });
  m.def("snips_value", [](const LoggedDataset& d, const LinearSoftmaxPolicy& p) { return snips_value(d, p).value; });
  m.def(
      "beta_ips_value",
      [](const LoggedDataset& d, const LinearSoftmaxPolicy& p, double beta) {
        return beta_ips_value(d, p, beta).value;
      },
      py::arg("data"), py::arg("policy"), py::arg("beta"));
  m.def("importance_weights", &importance_weights);
  m.def("beta_estimator_optimal",
        py::overload_cast<const LoggedDataset&, const LinearSoftmaxPolicy&>(&beta_estimator_optimal));
  m.def("beta_grad_optimal", &beta_grad_optimal);
  m.def("onpolicy_beta_optimal", &onpolicy_beta_optimal);
  m.def("ips_gradient", &ips_gradient);
  m.def("beta_ips_gradient", &beta_ips_gradient, py::arg("data"), py::arg("policy"), py::arg("beta"));
  m.def("snips_gradient", &snips_gradient);
  m.def("lambda_ips_gradient", &lambda_ips_gradient, py::arg("data"), py::arg("policy"), py::arg("lam"));
  m.def("gradient_sample_variance", &gradient_sample_variance, py::arg("data"), py::arg("policy"),
        py::arg("beta"));
  m.def("estimator_sample_variance",
        [](const std::vector<double>& v) { return estimator_sample_variance(v); });
  m.def("relative_absolute_error", &relative_absolute_error);

  py::class_<OptimizerConfig>(m, "OptimizerConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &OptimizerConfig::learning_rate)
      .def_readwrite("decay_rate", &OptimizerConfig::decay_rate)
      .def_readwrite("epochs", &OptimizerConfig::epochs)
      .def_readwrite("batch_size", &OptimizerConfig::batch_size)
      .def_readwrite("seed", &OptimizerConfig::seed);

  py::class_<EpochRecord>(m, "EpochRecord")
      .def_readonly("epoch", &EpochRecord::epoch)
      .def_readonly("test_policy_value", &EpochRecord::test_policy_value)
      .def_readonly("mean_minibatch_gradient_variance", &EpochRecord::mean_minibatch_gradient_variance)
      .def_readonly("beta_used", &EpochRecord::beta_used);

  py::class_<TrainingReport>(m, "TrainingReport")
      .def_readonly("epochs", &TrainingReport::epochs)
      .def_readonly("final_policy", &TrainingReport::final_policy)
      .def_readonly("baseline_fallbacks", &TrainingReport::baseline_fallbacks);

  // `env` and `test_contexts` enable the per-epoch test value.
  const auto train = [](bool full) {
    return [full](const LoggedDataset& data, const std::string& mode, const OptimizerConfig& cfg,
                  const Environment* env, std::size_t test_contexts, std::uint64_t test_seed) {
      std::optional<PolicyValueOracle> test;
      if (env) {
        Rng rng = make_rng(test_seed, Stream::kTestContexts);
        test.emplace(*env, test_contexts, rng);
      }
      const ValueOracle oracle_fn = test ? ValueOracle(std::cref(*test)) : ValueOracle{};
      const BaselineMode parsed = parse_baseline_mode(mode, data.mean_reward());
      py::gil_scoped_release release;
      return full ? train_full_batch(data, parsed, cfg, oracle_fn)
                  : train_mini_batch(data, parsed, cfg, oracle_fn);
    };
  };
  m.def("train_full_batch", train(true), py::arg("data"), py::arg("estimator"), py::arg("config"),
        py::arg("env") = nullptr, py::arg("test_contexts") = 100000, py::arg("test_seed") = 0);
  m.def("train_mini_batch", train(false), py::arg("data"), py::arg("estimator"), py::arg("config"),
        py::arg("env") = nullptr, py::arg("test_contexts") = 100000, py::arg("test_seed") = 0,
        "Bare 'banditnet' uses the mean logged reward as lambda.");

  py::class_<OpeResultRow>(m, "OpeResultRow")
      .def_readonly("estimator", &OpeResultRow::estimator)
      .def_readonly("k_actions", &OpeResultRow::k_actions)
      .def_readonly("inv_temperature", &OpeResultRow::inv_temperature)
      .def_readonly("n_logged", &OpeResultRow::n_logged)
      .def_readonly("mse", &OpeResultRow::mse)
      .def_readonly("bias_squared", &OpeResultRow::bias_squared)
      .def_readonly("variance", &OpeResultRow::variance)
      .def_readonly("mean_estimate", &OpeResultRow::mean_estimate)
      .def_readonly("true_value", &OpeResultRow::true_value)
      .def_readonly("replications", &OpeResultRow::replications)
      .def_readonly("baseline_fallbacks", &OpeResultRow::baseline_fallbacks);

  m.def(
      "run_ope_experiment",
      [](std::vector<std::size_t> ks, std::vector<double> taus, std::vector<std::size_t> ns,
         std::size_t replications, std::vector<std::string> estimators, std::uint64_t seed,
         std::size_t true_value_contexts, std::size_t threads) {
        OpeExperimentConfig cfg;
        cfg.action_space_sizes = std::move(ks);
        cfg.inverse_temperatures = std::move(taus);
        cfg.dataset_sizes = std::move(ns);
        cfg.replications = replications;
        cfg.estimators.clear();
        for (const auto& e : estimators) cfg.estimators.push_back(parse_baseline_mode(e));
        cfg.seed = seed;
        cfg.true_value_contexts = true_value_contexts;
        cfg.threads = threads;
        py::gil_scoped_release release;
        return run_ope_experiment(cfg);
      },
      py::arg("action_space_sizes"), py::arg("inverse_temperatures"), py::arg("dataset_sizes"),
      py::arg("replications") = 100,
      py::arg("estimators") = std::vector<std::string>{"ips", "snips", "dr", "beta_ips"},
      py::arg("seed") = 0, py::arg("true_value_contexts") = 1000000, py::arg("threads") = 1);

  m.def("read_dataset", &read_dataset, py::arg("path"), py::arg("num_actions") = py::none());
  m.def("write_dataset", &write_dataset, py::arg("path"), py::arg("data"));
  m.def("read_policy", &read_policy, py::arg("path"));
  m.def("write_policy", &write_policy, py::arg("path"), py::arg("policy"));

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli_dispatch(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a betaips subcommand; returns (exit code, stdout, stderr).");
}
